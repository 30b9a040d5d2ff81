"""Exact diagonalisation of a particle coupled to finitely many oscillators.

Serves as an independent check on the continuum moments: the bath density
is binned into ``N`` oscillators, the mass-weighted coupling matrix is
diagonalised, and the moments are the sums over its eigenmodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, ModelInconsistencyError
from .spectral import OhmicSharp, ParticleParams, SpectralDensity, Tabulated


@dataclass(frozen=True, eq=False)
class FiniteBath:
    """Oscillator masses ``mu_i`` at strictly increasing frequencies ``omega_i``."""

    masses: np.ndarray
    freqs: np.ndarray
    particle: ParticleParams

    def __post_init__(self):
        mu = np.asarray(self.masses, dtype=float)
        w = np.asarray(self.freqs, dtype=float)
        if mu.shape != w.shape or mu.ndim != 1:
            raise DomainError("masses and freqs must be equal-length 1-d arrays")
        if np.any(mu < 0) or np.any(w <= 0) or np.any(np.diff(w) <= 0):
            raise DomainError("need mu_i >= 0, omega_i > 0, strictly increasing")
        object.__setattr__(self, "masses", mu)
        object.__setattr__(self, "freqs", w)

    @property
    def N(self) -> int:
        return self.freqs.size


@dataclass(frozen=True, eq=False)
class ModeDecomposition:
    """Eigenfrequencies squared and the particle's weight in each mode."""

    nu_sq: np.ndarray
    weights: np.ndarray


def _default_band(env, particle):
    lo = 1e-3 * particle.Omega
    if isinstance(env, OhmicSharp):
        return lo, env.omega_c
    if isinstance(env, Tabulated):
        return env.support()
    return lo, 1e3 * env.omega_c


def discretize(env: SpectralDensity, particle: ParticleParams, N: int, strategy: str = "log",
               band: Optional[tuple] = None, infrared: str = "auto") -> FiniteBath:
    """Bin ``env`` into ``N`` oscillators over ``band``.

    Each bin holds the exact bath mass ``int mu d omega`` of its interval and
    sits at the bin midpoint (geometric midpoint for ``"log"`` spacing).
    For infrared-singular densities the coupling below the band is kept as
    one extra oscillator at ``lo / sqrt(3)`` carrying ``int_0^lo omega^2 mu``
    (``infrared="lump"``, the default via ``"auto"``); ``infrared="none"``
    drops it.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    lo, hi = band if band is not None else _default_band(env, particle)
    if not (0 <= lo < hi and math.isfinite(hi)):
        raise DomainError("band must satisfy 0 <= lo < hi < inf")
    if strategy == "log":
        if lo <= 0:
            raise DomainError("log spacing needs a positive lower band edge")
        edges = np.geomspace(lo, hi, N + 1)
        centres = np.sqrt(edges[:-1] * edges[1:])
    elif strategy == "uniform":
        edges = np.linspace(lo, hi, N + 1)
        centres = 0.5 * (edges[:-1] + edges[1:])
    else:
        raise DomainError(f"unknown strategy {strategy!r}")
    if lo == 0 and env.infrared_singular:
        raise DomainError("infrared-singular density needs a positive lower band edge")
    masses = np.asarray(env.mass_between(edges[:-1], edges[1:]), dtype=float)
    masses = np.maximum(masses, 0.0)

    if infrared not in ("auto", "lump", "none"):
        raise DomainError(f"unknown infrared treatment {infrared!r}")
    lump = infrared == "lump" or (infrared == "auto" and env.infrared_singular)
    if lump and lo > 0:
        w_l = lo / math.sqrt(3.0)
        mu_l = env.coupling_below(lo) / w_l**2
        if mu_l > 0:
            masses = np.concatenate(([mu_l], masses))
            centres = np.concatenate(([w_l], centres))
    return FiniteBath(masses, centres, particle)


def build_matrix(bath: FiniteBath) -> np.ndarray:
    """Symmetric positive-definite frequency matrix of particle plus bath.

    Row/column 0 is the particle; entry ``(0, 0)`` is
    ``Omega^2 + sum mu_i omega_i^2 / m``.
    """
    m, W = bath.particle.m, bath.particle.Omega
    mu, w = bath.masses, bath.freqs
    n = mu.size
    A = np.zeros((n + 1, n + 1))
    A[0, 0] = W * W + math.fsum(mu * w * w) / m
    off = -w * w * np.sqrt(mu / m)
    A[0, 1:] = off
    A[1:, 0] = off
    A[np.arange(1, n + 1), np.arange(1, n + 1)] = w * w
    return A


def decompose(A: np.ndarray) -> ModeDecomposition:
    """Eigen-decomposition; weights are squared particle components."""
    nu_sq, vecs = np.linalg.eigh(A)
    if not np.all(nu_sq > 0):
        raise ModelInconsistencyError(
            f"frequency matrix is not positive definite (min eigenvalue {nu_sq.min():.3g})")
    return ModeDecomposition(nu_sq, vecs[0] ** 2)


def exact_moments(modes: ModeDecomposition, particle: ParticleParams, T: float) -> tuple[float, float]:
    """``(<q^2>, <p^2>)`` as sums over normal modes at temperature ``T``."""
    if not (T >= 0 and math.isfinite(T)):
        raise DomainError("temperature must be finite and >= 0")
    hb, m = particle.hbar, particle.m
    nu = np.sqrt(modes.nu_sq)
    if T == 0:
        c = np.ones_like(nu)
    else:
        x = hb * nu / (particle.kB * T)
        c = 1.0 / np.tanh(np.minimum(x, 80.0) / 2.0)
    q2 = math.fsum(modes.weights * hb / (2.0 * m * nu) * c)
    p2 = math.fsum(modes.weights * m * hb * nu / 2.0 * c)
    return q2, p2
