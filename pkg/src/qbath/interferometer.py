"""Two-lead interferometer on a harmonic waveguide.

A particle travels along a guide with harmonic transverse confinement and
tunnels into two leads whose contacts sit at transverse positions ``+x``
and ``-x``.  The amplitudes in the leads combine with a relative phase
``phi``; the fringe visibility measures the off-diagonal element
``sigma(x, -x)`` of the transverse state.

Contacts are modelled by normalised Gaussian states of width
``s = epsilon / (2 sqrt(pi))`` centred on ``+-x``, so that channel sums
converge; ``contact="point"`` uses the bare channel functions at ``+-x``
with a fixed truncation instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .equilibrium import GaussianDensityMatrix
from .errors import DomainError, OverflowGuardError, ResonanceSingularError, TruncationError
from .finite_bath import FiniteBath
from .spectral import ParticleParams

#: largest channel index accepted by :func:`chi` unless raised explicitly
CHI_MAX_N = 1000

_RESCALE = 1e150
_LOG_RESCALE = math.log(_RESCALE)


def _hermite_table(n_max: int, xi: np.ndarray) -> np.ndarray:
    """Normalised Hermite functions h_0..h_n_max at ``xi`` (rows = n)."""
    out = np.empty((n_max + 1,) + xi.shape)
    base = -0.5 * xi * xi - 0.25 * math.log(math.pi)
    log_scale = np.zeros_like(xi)
    prev = np.zeros_like(xi)
    cur = np.ones_like(xi)
    out[0] = np.exp(base)
    for n in range(n_max):
        nxt = math.sqrt(2.0 / (n + 1)) * xi * cur - math.sqrt(n / (n + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE
        if np.any(big):
            prev = np.where(big, prev / _RESCALE, prev)
            cur = np.where(big, cur / _RESCALE, cur)
            log_scale = log_scale + np.where(big, _LOG_RESCALE, 0.0)
        with np.errstate(over="ignore", under="ignore"):
            out[n + 1] = cur * np.exp(base + log_scale)
    return out


def chi_all(n_max: int, q, particle: ParticleParams, max_n: int = CHI_MAX_N) -> np.ndarray:
    """Transverse eigenfunctions ``chi_0 .. chi_n_max`` at ``q``; shape ``(n_max+1, *q.shape)``."""
    if n_max < 0:
        raise DomainError("channel index must be >= 0")
    if n_max > max_n:
        raise OverflowGuardError(f"channel index {n_max} exceeds the guard {max_n}")
    ell = particle.length
    xi = np.asarray(q, dtype=float) / ell
    return _hermite_table(n_max, xi) / math.sqrt(ell)


def chi(n: int, q, particle: ParticleParams, max_n: int = CHI_MAX_N):
    """Normalised transverse eigenfunction of energy ``hbar Omega (n + 1/2)``."""
    out = chi_all(n, q, particle, max_n)[n]
    return out[()] if out.ndim == 0 else out


def contact_width(epsilon: float) -> float:
    """Width ``s`` of the Gaussian contact with ``int g = sqrt(epsilon)``, ``int g^2 = 1``."""
    return epsilon / (2.0 * math.sqrt(math.pi))


def contact_amplitudes(n_max: int, x: float, epsilon: float, particle: ParticleParams) -> np.ndarray:
    """``c_n = epsilon^-1/2 int chi_n(q) g(q - x) dq`` for ``n = 0..n_max``.

    Tends to ``chi_n(x)`` as ``epsilon -> 0``.  Evaluated by a closed
    three-term recurrence for the Gaussian overlaps of Hermite functions.
    """
    ell = particle.length
    s = contact_width(epsilon)
    xh, sh = x / ell, s / ell
    a = 0.5 * (1.0 + 1.0 / sh**2)
    A = (sh**2 - 1.0) / (2.0 * (1.0 + sh**2))
    B = math.sqrt(2.0) * xh / (1.0 + sh**2)
    log_C = (-0.25 * math.log(math.pi) + 0.5 * math.log(math.pi / a)
             - xh * xh / (2.0 * (1.0 + sh**2)))
    log_pref = 0.5 * (math.log(ell) - math.log(epsilon) - math.log(s * math.sqrt(math.pi))) + log_C
    out = np.empty(n_max + 1)
    prev, cur, log_scale = 0.0, 1.0, 0.0
    out[0] = math.exp(log_pref)
    for n in range(n_max):
        nxt = (B * cur + 2.0 * A * math.sqrt(n) * prev) / math.sqrt(n + 1)
        prev, cur = cur, nxt
        if abs(cur) > _RESCALE:
            prev /= _RESCALE
            cur /= _RESCALE
            log_scale += _LOG_RESCALE
        e = log_pref + log_scale
        out[n + 1] = cur * math.exp(e) if e < 700 else math.copysign(math.inf, cur)
    if not np.all(np.isfinite(out)):
        raise OverflowGuardError("contact amplitude overflow; reduce x / epsilon")
    return out


@dataclass(frozen=True)
class Junction:
    x: float
    alpha: float
    epsilon: float
    k: float
    n_incident: int = 0
    n_channels: int = 64
    particle: ParticleParams = ParticleParams()
    contact: str = "gaussian"

    def __post_init__(self):
        if not (self.epsilon > 0 and self.k > 0):
            raise DomainError("junction needs epsilon > 0 and k > 0")
        if not (0 <= self.n_incident < self.n_channels):
            raise DomainError("need 0 <= n_incident < n_channels")
        if not (math.isfinite(self.x) and math.isfinite(self.alpha)):
            raise DomainError("x and alpha must be finite")
        if self.contact not in ("gaussian", "point"):
            raise DomainError(f"unknown contact model {self.contact!r}")


def channel_wavevectors(junction: Junction, n_channels: Optional[int] = None):
    """``(kappa, k_n)``; ``k_n`` is ``i |k_n|`` for evanescent channels."""
    p = junction.particle
    N = n_channels or junction.n_channels
    n = np.arange(N)
    two_m_over_h2 = 2.0 * p.m / p.hbar**2
    E = p.hbar * p.Omega * (n + 0.5)
    E_in = p.hbar * p.Omega * (junction.n_incident + 0.5)
    kappa = math.sqrt(junction.k**2 + two_m_over_h2 * E_in)
    kn2 = junction.k**2 + two_m_over_h2 * (E_in - E)
    kn = np.where(kn2 >= 0, np.sqrt(np.abs(kn2)) + 0j, 1j * np.sqrt(np.abs(kn2)))
    kn[junction.n_incident] = junction.k
    return kappa, kn


@dataclass(frozen=True, eq=False)
class ScatteringSolution:
    t: np.ndarray
    r: np.ndarray
    s1: complex
    s2: complex
    R: complex  # R_plus; equals R_minus by parity of the channel functions
    Z: complex  # Z_{+-}
    lambdas: np.ndarray
    kappa: float
    k_n: np.ndarray
    c_plus: np.ndarray
    c_minus: np.ndarray
    determinant: complex
    R_minus: complex = 0j
    Z_mp: complex = 0j

    @property
    def n_channels(self) -> int:
        return self.t.size


def _amplitudes(junction: Junction, N: int):
    if junction.contact == "point":
        c = chi_all(N - 1, np.array([junction.x, -junction.x]), junction.particle, max_n=max(N, CHI_MAX_N))
        return c[:, 0], c[:, 1]
    cp = contact_amplitudes(N - 1, junction.x, junction.epsilon, junction.particle)
    sign = np.where(np.arange(N) % 2 == 0, 1.0, -1.0)
    return cp, cp * sign


def _aggregates(cp, cm, lam, pref):
    # a channel exactly at threshold (lambda = 0) only matters if it couples
    at = lam == 0
    if np.any(at):
        cmax = max(np.max(np.abs(cp)), np.max(np.abs(cm)))
        if np.any(np.maximum(np.abs(cp[at]), np.abs(cm[at])) > 1e-8 * cmax):
            raise ResonanceSingularError("a coupled channel sits exactly at threshold (k_n = 0)")
        lam = np.where(at, np.inf, lam)
    Rp = 1.0 + pref * np.sum(np.abs(cp) ** 2 / lam)
    Rm = 1.0 + pref * np.sum(np.abs(cm) ** 2 / lam)
    Zpm = pref * np.sum(cp * np.conj(cm) / lam)
    Zmp = pref * np.sum(cm * np.conj(cp) / lam)
    return Rp, Rm, Zpm, Zmp


def scattering_solve(junction: Junction, rtol: float = 1e-8, max_channels: int = 1 << 17) -> ScatteringSolution:
    """Solve the junction's coupled lead/guide system.

    With ``a = alpha epsilon^3/2 m / hbar^2`` and ``lambda_n = k_n / kappa``,
    the lead amplitudes obey

        (1 + a^2/kappa^2 S_++) s1 + a^2/kappa^2 S_+- s2 = (a / i kappa) c+_n'
        a^2/kappa^2 S_-+ s1 + (1 + a^2/kappa^2 S_--) s2 = (a / i kappa) c-_n'

    where ``S_ab = sum_n c^a_n conj(c^b_n) / lambda_n``; the guide amplitudes
    follow as ``r_n = (a / i k_n)(s1 conj(c+_n) + s2 conj(c-_n))`` and
    ``t_n = delta_nn' + r_n``.
    """
    p = junction.particle
    a = junction.alpha * junction.epsilon**1.5 * p.m / p.hbar**2
    gauss = junction.contact == "gaussian"
    if gauss:
        kappa0, _ = channel_wavevectors(junction, junction.n_incident + 1)
        n_open = int(math.floor(p.hbar * kappa0**2 / (2.0 * p.m * p.Omega) - 0.5)) + 1
        N = max(junction.n_channels, n_open + 20)
    else:
        N = junction.n_channels
    prev = None
    while True:
        kappa, kn = channel_wavevectors(junction, N)
        lam = kn / kappa
        cp, cm = _amplitudes(junction, N)
        pref = (a / kappa) ** 2
        agg = _aggregates(cp, cm, lam, pref)
        if not gauss or a == 0:
            break
        cmax = np.max(np.abs(cp)) or 1.0
        tail_ok = abs(cp[-1]) < 1e-8 * cmax and abs(cp[-2]) < 1e-8 * cmax
        if prev is not None and tail_ok:
            scale = max(abs(agg[0]), abs(agg[2]), 1.0)
            if max(abs(x - y) for x, y in zip(agg, prev)) <= rtol * scale:
                break
        if 2 * N > max_channels:
            tail = max(abs(x - y) for x, y in zip(agg, prev)) if prev is not None else math.nan
            raise TruncationError(f"channel sums not converged with {N} channels", tail)
        prev = agg
        N *= 2
    Rp, Rm, Zpm, Zmp = agg
    det = Rp * Rm - Zpm * Zmp
    if abs(det) < 1e-12 * max(abs(Rp * Rm), abs(Zpm * Zmp), 1.0):
        raise ResonanceSingularError(f"junction determinant vanishes ({abs(det):.3g})")
    n0 = junction.n_incident
    P = a / (1j * kappa)
    s1 = P * (Rm * cp[n0] - Zpm * cm[n0]) / det
    s2 = P * (Rp * cm[n0] - Zmp * cp[n0]) / det
    with np.errstate(divide="ignore", invalid="ignore"):
        r = a / (1j * kn) * (s1 * np.conj(cp) + s2 * np.conj(cm))
    r[kn == 0] = 0.0  # decoupled threshold channel, dropped from the sums
    t = r.copy()
    t[n0] += 1.0
    return ScatteringSolution(t=t, r=r, s1=complex(s1), s2=complex(s2), R=complex(Rp), Z=complex(Zpm),
                              lambdas=lam, kappa=kappa, k_n=kn, c_plus=cp, c_minus=cm,
                              determinant=complex(det), R_minus=complex(Rm), Z_mp=complex(Zmp))


def linear_system_residual(sol: ScatteringSolution, junction: Junction) -> float:
    """Largest residual of the four matching conditions (energy-scaled)."""
    p = junction.particle
    h2m = p.hbar**2 / (2.0 * p.m)
    ae = junction.alpha * junction.epsilon**1.5
    delta = np.zeros(sol.t.size)
    delta[junction.n_incident] = 1.0
    guide = -1j * h2m * sol.k_n * (sol.t - delta + sol.r) + ae * (sol.s1 * np.conj(sol.c_plus)
                                                                  + sol.s2 * np.conj(sol.c_minus))
    lead1 = -h2m * 2j * sol.kappa * sol.s1 + ae * np.sum(sol.c_plus * sol.t)
    lead2 = -h2m * 2j * sol.kappa * sol.s2 + ae * np.sum(sol.c_minus * sol.t)
    cont = delta + sol.r - sol.t
    scale = h2m * sol.kappa
    return float(max(np.max(np.abs(guide)) / scale, abs(lead1) / scale, abs(lead2) / scale,
                     np.max(np.abs(cont))))


def tau_high_energy(junction: Junction) -> complex:
    """Lead amplitude per unit channel amplitude when ``hbar^2 k^2 / 2m >> E_n'``."""
    p = junction.particle
    b = junction.alpha * junction.epsilon * p.m / (p.hbar**2 * junction.k)
    return b * math.sqrt(junction.epsilon) / (1j * (1.0 + b * b))


def coherence_length(T_eff: float, m_eff: float, particle: ParticleParams) -> float:
    """Decay length of ``sigma(x, -x) / sigma(x, x) = exp(-x^2 / 2 xi^2)``.

    ``xi^2 = hbar / (4 m_eff Omega) * sinh(hbar Omega / k T_eff)``; infinite
    for a pure state.
    """
    if T_eff < 0 or not m_eff > 0:
        raise DomainError("need T_eff >= 0 and m_eff > 0")
    if T_eff == 0:
        return math.inf
    y = particle.hbar * particle.Omega / (particle.kB * T_eff)
    if y > 1400:
        return math.inf
    return math.sqrt(particle.hbar / (4.0 * m_eff * particle.Omega) * math.sinh(y))


def coherence_length_from_moments(q2: float, p2: float, particle: ParticleParams) -> float:
    """Same length from the moments: ``xi^2 = q2 hbar^2 / (4 q2 p2 - hbar^2)``."""
    d = 4.0 * q2 * p2 - particle.hbar**2
    if d <= 0:
        return math.inf
    return math.sqrt(q2 * particle.hbar**2 / d)


def _xi_of(sigma: GaussianDensityMatrix) -> float:
    d = sigma.a_minus - sigma.a_plus
    return math.inf if d <= 0 else 1.0 / math.sqrt(8.0 * d)


def contrast(x: float, xi: float) -> float:
    if math.isinf(xi):
        return 1.0
    return math.exp(-x * x / (2.0 * xi * xi))


@dataclass(frozen=True, eq=False)
class FringePattern:
    phi_grid: np.ndarray
    intensity: np.ndarray
    P1: float
    P2: float
    contrast: float
    xi: float


def fringe_pattern(sigma: GaussianDensityMatrix, junction: Union[Junction, float], tau: complex,
                   phi_grid: Sequence[float]) -> FringePattern:
    """Transmitted probability as a function of the enclosed phase ``phi``."""
    phi = np.asarray(phi_grid, dtype=float)
    if phi.size < 2:
        raise DomainError("phi grid needs at least two points")
    x = junction.x if isinstance(junction, Junction) else float(junction)
    t2 = abs(tau) ** 2
    s_pp = float(sigma(x, x))
    s_mm = float(sigma(-x, -x))
    s_mp = float(sigma(-x, x))
    s_pm = float(sigma(x, -x))
    P = t2 * (s_pp + s_mm + (s_mp * np.exp(1j * phi) + s_pm * np.exp(-1j * phi)).real)
    xi = _xi_of(sigma)
    return FringePattern(phi, np.maximum(P, 0.0), t2 * s_pp, t2 * s_mm, contrast(x, xi), xi)


def sampled_contrast(pattern: FringePattern) -> float:
    """``sqrt((<P^2> - <P>^2) / (2 P1 P2))`` with ``<.>`` the mean over the grid.

    Exact (to rounding) for a uniform grid on ``[0, 2 pi)``.
    """
    P = pattern.intensity
    var = float(np.var(P))
    return math.sqrt(var / (2.0 * pattern.P1 * pattern.P2))


def uniform_phase_grid(n: int = 1024) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


@dataclass(frozen=True)
class ValidityReport:
    kinetic: float
    potential_scale: float  # <q^2> sum mu_i omega_i^2
    fluctuation_scale: float  # sqrt(<q^2> sum mu_i omega_i^2 <eps_i>)
    ratio_potential: float
    ratio_fluctuation: float
    passed: bool


def validity_check(junction: Junction, bath: FiniteBath, q2: float, T: float = 0.0,
                   threshold: float = 100.0) -> ValidityReport:
    """Whether the longitudinal energy dominates the bath-boundary energies.

    Both ratios ``(hbar k)^2/2m`` over the two boundary scales must reach
    ``threshold`` (inclusive).  Bath energies include the zero-point part.
    """
    p = junction.particle
    kin = (p.hbar * junction.k) ** 2 / (2.0 * p.m)
    w = bath.freqs
    stiff = math.fsum(bath.masses * w * w)
    if T == 0:
        eps = p.hbar * w / 2.0
    else:
        x = np.minimum(p.hbar * w / (p.kB * T), 80.0)
        eps = p.hbar * w / 2.0 / np.tanh(x / 2.0)
    pot = q2 * stiff
    fluct = math.sqrt(q2 * math.fsum(bath.masses * w * w * eps))
    r1 = kin / pot if pot > 0 else math.inf
    r2 = kin / fluct if fluct > 0 else math.inf
    return ValidityReport(kin, pot, fluct, r1, r2, bool(r1 >= threshold and r2 >= threshold))
