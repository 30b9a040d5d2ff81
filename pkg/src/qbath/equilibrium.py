"""Reduced equilibrium state of the particle in a harmonic bath.

Thermal moments follow from integrating a mode function ``f(nu**2)``
against the particle's Lorentzian weight over the eigenmodes,

    (2/pi) int_0^inf Gamma u**2 f(u**2) du / ((u**2 - Omega**2 - Delta)**2 + Gamma**2 u**2)

plus ``weight * f(nu*^2)`` for each real pole that is kept.  The
resulting Gaussian state is summarised by an effective temperature and
mass, a von Neumann entropy and a position-space density matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DomainError, UncertaintyViolation
from .spectral import BathResponse, ParticleParams, SpectralDensity, bath_response

#: relative slack allowed on ``<q^2><p^2> >= hbar^2/4`` for quadrature noise
UNCERTAINTY_SLACK = 1e-8

_HALF_WIDTH_STEPS = (-10, -5, -3, -2, -1, -0.5, 0, 0.5, 1, 2, 3, 5, 10)


@dataclass(frozen=True)
class MomentIntegral:
    value: float
    error: float
    resonance: Optional[float]  # u at which u^2 - Omega^2 - Delta changes sign
    fallback: bool  # no resonance found; uniform panels were used
    pole_contribution: float = 0.0


def _resonance(response: BathResponse, particle: ParticleParams, hi: float) -> Optional[float]:
    W = particle.Omega

    def g(u):
        return u * u - W * W - float(response.delta_fn(u))

    top = min(hi, 1e3 * W) if math.isfinite(hi) else 1e3 * W
    us = np.geomspace(1e-3 * W, top * (1 - 1e-12), 600)
    gs = np.array([g(u) for u in us])
    ok = np.isfinite(gs)
    for a, b, ga, gb, fa, fb in zip(us[:-1], us[1:], gs[:-1], gs[1:], ok[:-1], ok[1:]):
        if fa and fb and ga < 0 <= gb and float(response.gamma_fn(b)) > 0:
            return optimize.brentq(g, a, b, xtol=1e-14 * b, rtol=1e-14)
    return None


def _panel_edges(response, particle, lo, hi, u_res):
    W = particle.Omega
    edges = {lo}
    if math.isfinite(hi):
        edges.add(hi)
    top = hi if math.isfinite(hi) else 1e4 * max(W, *(b for b in response.breakpoints if math.isfinite(b)), 1.0)
    k = math.floor(math.log10(1e-8 * W))
    while 10.0**k < top:
        if 10.0**k > lo:
            edges.add(10.0**k)
        k += 1
    if not math.isfinite(hi):
        edges.add(top)
    edges.update(b for b in response.breakpoints if lo < b < top)
    if u_res is not None:
        hw = max(float(response.gamma_fn(u_res)) / 2.0, 1e-12 * u_res)
        edges.update(u_res + s * hw for s in _HALF_WIDTH_STEPS if lo < u_res + s * hw < top)
        # geometric panels through the Lorentzian tails
        d = 100 * hw
        while d < u_res:
            edges.update(e for e in (u_res - d, u_res + d) if lo < e < top)
            d *= 10
    return sorted(edges), top


#: resonances narrower than this fraction of their frequency are integrated
#: analytically over a small window
NARROW_RESONANCE = 1e-6


def _narrow_peak(f, response, u_r):
    """Window around a resolution-defeating resonance and its integral.

    Close to the root the integrand is a Lorentzian in ``u`` of half-width
    ``Z Gamma / 2`` and area ``Z f(u_r^2)``, where ``Z = 1 / (1 - dDelta/dz)``;
    over a symmetric window the first-order corrections cancel.
    """
    G = float(response.gamma_fn(u_r))
    if G / 2 >= NARROW_RESONANCE * u_r:
        return None, 0.0
    h = 1e-6 * u_r
    dd = (float(response.delta_fn(u_r + h)) - float(response.delta_fn(u_r - h))) / (2 * h)
    Z = 1.0 / (1.0 - dd / (2 * u_r))
    gam = Z * G / 2
    W = max(100 * gam, 1e-9 * u_r)
    frac = 2 / math.pi * math.atan(W / gam) if gam > 0 else 1.0
    return (u_r - W, u_r + W), Z * f(u_r * u_r) * frac


def _hole_edges(u_r, hole):
    W = hole[1] - u_r
    out = {hole[0], hole[1]}
    k = 1
    while W * 10**k < 0.5 * u_r:
        out.update((u_r - W * 10**k, u_r + W * 10**k))
        k += 1
    return out


def weighted_integral(f: Callable[[float], float], response: BathResponse,
                      particle: ParticleParams, include_pole: Optional[bool] = None,
                      rtol: float = 1e-10) -> MomentIntegral:
    """Integrate ``f(nu**2)`` against the particle's spectral weight.

    ``include_pole=None`` keeps poles inside gaps of ``mu`` and drops the
    above-cutoff bound mode of a sharp cutoff; ``True`` keeps all poles and
    ``False`` none (the decoupled line is always kept).
    """
    poles_in = 0.0
    for p in response.poles:
        keep = (p.kind == "decoupled" or include_pole is True
                or (include_pole is None and p.kind == "gap"))
        if keep and p.weight > 0:
            poles_in += p.weight * f(p.nu_star_sq)
    if response.decoupled:
        return MomentIntegral(poles_in, 0.0, None, False, poles_in)

    W2 = particle.Omega**2
    gfn, dfn = response.gamma_fn, response.delta_fn

    def integrand(u):
        G = float(gfn(u))
        if G == 0.0:
            return 0.0
        u2 = u * u
        d = u2 - W2 - float(dfn(u))
        return 2.0 / math.pi * G * u2 * f(u2) / (d * d + G * G * u2)

    lo, hi = response.support
    u_res = _resonance(response, particle, hi)
    edges, top = _panel_edges(response, particle, lo, hi, u_res)
    scale = abs(f(W2)) or 1.0
    epsabs = 1e-3 * rtol * scale
    total, err = 0.0, 0.0
    hole = None
    if u_res is not None:
        hole, peak = _narrow_peak(f, response, u_res)
        if hole is not None:
            total += peak
            edges = [e for e in edges if not hole[0] < e < hole[1]]
            edges = sorted(set(edges) | {e for e in _hole_edges(u_res, hole) if lo < e < top})
    panels = [(a, b) for a, b in zip(edges[:-1], edges[1:]) if hole is None or (a, b) != hole]
    if not math.isfinite(hi):
        panels.append((top, math.inf))
    for a, b in panels:
        val, e, *rest = integrate.quad(integrand, a, b, epsabs=epsabs, epsrel=rtol, limit=500)
        total += val
        err += e
    if err > max(100 * rtol * abs(total), 10 * epsabs * len(panels)):
        raise ConvergenceError(f"weighted integral error {err:.3g} exceeds tolerance", total + poles_in)
    return MomentIntegral(total + poles_in, err, u_res, u_res is None, poles_in)


def _coth_half(x: float) -> float:
    """``coth(x/2)`` with ``x = hbar nu / kT``; exactly 1 at zero temperature."""
    if math.isinf(x) or x > 80:
        return 1.0
    return 1.0 / math.tanh(x / 2.0)


def _check_T(T):
    if not (T >= 0 and math.isfinite(T)):
        raise DomainError(f"temperature must be finite and >= 0, got {T!r}")


def _occupation_factor(particle, T):
    kT = particle.kB * T

    def c(nu2):
        if kT == 0:
            return 1.0
        return _coth_half(particle.hbar * math.sqrt(nu2) / kT)

    return c


def _as_response(env_or_response, particle) -> BathResponse:
    if isinstance(env_or_response, BathResponse):
        return env_or_response
    if isinstance(env_or_response, SpectralDensity):
        return bath_response(env_or_response, particle)
    raise TypeError("expected a SpectralDensity or BathResponse")


def q2_mean(env, particle: ParticleParams, T: float, include_pole: Optional[bool] = None) -> float:
    """``<q^2>`` of the reduced equilibrium state."""
    _check_T(T)
    resp = _as_response(env, particle)
    c = _occupation_factor(particle, T)
    hb, m = particle.hbar, particle.m

    def f(nu2):
        return hb / (2.0 * m * math.sqrt(nu2)) * c(nu2)

    return weighted_integral(f, resp, particle, include_pole).value


def p2_mean(env, particle: ParticleParams, T: float, include_pole: Optional[bool] = None) -> float:
    """``<p^2>`` of the reduced equilibrium state."""
    _check_T(T)
    resp = _as_response(env, particle)
    c = _occupation_factor(particle, T)
    hb, m = particle.hbar, particle.m

    def f(nu2):
        return m * hb * math.sqrt(nu2) / 2.0 * c(nu2)

    return weighted_integral(f, resp, particle, include_pole).value


def _uncertainty_ratio(q2, p2, particle, slack):
    if not (q2 > 0 and p2 > 0):
        raise DomainError("moments must be positive")
    r = 4.0 * q2 * p2 / particle.hbar**2
    if r < 1.0 - slack:
        raise UncertaintyViolation(f"<q^2><p^2> = {r / 4:.12g} hbar^2 is below hbar^2/4")
    return r


def effective_temperature(q2: float, p2: float, particle: ParticleParams,
                          slack: float = UNCERTAINTY_SLACK) -> float:
    """Temperature of the free oscillator with the same purity.

    ``kT = (hbar Omega / 2) / artanh(hbar / (2 sqrt(q2 p2)))``; zero for a
    pure state (within ``slack``).
    """
    r = _uncertainty_ratio(q2, p2, particle, slack)
    if r <= 1.0:
        return 0.0
    rm1 = 4.0 * q2 * p2 / particle.hbar**2 - 1.0
    sr = math.sqrt(r)
    # artanh(1/sqrt(r)) = log1p(2 (sqrt(r)+1) / (r-1)) / 2, stable near r=1
    at = 0.5 * math.log1p(2.0 * (sr + 1.0) / rm1)
    return particle.hbar * particle.Omega / (2.0 * at) / particle.kB


def effective_mass(q2: float, p2: float, particle: ParticleParams) -> float:
    """``sqrt(p2 / (Omega^2 q2))``."""
    if not (q2 > 0 and p2 > 0):
        raise DomainError("moments must be positive")
    return math.sqrt(p2 / (particle.Omega**2 * q2))


def entropy_of(T_eff: float, particle: ParticleParams) -> float:
    """Von Neumann entropy (units of kB) of an oscillator at ``T_eff``."""
    if T_eff < 0 or math.isnan(T_eff):
        raise DomainError("effective temperature must be >= 0")
    if T_eff == 0:
        return 0.0
    x = particle.hbar * particle.Omega / (particle.kB * T_eff)
    if x > 700:
        return 0.0
    return x / math.expm1(x) - math.log(-math.expm1(-x))


@dataclass(frozen=True)
class GaussianDensityMatrix:
    """``sigma(q, q') = norm * exp(-a_minus (q-q')^2 - a_plus (q+q')^2)``."""

    a_minus: float
    a_plus: float
    norm: float
    hbar: float = 1.0

    def __call__(self, q, qp):
        q = np.asarray(q, dtype=float)
        qp = np.asarray(qp, dtype=float)
        return self.norm * np.exp(-self.a_minus * (q - qp) ** 2 - self.a_plus * (q + qp) ** 2)

    def moments(self) -> tuple[float, float]:
        """``(<q^2>, <p^2>)`` recovered from the kernel."""
        return 1.0 / (8.0 * self.a_plus), 2.0 * self.hbar**2 * self.a_minus

    def purity(self) -> float:
        """``Tr sigma^2``."""
        return math.sqrt(self.a_plus / self.a_minus)


def density_matrix(q2: float, p2: float, particle: ParticleParams,
                   slack: float = UNCERTAINTY_SLACK) -> GaussianDensityMatrix:
    """Position-space kernel of the Gaussian state with the given moments."""
    _uncertainty_ratio(q2, p2, particle, slack)
    hb = particle.hbar
    a_minus = p2 / (2.0 * hb**2)
    a_plus = 1.0 / (8.0 * q2)
    return GaussianDensityMatrix(a_minus, max(a_plus, 0.0), 1.0 / math.sqrt(2.0 * math.pi * q2), hb)


@dataclass(frozen=True)
class EquilibriumState:
    T: float
    q2: float
    p2: float
    T_eff: float
    m_eff: float
    entropy: float

    def density_matrix(self, particle: ParticleParams) -> GaussianDensityMatrix:
        return density_matrix(self.q2, self.p2, particle)


def equilibrium_state(env, particle: ParticleParams, T: float,
                      include_pole: Optional[bool] = None) -> EquilibriumState:
    """Moments and derived parameters of the reduced state at temperature ``T``."""
    resp = _as_response(env, particle)
    q2 = q2_mean(resp, particle, T, include_pole)
    p2 = p2_mean(resp, particle, T, include_pole)
    T_eff = effective_temperature(q2, p2, particle)
    return EquilibriumState(T=T, q2=q2, p2=p2, T_eff=T_eff,
                            m_eff=effective_mass(q2, p2, particle),
                            entropy=entropy_of(T_eff, particle))
