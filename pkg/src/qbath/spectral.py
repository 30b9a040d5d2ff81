"""Bath spectral densities and the response functions they induce.

An environment is described by its mass distribution ``mu(omega)``: the
mass of bath oscillators per unit frequency.  From it follow

* ``Gamma(u) = pi u**2 mu(u) / (2 m)`` (damping, units 1/time), and
* ``Delta(u) = PV int_0^inf (omega**2 u**2 / m) mu(omega) / (u**2 - omega**2) d omega``
  (frequency-squared shift),

which together form the Lorentzian weight of the particle over the
eigenmodes of the total system.  Where ``Gamma`` vanishes the reduced
resolvent may have an isolated real pole (a bound, undamped mode); see
:func:`find_real_poles`.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DomainError, InconsistencyError


@dataclass(frozen=True)
class ParticleParams:
    """Mass, frequency and the two constants of the particle."""

    m: float = 1.0
    Omega: float = 1.0
    hbar: float = 1.0
    kB: float = 1.0

    def __post_init__(self):
        for name in ("m", "Omega", "hbar", "kB"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")

    @property
    def length(self) -> float:
        """Oscillator length sqrt(hbar / (m Omega))."""
        return math.sqrt(self.hbar / (self.m * self.Omega))


class SpectralDensity:
    """Common interface of the environment variants."""

    #: ``mu ~ 1/omega**2`` at small omega: total mass diverges at 0.
    infrared_singular = False

    def mu(self, omega):
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        """Smallest interval outside of which ``mu`` vanishes."""
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        """Frequencies where ``mu`` is not smooth."""
        return ()

    @property
    def decoupled(self) -> bool:
        return False

    def mass_between(self, a, b):
        """``int_a^b mu(omega) d omega`` (vectorised over bin edges)."""
        raise NotImplementedError

    def coupling_below(self, a: float) -> float:
        """``int_0^a omega**2 mu(omega) d omega``."""
        raise NotImplementedError


@dataclass(frozen=True)
class OhmicSharp(SpectralDensity):
    """``mu = 2 eta / (pi omega**2)`` below ``omega_c``, zero above."""

    eta: float
    omega_c: float
    infrared_singular = True

    def __post_init__(self):
        if self.eta < 0 or not self.omega_c > 0:
            raise DomainError("OhmicSharp needs eta >= 0 and omega_c > 0")

    def mu(self, omega):
        omega = np.asarray(omega, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(omega < self.omega_c, 2.0 * self.eta / (np.pi * omega**2), 0.0)
        return out[()] if out.ndim == 0 else out

    def support(self):
        return (0.0, self.omega_c)

    def breakpoints(self):
        return (self.omega_c,)

    @property
    def decoupled(self):
        return self.eta == 0

    def mass_between(self, a, b):
        a = np.minimum(np.asarray(a, dtype=float), self.omega_c)
        b = np.minimum(np.asarray(b, dtype=float), self.omega_c)
        return 2.0 * self.eta / np.pi * (1.0 / a - 1.0 / b)

    def coupling_below(self, a):
        return 2.0 * self.eta / np.pi * min(a, self.omega_c)


@dataclass(frozen=True)
class Drude(SpectralDensity):
    """Ohmic density with a Lorentzian (Drude) cutoff."""

    eta: float
    omega_c: float
    infrared_singular = True

    def __post_init__(self):
        if self.eta < 0 or not self.omega_c > 0:
            raise DomainError("Drude needs eta >= 0 and omega_c > 0")

    def mu(self, omega):
        omega = np.asarray(omega, dtype=float)
        wc2 = self.omega_c**2
        with np.errstate(divide="ignore"):
            out = 2.0 * self.eta / (np.pi * omega**2) * wc2 / (omega**2 + wc2)
        return out[()] if out.ndim == 0 else out

    def support(self):
        return (0.0, math.inf)

    @property
    def decoupled(self):
        return self.eta == 0

    def _antiderivative(self, w):
        w = np.asarray(w, dtype=float)
        return 2.0 * self.eta / np.pi * (-1.0 / w - np.arctan(w / self.omega_c) / self.omega_c)

    def mass_between(self, a, b):
        return self._antiderivative(b) - self._antiderivative(a)

    def coupling_below(self, a):
        return 2.0 * self.eta / np.pi * self.omega_c * math.atan(a / self.omega_c)


@dataclass(frozen=True)
class RCCircuit(SpectralDensity):
    """Particle capacitively coupled to a resistor-capacitor circuit.

    ``e`` is the particle charge, ``l`` the plate distance, ``C`` the
    capacitance and ``R`` the resistance.  Equivalent to a :class:`Drude`
    bath with ``eta = R e**2 / l**2`` and ``omega_c = 1 / (R C)``.
    """

    e: float
    l: float
    C: float
    R: float
    infrared_singular = True

    def __post_init__(self):
        if not (self.l > 0 and self.C > 0 and self.R > 0):
            raise DomainError("RCCircuit needs l, C, R > 0")

    @property
    def eta(self) -> float:
        return self.R * self.e**2 / self.l**2

    @property
    def omega_c(self) -> float:
        return 1.0 / (self.R * self.C)

    def as_drude(self) -> Drude:
        return Drude(self.eta, self.omega_c)

    def mu(self, omega):
        omega = np.asarray(omega, dtype=float)
        rc = 1.0 / (self.R * self.C)
        with np.errstate(divide="ignore"):
            out = (2.0 * self.e**2 / (np.pi * omega**2 * self.l**2 * self.C)
                   * rc / (omega**2 + rc**2))
        return out[()] if out.ndim == 0 else out

    def support(self):
        return (0.0, math.inf)

    @property
    def decoupled(self):
        return self.e == 0

    def mass_between(self, a, b):
        return self.as_drude().mass_between(a, b)

    def coupling_below(self, a):
        return self.as_drude().coupling_below(a)

    def renormalized_frequency(self, omega_guide: float, m: float) -> float:
        """Transverse frequency once the capacitive shift is subtracted."""
        w2 = omega_guide**2 - self.e**2 / (self.l**2 * self.C * m)
        if w2 <= 0:
            raise DomainError("capacitive coupling destabilises the guide (Omega**2 <= 0)")
        return math.sqrt(w2)


@dataclass(frozen=True, eq=False)
class Tabulated(SpectralDensity):
    """Piecewise-linear ``mu`` through the given nodes, zero outside them."""

    omega: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if w.ndim != 1 or w.shape != v.shape or w.size < 2:
            raise DomainError("Tabulated needs two equal-length 1-d arrays with >= 2 nodes")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            raise DomainError("Tabulated nodes must be finite")
        if np.any(np.diff(w) <= 0):
            raise DomainError("Tabulated frequencies must be strictly increasing")
        if w[0] < 0 or np.any(v < 0):
            raise DomainError("Tabulated frequencies and values must be nonnegative")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        """Load a two-column ``omega,mu`` CSV file."""
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["omega", "mu"]:
            raise DomainError(f"{path}: expected header 'omega,mu'")
        try:
            data = np.array([[float(a), float(b)] for a, b in rows[1:] if (a, b)], dtype=float)
        except ValueError as exc:
            raise DomainError(f"{path}: {exc}") from None
        if data.ndim != 2 or data.shape[0] < 2:
            raise DomainError(f"{path}: need at least two data rows")
        return cls(data[:, 0], data[:, 1])

    def mu(self, omega):
        out = np.interp(omega, self.omega, self.values, left=0.0, right=0.0)
        return out[()] if np.ndim(out) == 0 else out

    def support(self):
        return (float(self.omega[0]), float(self.omega[-1]))

    def breakpoints(self):
        return tuple(self.omega)

    @property
    def decoupled(self):
        return not np.any(self.values > 0)

    def _cumulative(self, w):
        w = np.clip(np.asarray(w, dtype=float), self.omega[0], self.omega[-1])
        seg = np.concatenate(([0.0], np.cumsum(np.diff(self.omega) * (self.values[1:] + self.values[:-1]) / 2)))
        j = np.clip(np.searchsorted(self.omega, w, side="right") - 1, 0, self.omega.size - 2)
        w0 = self.omega[j]
        v0 = self.values[j]
        v_at = np.interp(w, self.omega, self.values)
        return seg[j] + (w - w0) * (v0 + v_at) / 2

    def mass_between(self, a, b):
        return self._cumulative(b) - self._cumulative(a)

    def coupling_below(self, a):
        w = np.linspace(0.0, a, 4097)
        return float(integrate.simpson(w**2 * self.mu(w), x=w))


def evaluate_mu(env: SpectralDensity, omega):
    """Mass density of ``env`` at positive ``omega``."""
    if np.any(np.asarray(omega) <= 0):
        raise DomainError("mu is evaluated at omega > 0 only")
    return env.mu(omega)


def gamma(env: SpectralDensity, particle: ParticleParams, u):
    """Damping rate ``pi u**2 mu(u) / (2 m)``."""
    u = np.asarray(u, dtype=float)
    return np.pi * u**2 * evaluate_mu(env, u) / (2.0 * particle.m)


def _pv_kernel(u: float, a: float, b: float) -> float:
    """``PV int_a^b d omega / (u**2 - omega**2)``."""

    def antideriv(w):
        if math.isinf(w):
            return 0.0
        return math.log((u + w) / abs(u - w)) / (2.0 * u)

    return antideriv(b) - antideriv(a)


def delta(env: SpectralDensity, particle: ParticleParams, u, *, rtol: float = 1e-9,
          max_evals: int = 1_000_000):
    """Frequency shift ``Delta(u)`` by principal-value quadrature.

    The pole at ``omega = u`` is removed by subtracting
    ``F(u) / (u**2 - omega**2)`` with ``F(omega) = omega**2 u**2 mu(omega) / m``;
    the subtracted term is integrated in closed form and the smooth remainder
    adaptively, with the domain split at ``u`` and at every breakpoint of
    ``mu``.
    """
    if np.ndim(u):
        return np.array([delta(env, particle, float(x), rtol=rtol, max_evals=max_evals)
                         for x in np.ravel(u)]).reshape(np.shape(u))
    u = float(u)
    if not u > 0:
        raise DomainError("Delta(u) needs u > 0")
    if env.decoupled:
        return 0.0
    m = particle.m
    lo, hi = env.support()
    u2 = u * u

    def F(w):
        return w * w * u2 * float(env.mu(w)) / m

    Fu = F(u) if lo <= u <= hi else 0.0

    def remainder(w):
        d = u2 - w * w
        if d == 0.0:
            return 0.0
        return (F(w) - Fu) / d

    edges = sorted({lo, hi, u, *env.breakpoints()})
    edges = [e for e in edges if lo <= e <= hi]
    total = Fu * _pv_kernel(u, lo, hi) if Fu else 0.0
    scale = abs(Fu) / u if Fu else u * env.coupling_below(min(hi, 2 * u)) / m / max(u, 1.0)
    epsabs = rtol * max(scale, 1e-300) * 1e-3
    evals = 0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        val, e, info, *msg = integrate.quad(remainder, a, b, epsabs=epsabs, epsrel=rtol,
                                            limit=500, full_output=1)
        evals += info["neval"]
        err += e
        total += val
        if evals > max_evals:
            raise ConvergenceError(f"Delta({u}) exceeded {max_evals} evaluations", err)
        if msg and e > max(rtol * abs(val), epsabs) * 10:
            raise ConvergenceError(f"Delta({u}) did not converge on [{a}, {b}]: {msg[0]}", e)
    return total


def _ohmic_delta(env: OhmicSharp, m: float, u):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        out = env.eta * u / (np.pi * m) * np.log((env.omega_c + u) / np.abs(env.omega_c - u))
    return out[()] if out.ndim == 0 else out


def _drude_delta(eta: float, omega_c: float, m: float, u):
    u = np.asarray(u, dtype=float)
    out = eta / m * u**2 * omega_c / (u**2 + omega_c**2)
    return out[()] if out.ndim == 0 else out


def _tabulated_delta(env: Tabulated, m: float, u):
    # Exact PV integral of a piecewise-linear mu, segment by segment.
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))[:, None]
    w0, w1 = env.omega[:-1], env.omega[1:]
    v0, v1 = env.values[:-1], env.values[1:]
    slope = (v1 - v0) / (w1 - w0)
    icpt = v0 - slope * w0
    u2 = u * u

    def regular(w):
        return (-(u2 / m) * (icpt * w + slope * w * w / 2)
                + (u2 * u2 / m) * (icpt / (2 * u) - slope / 2) * np.log(u + w))

    total = np.sum(regular(w1) - regular(w0), axis=1)
    # coefficient of log|u - omega_j| collected per node
    L = -(u2 * u / (2 * m)) * (icpt + slope * u)
    zero = np.zeros((u.shape[0], 1))
    coeff = np.concatenate([zero, L], axis=1) - np.concatenate([L, zero], axis=1)
    dist = np.abs(u - env.omega[None, :])
    on_node = dist == 0
    if np.any(on_node[:, [0, -1]] & (env.values[[0, -1]] > 0)):
        raise DomainError("Delta diverges at a tabulated edge where mu jumps")
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(on_node, 0.0, coeff * np.log(np.where(on_node, 1.0, dist)))
    total = total + np.sum(logs, axis=1)
    return float(total[0]) if scalar else total


def delta_exact(env: SpectralDensity, particle: ParticleParams, u):
    """Closed-form ``Delta(u)`` for every built-in variant (vectorised)."""
    m = particle.m
    if env.decoupled:
        return np.zeros_like(np.asarray(u, dtype=float))[()]
    if isinstance(env, OhmicSharp):
        return _ohmic_delta(env, m, u)
    if isinstance(env, Drude):
        return _drude_delta(env.eta, env.omega_c, m, u)
    if isinstance(env, RCCircuit):
        return _drude_delta(env.eta, env.omega_c, m, u)
    if isinstance(env, Tabulated):
        return _tabulated_delta(env, m, u)
    raise TypeError(f"no closed form for {type(env).__name__}")


@dataclass(frozen=True)
class PoleRecord:
    """Real pole of the reduced resolvent at ``z = nu_star_sq``.

    ``kind`` is ``"decoupled"`` (no bath at all), ``"gap"`` (inside a gap of
    ``mu``) or ``"above_cutoff"`` (the bound mode of a sharp cutoff).  The
    weight may underflow to 0.0; ``log_weight`` keeps it.
    ``log_offset`` is ``log(u*/omega_c - 1)`` for above-cutoff modes.
    """

    nu_star_sq: float
    weight: float
    log_weight: float
    kind: str
    log_offset: Optional[float] = None


@dataclass(frozen=True)
class BathResponse:
    """``Gamma`` and ``Delta`` as callables plus the real poles, if any."""

    gamma_fn: Callable
    delta_fn: Callable
    poles: tuple = ()
    breakpoints: tuple = ()
    support: tuple = (0.0, math.inf)
    decoupled: bool = False

    @property
    def pole(self) -> Optional[PoleRecord]:
        return self.poles[0] if self.poles else None


def bath_response(env: SpectralDensity, particle: ParticleParams, method: str = "exact",
                  poles: bool = True) -> BathResponse:
    """Bundle ``Gamma``/``Delta`` of ``env``.

    ``method="exact"`` uses the closed-form shift, ``"quadrature"`` the
    principal-value integral of :func:`delta`.
    """
    if method == "exact":
        def dfn(u):
            return delta_exact(env, particle, u)
    elif method == "quadrature":
        def dfn(u):
            return delta(env, particle, u)
    else:
        raise ValueError(f"unknown method {method!r}")

    def gfn(u):
        return np.pi * np.asarray(u) ** 2 * env.mu(u) / (2.0 * particle.m)

    found = tuple(find_real_poles(env, particle)) if poles else ()
    return BathResponse(gamma_fn=gfn, delta_fn=dfn, poles=found,
                        breakpoints=tuple(env.breakpoints()), support=env.support(),
                        decoupled=env.decoupled)


def _gaps(env: SpectralDensity) -> list[tuple[float, float]]:
    if isinstance(env, OhmicSharp):
        return [(env.omega_c, math.inf)]
    if isinstance(env, Tabulated):
        w, v = env.omega, env.values
        gaps = []
        if w[0] > 0:
            gaps.append((0.0, float(w[0])))
        j = 0
        while j < w.size - 1:
            if v[j] == 0 and v[j + 1] == 0:
                k = j + 1
                while k < w.size - 1 and v[k + 1] == 0:
                    k += 1
                gaps.append((float(w[j]), float(w[k])))
                j = k
            else:
                j += 1
        gaps.append((float(w[-1]), math.inf))
        return gaps
    return []


def _ohmic_bound_mode(env: OhmicSharp, particle: ParticleParams) -> PoleRecord:
    # u = wc (1 + e^t); solving in t resolves offsets far below float spacing.
    m, W2, wc, eta = particle.m, particle.Omega**2, env.omega_c, env.eta

    def parts(t):
        u = wc * (1.0 + math.exp(t))
        log_ratio = math.log(2.0 + math.exp(t)) - t
        return u, log_ratio

    def g(t):
        u, lr = parts(t)
        return u * u - W2 - eta * u / (math.pi * m) * lr

    t_lo = math.log(2.0) - abs(wc * wc - W2) * math.pi * m / (eta * wc) - 10.0
    while g(t_lo) >= 0:
        t_lo = 2 * t_lo - 10.0
    t_hi = 1.0
    while g(t_hi) <= 0:
        t_hi = 2 * t_hi + 1.0
    t_star = optimize.brentq(g, t_lo, t_hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    u, lr = parts(t_star)
    # 1 - dDelta/dz = A + exp(B)
    A = 1.0 - eta * lr / (2.0 * math.pi * m * u)
    B = math.log(eta / (math.pi * m * (u + wc))) - t_star
    if B > 30:
        log_denom = B + math.log1p(A * math.exp(-B))
    else:
        log_denom = math.log(A + math.exp(B))
    log_w = -log_denom
    return PoleRecord(nu_star_sq=u * u, weight=math.exp(log_w), log_weight=log_w,
                      kind="above_cutoff", log_offset=t_star)


def _gap_roots(env, particle, lo, hi, n_samples=400):
    W2 = particle.Omega**2

    def g(u):
        return u * u - W2 - float(delta_exact(env, particle, u))

    if math.isinf(hi):
        hi_eff = max(2.0 * lo, 4.0 * particle.Omega, 1.0)
        while g(hi_eff) <= 0:
            hi_eff *= 2.0
        hi = hi_eff
    s = 0.5 * (1.0 - np.cos(np.pi * np.linspace(0.0, 1.0, n_samples)))
    s = np.concatenate(([1e-12, 1e-9, 1e-6], s[1:-1], [1 - 1e-6, 1 - 1e-9, 1 - 1e-12]))
    us = np.unique(lo + (hi - lo) * s)
    us = us[(us > lo) & (us < hi) & (us > 0)]
    gs = np.array([g(x) for x in us])
    roots = []
    for a, b, ga, gb in zip(us[:-1], us[1:], gs[:-1], gs[1:]):
        if ga == 0:
            roots.append(a)
        elif ga * gb < 0 and np.isfinite(ga) and np.isfinite(gb):
            roots.append(optimize.brentq(g, a, b, xtol=1e-15, rtol=1e-15, maxiter=500))
    return roots


def _gap_weight(env, particle, u, band, rel_step=1e-6):
    # central difference in z; the step stays well inside the gap because the
    # shift is log-singular at edges where mu jumps
    z = u * u
    lo, hi = band
    dist = min(z - lo * lo, hi * hi - z if math.isfinite(hi) else math.inf)

    def tilde(zz):
        return float(delta_exact(env, particle, math.sqrt(zz)))

    dz = min(rel_step * z, 1e-3 * dist)
    d1 = (tilde(z + dz) - tilde(z - dz)) / (2 * dz)
    d2 = (tilde(z + dz / 2) - tilde(z - dz / 2)) / dz
    deriv = (4 * d2 - d1) / 3
    return 1.0 / (1.0 - deriv)


def find_real_poles(env: SpectralDensity, particle: ParticleParams,
                    search_band: Optional[Sequence[float]] = None) -> list[PoleRecord]:
    """Real poles ``nu*^2`` of the reduced resolvent and their residues.

    Roots of ``g(u) = u**2 - Omega**2 - Delta(u)`` are bracketed and bisected
    inside bands where ``Gamma`` vanishes; by default every gap of ``mu``
    is searched.  The residue is ``1 / (1 - dDelta/dz)`` at ``z = nu*^2``.
    Returns an empty list when there is no pole.
    """
    W2 = particle.Omega**2
    if env.decoupled:
        return [PoleRecord(W2, 1.0, 0.0, "decoupled")]
    if search_band is None:
        bands = _gaps(env)
    else:
        lo, hi = float(search_band[0]), float(search_band[1])
        if not (0 <= lo < hi):
            raise DomainError("search_band must satisfy 0 <= lo < hi")
        bands = [(lo, hi)]
    poles = []
    for lo, hi in bands:
        if isinstance(env, OhmicSharp) and lo >= env.omega_c and math.isinf(hi) and search_band is None:
            if env.eta > 0:
                poles.append(_ohmic_bound_mode(env, particle))
            continue
        for u in _gap_roots(env, particle, lo, hi):
            if float(env.mu(u)) > 0:
                raise InconsistencyError(f"root u={u} lies where Gamma > 0")
            w = _gap_weight(env, particle, u, (lo, hi))
            poles.append(PoleRecord(u * u, w, math.log(w), "gap"))
    return poles
