"""The ten acceptance criteria, each with its tolerance and runtime limit.

Every test prints one ``criterion N: PASS|FAIL`` line straight to the
terminal, whatever the capture mode.
"""
import math
import time

import numpy as np
import pytest

from qbath.equilibrium import (density_matrix, effective_mass, effective_temperature, equilibrium_state, p2_mean,
                               q2_mean, weighted_integral)
from qbath.finite_bath import build_matrix, decompose, discretize, exact_moments
from qbath.interferometer import (Junction, chi, coherence_length, fringe_pattern, sampled_contrast,
                                  scattering_solve, uniform_phase_grid)
from qbath.spectral import OhmicSharp, ParticleParams, bath_response

P = ParticleParams()


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, elapsed, limit=None):
        timing = f"{elapsed:.2f}s" + (f" (limit {limit:g}s)" if limit else "")
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}  [{timing}]")
    return emit


def fock_purity(x):
    n = int(max(400, 80 / x))
    p = -math.expm1(-x) * np.exp(-np.arange(n) * x)
    return float(np.sum(p * p))


def test_criterion_01_decoupled_limit(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260101)
    env = OhmicSharp(0.0, 100.0)
    worst = 0.0
    for T in rng.uniform(0.01, 20.0, 20):
        q2, p2 = q2_mean(env, P, T), p2_mean(env, P, T)
        exact = 0.5 / math.tanh(1 / (2 * T))
        worst = max(worst, abs(q2 / exact - 1), abs(effective_temperature(q2, p2, P) / T - 1),
                    abs(effective_mass(q2, p2, P) - 1))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and elapsed < 1.0
    report(1, ok, f"max rel err {worst:.2e} (< 1e-9)", elapsed, 1)
    assert worst < 1e-9
    assert elapsed < 1.0


def test_criterion_02_oracle_equivalence(report):
    t0 = time.perf_counter()
    Ns = (500, 1000, 2000, 4000)
    worst, monotone = 0.0, True
    for eta in (0.1, 0.5, 1.0):
        env = OhmicSharp(eta, 100.0)
        modes = {N: decompose(build_matrix(discretize(env, P, N))) for N in Ns}
        for T in (0.0, 1.0):
            ref = (q2_mean(env, P, T), p2_mean(env, P, T))
            devs = np.array([[abs(a / b - 1) for a, b in zip(exact_moments(modes[N], P, T), ref)] for N in Ns])
            worst = max(worst, devs[-1].max())
            monotone &= bool(np.all(np.diff(devs, axis=0) < 0))
    elapsed = time.perf_counter() - t0
    ok = worst < 0.01 and monotone and elapsed < 60
    report(2, ok, f"max dev at N=4000 {worst:.2e} (< 1e-2), monotone={monotone}", elapsed, 60)
    assert worst < 0.01
    assert monotone
    assert elapsed < 60


def test_criterion_03_effective_temperature_asymptote(report):
    t0 = time.perf_counter()
    eta, wc = 0.05, 1e4
    g = eta * math.log(wc)
    s = equilibrium_state(OhmicSharp(eta, wc), P, 0.0)
    formula = 1.0 / math.log(2 * math.pi / g)
    rel = s.T_eff / formula - 1
    elapsed = time.perf_counter() - t0
    report(3, abs(rel) < 0.10 and elapsed < 10, f"kT_eff={s.T_eff:.6f} vs {formula:.6f} ({rel:+.1%}, limit 10%)",
           elapsed, 10)
    assert abs(rel) < 0.10
    assert elapsed < 10


def test_criterion_04_effective_mass_asymptote(report):
    t0 = time.perf_counter()
    eta, wc = 0.05, 1e4
    g = eta * math.log(wc)
    s = equilibrium_state(OhmicSharp(eta, wc), P, 0.0)
    formula = 1 + g / math.pi
    rel = s.m_eff / formula - 1
    elapsed = time.perf_counter() - t0
    report(4, abs(rel) < 0.10 and elapsed < 10, f"m_eff={s.m_eff:.6f} vs {formula:.6f} ({rel:+.1%}, limit 10%)",
           elapsed, 10)
    assert abs(rel) < 0.10
    assert elapsed < 10


def test_criterion_05_coherence_length_asymptote(report):
    t0 = time.perf_counter()
    g, wc = 0.02, 1e4
    s = equilibrium_state(OhmicSharp(g, wc), P, 0.0)
    xi2 = coherence_length(s.T_eff, s.m_eff, P) ** 2
    formula = 1 / g * math.pi / (4 * math.log(wc))
    rel = xi2 / formula - 1
    elapsed = time.perf_counter() - t0
    report(5, abs(rel) < 0.15 and elapsed < 10, f"xi^2={xi2:.4f} vs {formula:.4f} ({rel:+.1%}, limit 15%)",
           elapsed, 10)
    assert abs(rel) < 0.15
    assert elapsed < 10


GRID = np.linspace(0.0, 5.0, 40)
_states = {}


def grid_states():
    if not _states:
        for eta in (0.1, 0.5, 1.0):
            env = OhmicSharp(eta, 100.0)
            _states[eta] = [equilibrium_state(env, P, float(T)) for T in GRID]
    return _states


def test_criterion_06_figure_shapes(report):
    t0 = time.perf_counter()
    failures = []
    for eta, states in grid_states().items():
        Te = np.array([s.T_eff for s in states])
        S = np.array([s.entropy for s in states])
        xi = np.array([coherence_length(s.T_eff, s.m_eff, P) for s in states])
        if not (Te[0] > 0 and np.all(np.diff(Te) >= 0)):
            failures.append(f"T_eff eta={eta}")
        if not (S[0] > 0 and np.all(np.diff(S) >= 0)):
            failures.append(f"S eta={eta}")
        if not (math.isfinite(xi[0]) and np.all(np.diff(xi) <= 0)):
            failures.append(f"xi eta={eta}")
        hot = equilibrium_state(OhmicSharp(eta, 100.0), P, 100.0)
        if not abs(hot.T_eff / 100.0 - 1) < 0.05:
            failures.append(f"high-T eta={eta}: {hot.T_eff / 100 - 1:+.3f}")
    elapsed = time.perf_counter() - t0
    report(6, not failures and elapsed < 120, "all shapes hold" if not failures else "; ".join(failures),
           elapsed, 120)
    assert not failures
    assert elapsed < 120


def test_criterion_07_uncertainty_and_purity(report):
    t0 = time.perf_counter()
    min_product, worst = math.inf, 0.0
    for states in grid_states().values():
        for s in states:
            min_product = min(min_product, s.q2 * s.p2)
            x = 1.0 / s.T_eff
            worst = max(worst, abs(density_matrix(s.q2, s.p2, P).purity() - fock_purity(x)))
    elapsed = time.perf_counter() - t0
    ok = min_product >= 0.25 and worst < 1e-10
    report(7, ok, f"min q2*p2={min_product:.6f} (>= 0.25), purity err {worst:.1e} (< 1e-10)", elapsed)
    assert min_product >= 0.25
    assert worst < 1e-10


def test_criterion_08_contrast_identity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(10):
        x, xi, q2 = rng.uniform(0.05, 3.0), rng.uniform(0.3, 5.0), rng.uniform(0.2, 3.0)
        p2 = (q2 / xi**2 + 1) / (4 * q2)
        pat = fringe_pattern(density_matrix(q2, p2, P), x, 0.6 - 0.3j, uniform_phase_grid(1024))
        worst = max(worst, abs(sampled_contrast(pat) - math.exp(-x * x / (2 * xi * xi))))
    elapsed = time.perf_counter() - t0
    report(8, worst < 1e-10, f"max |C_sampled - exp(-x^2/2xi^2)| = {worst:.1e} (< 1e-10)", elapsed)
    assert worst < 1e-10


def test_criterion_09_scattering_limits(report):
    t0 = time.perf_counter()
    trivial = scattering_solve(Junction(x=1.0, alpha=0.0, epsilon=0.5, k=3.0, n_incident=1))
    expected = np.zeros(trivial.t.size)
    expected[1] = 1
    trivial_ok = trivial.s1 == 0 and trivial.s2 == 0 and np.array_equal(trivial.t, expected)

    k = math.sqrt(2 * 1e4 * 0.5)
    high = scattering_solve(Junction(x=1.0, alpha=1.0, epsilon=0.5, k=k, n_incident=0))
    ratio_err = abs(abs(high.s1 / high.s2) / abs(chi(0, 1.0, P) / chi(0, -1.0, P)) - 1)

    cont = 0.0
    for kw in (dict(x=1.0, alpha=0.0, epsilon=0.5, k=3.0, n_incident=1),
               dict(x=1.0, alpha=1.0, epsilon=0.5, k=k, n_incident=0),
               dict(x=0.5, alpha=1.0, epsilon=0.5, k=3.0),
               dict(x=1.2, alpha=-2.0, epsilon=0.3, k=1.7, n_incident=1),
               dict(x=0.6, alpha=2.0, epsilon=0.3, k=1.0, n_incident=1, contact="point", n_channels=30)):
        j = Junction(**kw)
        sol = scattering_solve(j)
        d = np.zeros(sol.t.size)
        d[j.n_incident] = 1
        cont = max(cont, float(np.max(np.abs(sol.t - d - sol.r))))
    elapsed = time.perf_counter() - t0
    ok = trivial_ok and ratio_err < 5e-3 and cont <= 1e-12
    report(9, ok, f"trivial={trivial_ok}, |s1/s2| err {ratio_err:.1e} (< 5e-3), continuity {cont:.1e} (<= 1e-12)",
           elapsed)
    assert trivial_ok
    assert ratio_err < 5e-3
    assert cont <= 1e-12


def test_criterion_10_sum_rules(report):
    t0 = time.perf_counter()
    err0 = err2 = 0.0
    for eta in (0.1, 0.5, 1.0):
        for wc in (10.0, 100.0):
            r = bath_response(OhmicSharp(eta, wc), P)
            one = weighted_integral(lambda z: 1.0, r, P, include_pole=True).value
            two = weighted_integral(lambda z: z, r, P, include_pole=True).value
            err0 = max(err0, abs(one - 1))
            err2 = max(err2, abs(two / (1 + 2 * eta * wc / math.pi) - 1))
    elapsed = time.perf_counter() - t0
    ok = err0 < 1e-6 and err2 < 1e-4
    report(10, ok, f"|M0-1|={err0:.1e} (< 1e-6), M2 rel err {err2:.1e} (< 1e-4)", elapsed)
    assert err0 < 1e-6
    assert err2 < 1e-4
