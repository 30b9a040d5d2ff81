import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate

from qbath.equilibrium import (GaussianDensityMatrix, density_matrix, effective_mass, effective_temperature,
                               entropy_of, equilibrium_state, p2_mean, q2_mean, weighted_integral)
from qbath.errors import DomainError, UncertaintyViolation
from qbath.spectral import Drude, OhmicSharp, ParticleParams, Tabulated, bath_response

P = ParticleParams()


def fock_probs(x, n=200):
    k = np.arange(n)
    return -math.expm1(-x) * np.exp(-k * x)


def fock_entropy(x, n=200):
    p = fock_probs(x, n)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def decoupled_q2(particle, T):
    hb, m, W = particle.hbar, particle.m, particle.Omega
    c = 1.0 if T == 0 else 1 / math.tanh(hb * W / (2 * particle.kB * T))
    return hb / (2 * m * W) * c


@pytest.mark.parametrize("eta", [0.1, 1.0])
def test_sum_rules_ohmic(eta):
    env = OhmicSharp(eta, 100.0)
    r = bath_response(env, P)
    one = weighted_integral(lambda z: 1.0, r, P, include_pole=True)
    assert one.value == pytest.approx(1.0, abs=1e-6)
    assert not one.fallback
    second = weighted_integral(lambda z: z, r, P, include_pole=True).value
    assert second == pytest.approx(1 + 2 * eta * 100 / math.pi, rel=1e-4)


def test_sum_rules_include_bound_mode():
    # a visible bound mode: the sum rules only close when it is counted
    env = OhmicSharp(0.5, 2.0)
    r = bath_response(env, P)
    w = r.pole.weight
    assert 1e-3 < w < 1e-2
    with_pole = weighted_integral(lambda z: 1.0, r, P, include_pole=True).value
    without = weighted_integral(lambda z: 1.0, r, P).value
    assert with_pole == pytest.approx(1.0, abs=1e-8)
    assert without == pytest.approx(1.0 - w, abs=1e-8)
    z2 = weighted_integral(lambda z: z, r, P, include_pole=True).value
    assert z2 == pytest.approx(1 + 2 * 0.5 * 2.0 / math.pi, rel=1e-8)


def test_strong_coupling_falls_back_without_resonance():
    env = OhmicSharp(50.0, 2.0)
    res = weighted_integral(lambda z: 1.0, bath_response(env, P), P, include_pole=True)
    assert res.fallback and res.resonance is None
    assert res.value == pytest.approx(1.0, abs=1e-8)


def test_sum_rule_gapped_table():
    w = np.array([0.1, 0.45, 0.5, 1.5, 1.55, 3.0])
    env = Tabulated(w, 0.05 * np.array([1, 1, 0, 0, 1, 1.0]))
    r = bath_response(env, P)
    assert len(r.poles) == 2
    assert weighted_integral(lambda z: 1.0, r, P).value == pytest.approx(1.0, abs=1e-6)


def test_sum_rule_drude():
    r = bath_response(Drude(0.7, 10.0), P)
    assert weighted_integral(lambda z: 1.0, r, P).value == pytest.approx(1.0, abs=1e-6)


def test_weak_coupling_tends_to_free_value():
    r = bath_response(OhmicSharp(1e-4, 100.0), P)
    val = weighted_integral(lambda z: 1 / math.sqrt(z), r, P).value
    assert val == pytest.approx(1.0, rel=1e-3)


@pytest.mark.parametrize("T", [0.0, 0.3, 1.0, 7.0])
def test_decoupled_moments(T):
    particle = ParticleParams(m=2.0, Omega=1.5, hbar=0.8, kB=1.3)
    env = OhmicSharp(0.0, 10.0)
    q2 = q2_mean(env, particle, T)
    p2 = p2_mean(env, particle, T)
    assert q2 == pytest.approx(decoupled_q2(particle, T), rel=1e-14)
    assert p2 == pytest.approx(particle.m**2 * particle.Omega**2 * q2, rel=1e-14)
    if T == 0:
        assert q2 == pytest.approx(particle.hbar / (2 * particle.m * particle.Omega), rel=1e-15)
        assert effective_temperature(q2, p2, particle) == 0.0
    else:
        assert effective_temperature(q2, p2, particle) == pytest.approx(T, rel=1e-12)
    assert effective_mass(q2, p2, particle) == pytest.approx(particle.m, rel=1e-14)


def test_negative_temperature_rejected():
    with pytest.raises(DomainError):
        q2_mean(OhmicSharp(0.1, 10.0), P, -1.0)


def test_p2_log_divergence_slope():
    eta = 0.02
    wcs = np.array([1e2, 1e3, 1e4])
    p2 = [p2_mean(OhmicSharp(eta, wc), P, 0.0) for wc in wcs]
    slope = np.polyfit(np.log(wcs), p2, 1)[0]
    assert slope == pytest.approx(eta / math.pi, rel=0.10)


def test_effective_temperature_pure_and_violation():
    assert effective_temperature(0.5, 0.5, P) == 0.0
    # within the quadrature slack still counts as pure
    assert effective_temperature(0.5, 0.5 * (1 - 1e-10), P) == 0.0
    with pytest.raises(UncertaintyViolation):
        effective_temperature(0.5, 0.49, P)
    with pytest.raises(UncertaintyViolation):
        density_matrix(0.5, 0.49, P)


@settings(max_examples=60, deadline=None)
@given(T=st.floats(0.05, 100.0))
def test_effective_temperature_inverts_free_oscillator(T):
    q2 = decoupled_q2(P, T)
    assert effective_temperature(q2, q2, P) == pytest.approx(T, rel=1e-6)


def test_effective_mass_definition():
    particle = ParticleParams(m=3.0, Omega=2.0)
    assert effective_mass(0.7, 9.0 * 4.0 * 0.7, particle) == pytest.approx(3.0, rel=1e-15)


def test_entropy_values():
    assert entropy_of(0.0, P) == 0.0
    assert entropy_of(1.0, P) == pytest.approx(1.04066, abs=1e-5)
    assert entropy_of(1.0, P) == pytest.approx(fock_entropy(1.0), rel=1e-12)
    x = 20.0
    s = entropy_of(1 / x, P)
    assert s == pytest.approx(fock_entropy(x), rel=1e-10)
    assert s == pytest.approx((x + 1) * math.exp(-x), rel=0.01)
    assert entropy_of(1e-4, P) == 0.0


@settings(max_examples=40, deadline=None)
@given(x=st.floats(0.01, 30.0))
def test_entropy_matches_fock_sum(x):
    n = int(max(200, 60 / x))
    assert entropy_of(1 / x, P) == pytest.approx(fock_entropy(x, n), rel=1e-9, abs=1e-300)


def test_density_matrix_normalization_and_roundtrip():
    particle = ParticleParams(m=1.4, Omega=0.9, hbar=1.2)
    q2, p2 = 0.9, 1.1
    sig = density_matrix(q2, p2, particle)
    L = 10 * math.sqrt(q2)
    assert integrate.quad(lambda q: sig(q, q), -L, L, epsabs=1e-13)[0] == pytest.approx(1.0, abs=1e-10)
    assert sig.a_minus == pytest.approx(p2 / (2 * 1.2**2))
    assert sig.a_plus == pytest.approx(1 / (8 * q2))
    # moments recovered by quadrature over the kernel
    q2_num = integrate.quad(lambda q: q * q * sig(q, q), -L, L, epsabs=1e-14, epsrel=1e-13)[0]
    am, ap = sig.a_minus, sig.a_plus
    # d/dq d/dq' sigma at q = q'
    p2_num = particle.hbar**2 * integrate.quad(
        lambda q: sig(q, q) * (2 * am - 2 * ap + 16 * ap * ap * q * q), -L, L, epsabs=1e-14, epsrel=1e-13)[0]
    assert q2_num == pytest.approx(q2, rel=1e-10)
    assert p2_num == pytest.approx(p2, rel=1e-10)
    assert sig.moments() == pytest.approx((q2, p2), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(T=st.floats(0.05, 20.0), stretch=st.floats(0.3, 3.0))
def test_purity_matches_fock_sum(T, stretch):
    particle = P
    q2 = decoupled_q2(particle, T) / stretch
    p2 = decoupled_q2(particle, T) * stretch
    sig = density_matrix(q2, p2, particle)
    x = particle.hbar * particle.Omega / (particle.kB * effective_temperature(q2, p2, particle))
    fock = float(np.sum(fock_probs(x, int(max(200, 80 / x))) ** 2))
    assert sig.purity() == pytest.approx(fock, rel=1e-10)
    assert sig.purity() == pytest.approx(math.tanh(x / 2), rel=1e-10)


def test_pure_state_has_no_decay():
    sig = density_matrix(0.5, 0.5, P)
    for x in (0.1, 1.0, 3.0):
        assert sig(x, -x) / sig(x, x) == pytest.approx(1.0, rel=1e-12)


def test_state_invariants():
    st_ = equilibrium_state(OhmicSharp(0.5, 100.0), P, 0.0)
    assert st_.q2 * st_.p2 > 0.25
    assert st_.T_eff > 0 and st_.entropy > 0
    sig = st_.density_matrix(P)
    assert isinstance(sig, GaussianDensityMatrix)
    assert sig.a_minus > sig.a_plus


@settings(max_examples=15, deadline=None)
@given(eta=st.floats(0.0, 2.0), T=st.floats(0.0, 5.0), logwc=st.floats(0.5, 3.0),
       drude=st.booleans())
def test_heisenberg_bound_property(eta, T, logwc, drude):
    wc = 10.0**logwc
    env = Drude(eta, wc) if drude else OhmicSharp(eta, wc)
    q2 = q2_mean(env, P, T)
    p2 = p2_mean(env, P, T)
    assert 4 * q2 * p2 >= 1 - 1e-8


def test_effective_mass_tends_to_bare_mass():
    devs = []
    for eta in (0.1, 0.01, 0.001):
        st_ = equilibrium_state(OhmicSharp(eta, 100.0), P, 1.0)
        devs.append(abs(st_.m_eff - 1))
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 1e-2
