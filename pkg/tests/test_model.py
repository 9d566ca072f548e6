import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fielddeco.model import (
    CatStateSpec, FieldModel, ModeGrid, NoiseModel, PhasePoint, as_eta, cat_char_fn,
    dispersion, kick_pdf, mode_coefficients, spread_coefficient, vacuum_char_fn,
)
from oracles import fock_char_fn, fock_trace_with, spread_position

finite = st.floats(-50, 50, allow_nan=False)


def test_dispersionless_limit():
    m = FieldModel(speed=0.0)
    assert np.all(dispersion(m, np.linspace(-100, 100, 11)) == 1.0)


def test_dispersion_value():
    m = FieldModel(omega=1.0, speed=2.0)
    w = float(dispersion(m, 3.0))
    assert w == pytest.approx(math.sqrt(37.0), rel=1e-15)
    assert w * w == pytest.approx(1 + 36, rel=1e-15)


def test_mode_coefficients_at_zero_and_without_dispersion():
    op, om = mode_coefficients(FieldModel(), 0.0)
    assert (float(op), float(om)) == (1.0, 0.0)
    op, om = mode_coefficients(FieldModel(speed=0.0), np.linspace(-60, 60, 7))
    assert np.all(op == 1.0) and np.all(om == 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 10), st.floats(0.1, 10), finite)
def test_omega_identity(v, w, k):
    op, om = mode_coefficients(FieldModel(omega=w, speed=v), k)
    assert abs(op**2 - om**2 - 1) < 1e-12


@pytest.mark.parametrize("n_modes", [2, 32, 512])
def test_grid_quantities_even_in_k(n_modes):
    g = ModeGrid.build(FieldModel(speed=0.3, n_modes=n_modes), NoiseModel(sigma_x=0.05))
    inner = slice(1, None)  # drop the unpaired -N/2 mode
    for arr in (g.omega_k, g.omega_plus, g.omega_minus, g.f_k):
        assert np.array_equal(arr[inner], arr[inner][::-1])
    assert np.all(g.f_k >= 0) and g.f_k[n_modes // 2] > 0


def test_spread_coefficient_broad_regime():
    m, n = FieldModel(), NoiseModel(sigma_x=1.0)
    f0 = float(spread_coefficient(m, n, 0.0))
    assert abs(f0 - math.sqrt(m.length)) < 1e-8
    q = math.exp(-2 * math.pi**2)
    f1 = float(spread_coefficient(m, n, 2 * math.pi))
    assert f1 == pytest.approx(math.exp(-2 * math.pi**2) / (1 + 2 * q), rel=1e-12)
    assert float(spread_coefficient(m, n, -2 * math.pi)) == f1


@pytest.mark.parametrize("sigma_x", [0.02, 0.1, 0.3, 1.0])
def test_spread_coefficients_synthesise_position_space_profile(sigma_x):
    m = FieldModel(n_modes=512)
    g = ModeGrid.build(m, NoiseModel(sigma_x=sigma_x))
    s = np.linspace(-0.5, 0.5, 41)
    synth = (np.exp(1j * np.outer(s, g.wavenumbers)) @ g.f_k).real / math.sqrt(m.length)
    assert np.max(np.abs(synth - spread_position(s, sigma_x))) < 1e-10


def test_spread_scales_with_length():
    # dimensionless inputs round-trip: only sigma_x / L matters, up to sqrt(L)
    a = spread_coefficient(FieldModel(length=1.0), NoiseModel(sigma_x=0.2), 2 * math.pi * 3)
    b = spread_coefficient(FieldModel(length=4.0), NoiseModel(sigma_x=0.8), 2 * math.pi * 3 / 4.0)
    assert float(b) == pytest.approx(2.0 * float(a), rel=1e-13)


@pytest.mark.parametrize("s2", [0.01, 0.32, 3.0])
def test_kick_pdf_normalization_and_second_moment(s2):
    noise = NoiseModel(sigma_g_sq=s2)
    r = 14 * math.sqrt(s2)
    norm, _ = integrate.dblquad(lambda y, x: kick_pdf(noise, complex(x, y)), -r, r, -r, r,
                                epsabs=1e-10)
    mom, _ = integrate.dblquad(lambda y, x: (x * x + y * y) * kick_pdf(noise, complex(x, y)),
                               -r, r, -r, r, epsabs=1e-10)
    assert abs(norm - 1) < 1e-6
    assert mom == pytest.approx(2 * s2, rel=1e-6)


@settings(max_examples=100, deadline=None)
@given(finite, finite)
def test_kick_pdf_even(x, y):
    noise = NoiseModel()
    assert kick_pdf(noise, complex(x, y)) == kick_pdf(noise, complex(-x, -y))


def test_char_fn_at_origin():
    for a, b in [(2 + 2j, -2 - 2j), (1, 0.5j), (3, 3), (4 + 1j, 4 - 1j)]:
        assert cat_char_fn(CatStateSpec(a, b), 0) == pytest.approx(1.0, abs=1e-14)


def test_char_fn_single_coherent_state():
    a = 1.3 - 0.7j
    eta = np.array([0.2 + 0.1j, -1.5 + 2j, 3j])
    ref = np.exp(-0.5 * np.abs(eta) ** 2 + eta * np.conj(a) - np.conj(eta) * a)
    assert np.allclose(cat_char_fn(CatStateSpec(a, a), eta), ref, atol=1e-14)


@pytest.mark.parametrize("alpha,beta", [(2 + 2j, -2 - 2j), (4 + 1.5j, 4 - 1.5j), (0.3, -0.1j)])
def test_char_fn_matches_fock_oracle(alpha, beta):
    rng = np.random.default_rng(7)
    eta = (rng.normal(size=12) + 1j * rng.normal(size=12)) * 1.5
    st_ = CatStateSpec(alpha, beta)
    for e in eta:
        assert abs(cat_char_fn(st_, e) - fock_char_fn(alpha, beta, e)) < 1e-8


def test_char_fn_envelope_bounded():
    st_ = CatStateSpec(2 + 2j, -2 - 2j)
    x = np.linspace(-12, 12, 241)
    eta = x[:, None] + 1j * x[None, :]
    env = np.abs(cat_char_fn(st_, eta)) * np.exp(0.5 * np.abs(eta) ** 2)
    # |<a|D|b>| e^{|eta|^2/2} <= exp(|eta| (|a| + |b|)) term by term
    bound = 4 * st_.normalization() * np.exp(np.abs(eta) * (abs(st_.alpha) + abs(st_.beta)))
    assert np.all(env <= bound)


@pytest.mark.parametrize("alpha,beta", [(2 + 2j, -2 - 2j), (4 + 0.5j, 4 - 0.5j), (1.0, 0.0)])
def test_char_fn_square_integrates_to_purity_one(alpha, beta):
    st_ = CatStateSpec(alpha, beta)
    r = 9.0 + abs(alpha) + abs(beta)
    x = np.linspace(-r, r, 721)
    eta = x[:, None] + 1j * x[None, :]
    val = np.trapezoid(np.trapezoid(np.abs(cat_char_fn(st_, eta)) ** 2, x), x) / math.pi
    assert abs(val - 1) < 1e-4


def test_exact_normalization_gives_unit_trace():
    for a, b in [(2 + 2j, -2 - 2j), (0.5 + 0.5j, 0.5 - 0.5j), (1j, 0.7)]:
        st_ = CatStateSpec(a, b)
        assert fock_trace_with(a, b, st_.normalization("exact")) == pytest.approx(1, abs=1e-12)


def test_double_angle_normalization_agrees_when_phase_vanishes():
    st_ = CatStateSpec(2 + 2j, -2 - 2j)
    assert st_.phase == 0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert st_.normalization("double-angle") == st_.normalization("exact")
    assert fock_trace_with(st_.alpha, st_.beta, st_.normalization("double-angle")) == pytest.approx(1, abs=1e-12)


def test_double_angle_normalization_warns_and_breaks_trace_with_phase():
    st_ = CatStateSpec(0.5 + 0.5j, 0.5 - 0.5j)
    with pytest.warns(UserWarning):
        n = st_.normalization("double-angle")
    assert abs(fock_trace_with(st_.alpha, st_.beta, n) - 1) > 1e-3


def test_normalization_kind_validated():
    with pytest.raises(ValueError):
        CatStateSpec(1, -1).normalization("other")


def test_lobe_centers():
    assert CatStateSpec(2 + 2j, -2 - 2j).lobe_centers() == (0j, 4 + 4j, -4 - 4j)
    assert CatStateSpec(1, 1).lobe_centers() == (0j,)


def test_vacuum_char_fn():
    assert vacuum_char_fn(0) == 1.0
    assert vacuum_char_fn(2j) == pytest.approx(math.exp(-2))


@pytest.mark.parametrize("kwargs", [
    {"omega": 0}, {"omega": -1}, {"speed": -0.1}, {"length": float("inf")},
    {"n_modes": 31}, {"n_modes": 0}, {"hbar": float("nan")},
])
def test_field_model_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        FieldModel(**kwargs)


@pytest.mark.parametrize("kwargs", [
    {"gamma": -1}, {"sigma_g_sq": 0}, {"sigma_g_sq": -0.1}, {"sigma_x": 0},
    {"spread": "box"}, {"kick": "cauchy"}, {"gamma": float("nan")},
])
def test_noise_model_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        NoiseModel(**kwargs)


def test_cat_state_rejects_non_finite():
    with pytest.raises(ValueError):
        CatStateSpec(float("inf"), 0)
    with pytest.raises(ValueError):
        cat_char_fn(CatStateSpec(1, -1), complex("nan"))


def test_phase_point():
    m = FieldModel(n_modes=8)
    p = PhasePoint.single_mode(m, 1 + 1j)
    assert p.eta[m.zero_mode] == 1 + 1j and np.count_nonzero(p.eta) == 1
    assert p.check(m) is p
    assert np.array_equal(as_eta(p), p.eta)
    with pytest.raises(ValueError):
        p.check(FieldModel(n_modes=4))
    with pytest.raises(ValueError):
        p.eta[0] = 3  # read-only
