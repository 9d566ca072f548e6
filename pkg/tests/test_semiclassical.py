import math
from dataclasses import replace

import numpy as np
import pytest

from fielddeco.decoherence import RateContext
from fielddeco.energy import heating_rate_sum
from fielddeco.model import FieldModel, NoiseModel
from fielddeco.semiclassical import (
    ClassicalField, diffusion_check, field_energy, hamiltonian_energy, kernel_factors,
    kernels_at, kick_displacement, predicted_moments, q_coefficients, sample_ensemble,
    sample_trajectory, to_lab_frame,
)
from oracles import spread_position


@pytest.fixture(scope="module")
def ctx():
    return RateContext.build(FieldModel(speed=0.3), NoiseModel(sigma_x=0.1, sigma_g_sq=0.05))


@pytest.fixture(scope="module")
def still():
    return RateContext.build(FieldModel(speed=0.0), NoiseModel(sigma_x=0.1, sigma_g_sq=0.05))


def _random_field(ctx, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    mu = scale * (rng.normal(size=ctx.model.n_modes) + 1j * rng.normal(size=ctx.model.n_modes))
    mu *= np.exp(-0.5 * (0.05 * ctx.grid.wavenumbers) ** 2)
    mu[0] = 0.0  # the unpaired -N/2 mode has no lab-frame partner
    return ClassicalField.from_modes(ctx, mu)


def test_initial_kernels_are_spread_function(ctx):
    k = kernels_at(ctx, 0.0)
    s = np.arange(k.size) * k.spacing
    s = np.where(s > 0.5, s - 1.0, s)
    assert np.max(np.abs(k.a - spread_position(s, ctx.noise.sigma_x))) < 1e-10
    assert not np.any(k.b)


def test_b_vanishes_without_dispersion(still):
    for t in (0.1, 1.7, 40.0):
        assert np.max(np.abs(kernels_at(still, t).b)) < 1e-14


@pytest.mark.parametrize("t", [0.3, 2.2, 17.0])
def test_kernels_match_reordered_mode_sum(ctx, t):
    k = kernels_at(ctx, t)
    fa, fb = kernel_factors(ctx, t)
    s = np.arange(k.size) * k.spacing
    order = np.random.default_rng(int(t * 10)).permutation(ctx.model.n_modes)
    a = np.zeros(k.size, complex)
    b = np.zeros(k.size, complex)
    for i in order:
        ph = np.exp(1j * ctx.grid.wavenumbers[i] * s) / math.sqrt(ctx.model.length)
        a += ctx.grid.f_k[i] * fa[i] * ph
        b += ctx.grid.f_k[i] * fb[i] * ph
    assert np.max(np.abs(k.a - a)) < 1e-12
    assert np.max(np.abs(k.b - b)) < 1e-12


def test_kernel_matrix_is_translation_invariant(ctx):
    k = kernels_at(ctx, 0.8)
    mat = k.matrix("a")
    assert mat.shape == (k.size, k.size)
    assert np.array_equal(np.roll(np.roll(mat, 3, 0), 3, 1), mat)
    assert np.array_equal(k.matrix("b")[:, 0], k.b)


def test_initial_q_is_spread_autocorrelation(still):
    q = q_coefficients(still, 0.0)
    assert np.max(np.abs(q.ll)) == 0 and np.max(np.abs(q.conj_conj)) == 0
    assert np.max(np.abs(q.ll_conj)) == 0
    # position-space oracle: gamma s^2 int dx f(x) f(x - r)
    x = np.linspace(0, 1, 4000, endpoint=False)
    for m in (0, 5, 20, 128):
        r = m * q.spacing
        fx = spread_position(np.where(x > 0.5, x - 1, x), 0.1)
        fr = spread_position(((x - r + 0.5) % 1.0) - 0.5, 0.1)
        ref = still.noise.gamma * still.noise.sigma_g_sq * np.mean(fx * fr)
        assert abs(q.conj_l[m] - ref) < 1e-10


def test_q_linear_in_kick_variance(ctx):
    small = RateContext.build(ctx.model, replace(ctx.noise, sigma_g_sq=1e-6))
    q1, q2 = q_coefficients(ctx, 1.3), q_coefficients(small, 1.3)
    for a, b in [(q1.ll, q2.ll), (q1.conj_l, q2.conj_l), (q1.ll_conj, q2.ll_conj)]:
        assert np.allclose(b * ctx.noise.sigma_g_sq / 1e-6, a, atol=1e-16)


@pytest.mark.parametrize("t", [0.0, 0.4, 3.1, 25.0])
def test_q_pairing_and_positivity(ctx, t):
    q = q_coefficients(ctx, t)
    flipped = np.roll(q.conj_conj[::-1], 1)  # r -> -r
    assert np.max(np.abs(q.ll - np.conj(flipped))) < 1e-12
    ev = q.eigenvalues()
    assert ev.min() >= -1e-10 * ev.max()


def test_no_kicks_leaves_field_unchanged(ctx):
    quiet = RateContext.build(ctx.model, replace(ctx.noise, gamma=0.0))
    f0 = _random_field(quiet, 1)
    assert np.array_equal(sample_trajectory(quiet, f0, 5.0, 3).values, f0.values)


def test_seeded_determinism(ctx):
    f0 = _random_field(ctx, 2)
    a = sample_trajectory(ctx, f0, 8.0, 42, stream=7)
    b = sample_trajectory(ctx, f0, 8.0, 42, stream=7)
    c = sample_trajectory(ctx, f0, 8.0, 42, stream=8)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_translation_invariance(ctx):
    f0 = _random_field(ctx, 3)
    shift = 37
    moved = ClassicalField(np.roll(f0.values, shift), f0.length)
    a = sample_trajectory(ctx, f0, 6.0, 11)
    b = sample_trajectory(ctx, moved, 6.0, 11, center_shift=shift * ctx.model.length / ctx.x_nodes)
    assert np.max(np.abs(np.roll(a.values, shift) - b.values)) < 1e-12


def test_ensemble_matches_single_trajectories(ctx):
    f0 = _random_field(ctx, 4)
    ens = sample_ensemble(ctx, f0, 5.0, 9, 6)
    fields = ens.fields(ctx)
    for i in range(6):
        one = sample_trajectory(ctx, f0, 5.0, 9, stream=i)
        assert np.max(np.abs(one.values - fields[i])) < 1e-12


def test_kick_displacement_is_band_limited_modes(ctx):
    d = kick_displacement(ctx, 0.9, 0.3 - 0.2j, 0.31)
    back = ClassicalField(d, 1.0).modes(ctx)
    assert np.allclose(ClassicalField.from_modes(ctx, back).values, d, atol=1e-14)


def test_lab_frame_energy_and_conjugation(ctx):
    f = _random_field(ctx, 5)
    lab0 = to_lab_frame(ctx, f, 0.0)
    psi = (lab0.phi + 1j * lab0.pi) / math.sqrt(2.0)
    assert np.max(np.abs(psi - np.conj(f.values))) < 1e-12
    e = float(field_energy(ctx, f.modes(ctx)))
    for t in (0.0, 0.7, 12.0):
        assert hamiltonian_energy(ctx, to_lab_frame(ctx, f, t)) == pytest.approx(e, rel=1e-12)


def _energy_slope(ctx, f0, seed):
    times = np.linspace(0.5, 4.0, 8)
    ens = sample_ensemble(ctx, f0, 4.0, seed, 10_000, record_times=times)
    e = ens.energies(ctx)
    per_traj = np.polyfit(times, e.T, 1)[0]
    return per_traj.mean(), per_traj.std(ddof=1) / math.sqrt(len(per_traj))


@pytest.mark.parametrize("seed,scale", [(1, 0.0), (2, 0.5)])
def test_energy_gain_is_state_independent(ctx, seed, scale):
    f0 = _random_field(ctx, 6, scale) if scale else ClassicalField.zeros(ctx)
    slope, se = _energy_slope(ctx, f0, seed)
    assert abs(slope - heating_rate_sum(ctx.model, ctx.noise)) <= 3 * se


def test_predicted_moments_short_time(still):
    t = 1e-4
    p, s = predicted_moments(still, t)
    q0 = q_coefficients(still, 0.0)
    assert np.allclose(p / (2 * t), q0.conj_l, rtol=1e-6, atol=1e-12)
    assert np.max(np.abs(s)) < 1e-12


def test_diffusion_without_kicks_is_exactly_zero(ctx):
    quiet = RateContext.build(ctx.model, replace(ctx.noise, gamma=0.0))
    p, s = predicted_moments(quiet, 1.0)
    assert not np.any(p) and not np.any(s)
    rep = diffusion_check(quiet, 1.0, n_traj=50)
    assert all(d == 0 for d in rep.moment_deviation) and all(d == 0 for d in rep.cf_deviation)


def test_field_checks(ctx):
    with pytest.raises(ValueError):
        ClassicalField(np.zeros(10)).check(ctx)
    with pytest.raises(ValueError):
        sample_trajectory(ctx, ClassicalField.zeros(ctx), 0.0, 1)
