"""Position-space semiclassical layer: kick kernels, diffusion coefficients and a
compound-Poisson sampler for the interaction-picture field amplitude.

A classical field ``lambda(y)`` lives on the periodic grid ``y_m = m L / M``
(``M = ctx.x_nodes``) and is band-limited to the model's wavenumbers::

    lambda(y) = L^{-1/2} sum_k mu_k e^{-iky}.

A kick of amplitude ``xi`` centred at ``x`` at time ``t`` adds
``xi a_t(x; y) - xi* b_t(x; y)``, i.e. ``mu_k += f_k e^{ikx} (xi A_k - xi* B_k)`` with

    A_k = cos(w_k t) - (i/2) (w/w_k + w_k/w) sin(w_k t)
    B_k = -(i/2) (w/w_k - w_k/w) sin(w_k t).

The sign of ``B_k`` is the one for which the kick reproduces the mode-space
displacement ``xi Op_k - xi* Om_k``. The field energy is then conserved between
kicks and grows by ``hbar w_k f_k^2 |xi Op_k - xi* Om_k|^2`` per kick on average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .decoherence import RateContext
from .model import NoiseModel

__all__ = [
    "Kernels",
    "QCoefficients",
    "ClassicalField",
    "LabField",
    "EnsembleSample",
    "DiffusionReport",
    "kernel_factors",
    "kernels_at",
    "q_coefficients",
    "kick_displacement",
    "sample_trajectory",
    "sample_ensemble",
    "mode_amplitudes",
    "field_energy",
    "to_lab_frame",
    "hamiltonian_energy",
    "predicted_moments",
    "diffusion_check",
]


# ------------------------------------------------------------------ kernels

def kernel_factors(ctx: RateContext, t):
    """Per-mode factors ``(A_k, B_k)`` of the kernels at time ``t``."""
    g, omega = ctx.grid, ctx.model.omega
    wt = g.omega_k * t
    a = np.cos(wt) - 0.5j * (omega / g.omega_k + g.omega_k / omega) * np.sin(wt)
    b = -0.5j * (omega / g.omega_k - g.omega_k / omega) * np.sin(wt)
    return a, b


def _modes_to_grid(ctx: RateContext, coeff, sign=+1):
    """``L^{-1/2} sum_k coeff_k e^{sign i k s_m}`` on the grid, batched over leading axes."""
    m = ctx.x_nodes
    j = ctx.model.mode_indices
    buf = np.zeros(np.shape(coeff)[:-1] + (m,), dtype=complex)
    buf[..., j % m] = coeff
    if sign > 0:
        out = m * np.fft.ifft(buf, axis=-1)
    else:
        out = np.fft.fft(buf, axis=-1)
    return out / math.sqrt(ctx.model.length)


@dataclass(frozen=True)
class Kernels:
    """Kernels ``a_t(x; y)``, ``b_t(x; y)`` tabulated against ``s = x - y`` on the grid."""

    a: np.ndarray
    b: np.ndarray
    t: float
    spacing: float

    @property
    def size(self) -> int:
        return len(self.a)

    def matrix(self, which="a"):
        """Dense ``K[m, n] = kernel(x_m; y_n)``."""
        vals = self.a if which == "a" else self.b
        idx = (np.arange(self.size)[:, None] - np.arange(self.size)[None, :]) % self.size
        return vals[idx]


def kernels_at(ctx: RateContext, t) -> Kernels:
    """Truncated mode sums for ``a_t`` and ``b_t`` on the periodic grid."""
    fa, fb = kernel_factors(ctx, t)
    f = ctx.grid.f_k
    a = _modes_to_grid(ctx, fa * f)
    b = _modes_to_grid(ctx, fb * f)
    if t == 0:
        # the unpaired edge mode is the only source of an imaginary part
        edge = 2.0 * abs(f[0]) / math.sqrt(ctx.model.length)
        assert not np.any(b), "b_0 must vanish"
        assert np.max(np.abs(a.imag)) <= 1e-12 * np.max(np.abs(a)) + edge, "a_0 must be real"
        assert np.allclose(a, np.roll(a[::-1], 1), atol=1e-12 + edge), "a_0 must be even"
    return Kernels(a, b, float(t), ctx.model.length / ctx.x_nodes)


# ------------------------------------------------------------------ Fokker-Planck coefficients

def _circular_mean_product(u, v):
    """``r -> mean_m u[m] conj(v[m - r])`` for periodic arrays."""
    return np.fft.ifft(np.fft.fft(u) * np.conj(np.fft.fft(v))) / len(u)


@dataclass(frozen=True)
class QCoefficients:
    """The four diffusion coefficients as functions of ``r = x2 - x1`` on the grid."""

    ll: np.ndarray
    ll_conj: np.ndarray
    conj_l: np.ndarray
    conj_conj: np.ndarray
    prefactor: float
    spacing: float

    def __post_init__(self):
        mirror = lambda q: np.roll(q[::-1], 1)  # noqa: E731  q(-r)
        scale = max(np.max(np.abs(self.conj_l)), np.max(np.abs(self.conj_conj)), 1e-300)
        if not np.allclose(self.ll, np.conj(mirror(self.conj_conj)), rtol=0, atol=1e-12 * scale):
            raise ValueError("Q^{ll}(r) must equal conj(Q^{l*l*}(-r))")
        eig = np.fft.fft(self.conj_l).real
        if eig.min() < -1e-10 * max(eig.max(), 0.0):
            raise ValueError("Q^{l*l} is not positive semidefinite")

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the circulant matrix ``Q^{l*l}(x_n - x_m)``."""
        return np.fft.fft(self.conj_l).real


def q_coefficients(ctx: RateContext, t) -> QCoefficients:
    """``x``-averages of kernel products on the periodic grid (trapezoidal, exact here)."""
    k = kernels_at(ctx, t)
    pre = ctx.noise.gamma * ctx.noise.sigma_g_sq
    # x1 = 0, x2 = r: a(x; x1) = a[x], a(x; x2) = a[x - r]
    return QCoefficients(
        ll=-pre * _circular_mean_product(k.b, k.a),
        ll_conj=pre * _circular_mean_product(k.b, k.b),
        conj_l=pre * _circular_mean_product(k.a, k.a),
        conj_conj=-pre * _circular_mean_product(k.a, k.b),
        prefactor=pre,
        spacing=k.spacing,
    )


# ------------------------------------------------------------------ classical fields

@dataclass(frozen=True)
class ClassicalField:
    """Complex amplitude ``lambda(y_m)`` on the periodic grid."""

    values: np.ndarray
    length: float = 1.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.ndim != 1:
            raise ValueError("ClassicalField values must be one-dimensional")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def size(self) -> int:
        return len(self.values)

    def check(self, ctx: RateContext) -> "ClassicalField":
        if self.size != ctx.x_nodes:
            raise ValueError(f"field has {self.size} nodes, context grid has {ctx.x_nodes}")
        if not math.isclose(self.length, ctx.model.length):
            raise ValueError("field length does not match the model")
        return self

    @classmethod
    def zeros(cls, ctx: RateContext) -> "ClassicalField":
        return cls(np.zeros(ctx.x_nodes, dtype=complex), ctx.model.length)

    @classmethod
    def from_modes(cls, ctx: RateContext, mu) -> "ClassicalField":
        return cls(_modes_to_grid(ctx, np.asarray(mu, dtype=complex), sign=-1), ctx.model.length)

    def modes(self, ctx: RateContext) -> np.ndarray:
        """Mode coefficients ``mu_k``; components outside the band are dropped."""
        self.check(ctx)
        spectrum = np.fft.ifft(self.values) * math.sqrt(ctx.model.length)
        return spectrum[ctx.model.mode_indices % ctx.x_nodes]


def kick_displacement(ctx: RateContext, t, xi, x) -> np.ndarray:
    """``xi a_t(x; y_m) - xi* b_t(x; y_m)`` on the grid, for a kick at any real ``x``."""
    fa, fb = kernel_factors(ctx, t)
    mu = ctx.grid.f_k * np.exp(1j * ctx.grid.wavenumbers * x) * (xi * fa - np.conj(xi) * fb)
    return _modes_to_grid(ctx, mu, sign=-1)


def _generator(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed), int(stream)]))


def _draw_kicks(gen, noise: NoiseModel, length, t_final):
    """Kick times (sorted), centres and amplitudes for one trajectory."""
    if noise.gamma == 0.0:
        return np.empty(0), np.empty(0), np.empty(0, dtype=complex)
    n = gen.poisson(noise.gamma * t_final)
    times = np.sort(gen.uniform(0.0, t_final, n))
    centers = gen.uniform(0.0, length, n)
    parts = gen.normal(0.0, math.sqrt(noise.sigma_g_sq), (n, 2))
    return times, centers, parts[:, 0] + 1j * parts[:, 1]


def sample_trajectory(ctx: RateContext, initial: ClassicalField, t_final, rng_seed,
                      stream: int = 0, center_shift: float = 0.0) -> ClassicalField:
    """One realisation of the jump process in the interaction picture.

    Kick times follow a Poisson process of rate gamma on ``(0, t_final]``,
    centres are uniform on ``[0, L)`` and amplitudes follow the kick pdf.
    ``(rng_seed, stream)`` fully determine the draws. ``center_shift`` moves
    every kick centre by a fixed offset.
    """
    initial.check(ctx)
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    gen = _generator(rng_seed, stream)
    times, centers, xis = _draw_kicks(gen, ctx.noise, ctx.model.length, t_final)
    values = np.array(initial.values)
    for tau, x, xi in zip(times, centers, xis):
        values += kick_displacement(ctx, tau, xi, x + center_shift)
    return ClassicalField(values, initial.length)


@dataclass(frozen=True)
class EnsembleSample:
    """Mode coefficients of many trajectories at a set of record times."""

    times: np.ndarray
    modes: np.ndarray  # (n_traj, n_times, n_modes)
    n_kicks: np.ndarray

    def fields(self, ctx: RateContext, time_index: int = -1) -> np.ndarray:
        return _modes_to_grid(ctx, self.modes[:, time_index], sign=-1)

    def energies(self, ctx: RateContext) -> np.ndarray:
        return field_energy(ctx, self.modes)


def sample_ensemble(ctx: RateContext, initial: ClassicalField, t_final, seed: int,
                    n_traj: int, record_times=None, chunk: int = 8192) -> EnsembleSample:
    """Trajectories ``stream = 0 .. n_traj-1``, accumulated in mode space.

    Uses the same draws as :func:`sample_trajectory` with the same seed and
    stream, so trajectory ``i`` agrees with ``sample_trajectory(..., stream=i)``.
    """
    initial.check(ctx)
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    rec = np.array([t_final] if record_times is None else record_times, dtype=float)
    if np.any(np.diff(rec) <= 0) or rec[0] < 0 or rec[-1] > t_final:
        raise ValueError("record_times must increase within [0, t_final]")
    mu0 = initial.modes(ctx)
    owners, times, centers, xis = [], [], [], []
    counts = np.zeros(n_traj, dtype=int)
    for i in range(n_traj):
        tt, cc, xx = _draw_kicks(_generator(seed, i), ctx.noise, ctx.model.length, t_final)
        counts[i] = len(tt)
        owners.append(np.full(len(tt), i))
        times.append(tt)
        centers.append(cc)
        xis.append(xx)
    owners = np.concatenate(owners) if n_traj else np.empty(0, dtype=int)
    times = np.concatenate(times) if n_traj else np.empty(0)
    centers = np.concatenate(centers) if n_traj else np.empty(0)
    xis = np.concatenate(xis) if n_traj else np.empty(0, dtype=complex)

    acc = np.zeros((n_traj, len(rec), ctx.model.n_modes), dtype=complex)
    bins = np.searchsorted(rec, times, side="left")
    keep = bins < len(rec)
    g = ctx.grid
    for lo in range(0, len(times), chunk):
        sl = slice(lo, lo + chunk)
        fa, fb = kernel_factors(ctx, times[sl, None])
        dmu = g.f_k * np.exp(1j * g.wavenumbers * centers[sl, None]) * (
            xis[sl, None] * fa - np.conj(xis[sl, None]) * fb
        )
        k = keep[sl]
        np.add.at(acc, (owners[sl][k], bins[sl][k]), dmu[k])
    modes = mu0 + np.cumsum(acc, axis=1)
    return EnsembleSample(rec, modes, counts)


# ------------------------------------------------------------------ energy and lab frame

def _partner_index(ctx: RateContext):
    """Position of ``-k`` for every ``k``; -1 where ``-k`` is outside the band."""
    j = ctx.model.mode_indices
    pos = -j + ctx.model.n_modes // 2
    return np.where(pos < ctx.model.n_modes, pos, -1)


def mode_amplitudes(ctx: RateContext, mu):
    """Interaction-picture mode amplitudes ``Op_k mu_k - Om_k conj(mu_{-k})``."""
    mu = np.asarray(mu, dtype=complex)
    pos = _partner_index(ctx)
    partner = np.where(pos >= 0, np.conj(mu[..., np.maximum(pos, 0)]), 0.0)
    return ctx.grid.omega_plus * mu - ctx.grid.omega_minus * partner


def field_energy(ctx: RateContext, mu):
    """``sum_k hbar w_k |c_k|^2`` for mode coefficients ``mu`` (batched)."""
    c = mode_amplitudes(ctx, mu)
    return np.sum(ctx.model.hbar * ctx.grid.omega_k * np.abs(c) ** 2, axis=-1)


@dataclass(frozen=True)
class LabField:
    phi: np.ndarray
    pi: np.ndarray
    t: float


def to_lab_frame(ctx: RateContext, field: ClassicalField, t) -> LabField:
    """Map an interaction-picture field at time ``t`` to lab-frame ``Phi``, ``Pi``.

    Lab amplitudes are ``c_k(t) = e^{-i w_k t} conj(Op_k mu_k - Om_k conj(mu_{-k}))``.
    At ``t = 0`` the lab complex field equals ``conj(lambda)``, so a kick
    ``xi`` appears as ``xi* f((y - x)/L)`` in the lab frame.
    """
    m = ctx.model
    c = np.exp(-1j * ctx.grid.omega_k * t) * np.conj(mode_amplitudes(ctx, field.modes(ctx)))
    pos = _partner_index(ctx)
    # coefficient of e^{iky} in Psi: Op_k c_k + Om_{-k} conj(c_{-k})
    partner = np.where(pos >= 0, np.conj(c[np.maximum(pos, 0)]), 0.0)
    psi = _modes_to_grid(ctx, ctx.grid.omega_plus * c + ctx.grid.omega_minus * partner)
    phi = math.sqrt(2.0 * m.hbar / (m.mass_density * m.omega)) * psi.real
    pi = math.sqrt(2.0 * m.hbar * m.mass_density * m.omega) * psi.imag
    return LabField(phi, pi, float(t))


def hamiltonian_energy(ctx: RateContext, lab: LabField) -> float:
    """Classical field energy ``1/2 int [Pi^2/mu + mu w^2 Phi^2 + mu v^2 (dPhi/dx)^2] dx``."""
    m = ctx.model
    n = len(lab.phi)
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=m.length / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    dphi = np.fft.ifft(1j * k * np.fft.fft(lab.phi)).real
    density = lab.pi**2 / m.mass_density + m.mass_density * (
        m.omega**2 * lab.phi**2 + m.speed**2 * dphi**2
    )
    return 0.5 * float(np.sum(density)) * m.length / n


# ------------------------------------------------------------------ diffusion limit

def _time_rule(ctx: RateContext, t, nodes=8):
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    n_pan = max(1, math.ceil(t / ctx.shortest_period))
    cuts = np.linspace(0.0, t, n_pan + 1)
    half = 0.5 * np.diff(cuts)
    taus = (cuts[:-1, None] + half[:, None] * (xg + 1.0)).ravel()
    weights = (half[:, None] * wg).ravel()
    return taus, weights


def predicted_moments(ctx: RateContext, t):
    """Second moments of the accumulated kick displacement after time ``t``.

    Returns ``(P, S)`` as functions of ``r = y2 - y1`` on the grid, with
    ``P(r) = E[dl(y1) conj(dl(y2))] = 2 int (Q^{l*l} + Q^{ll*})`` and
    ``S(r) = E[dl(y1) dl(y2)] = -2 int (Q^{l*l*}(r) + Q^{l*l*}(-r))``.
    The factor 2 is ``<|xi|^2> / sigma_g^2``.
    """
    m = ctx.x_nodes
    p = np.zeros(m, dtype=complex)
    s = np.zeros(m, dtype=complex)
    if t <= 0:
        return p, s
    for tau, w in zip(*_time_rule(ctx, t)):
        q = q_coefficients(ctx, tau)
        p += w * 2.0 * (q.conj_l + q.ll_conj)
        s += -w * 2.0 * (q.conj_conj + np.roll(q.conj_conj[::-1], 1))
    return p, s


@dataclass(frozen=True)
class DiffusionReport:
    kick_scales: tuple
    cf_deviation: tuple
    moment_deviation: tuple
    probe_points: tuple
    n_traj: int

    @property
    def decreasing(self) -> bool:
        d = self.cf_deviation
        return all(b < a for a, b in zip(d[:-1], d[1:]))


def _probe_moments(p, s, idx, coef):
    """``E|Z|^2`` and ``E Z^2`` for ``Z = sum_i coef_i lambda(y_idx_i)``."""
    m = len(p)
    var = 0.0 + 0.0j
    pseudo = 0.0 + 0.0j
    for i, ci in zip(idx, coef):
        for j, cj in zip(idx, coef):
            r = (j - i) % m
            var += ci * np.conj(cj) * p[r]
            pseudo += ci * cj * s[r]
    return float(var.real), complex(pseudo)


def _cf_gap(z, var, pseudo, radii=(1.0, 2.0), n_dir=8):
    """Sup distance between the empirical and the Gaussian characteristic function."""
    cov = 0.5 * np.array([[var + pseudo.real, pseudo.imag], [pseudo.imag, var - pseudo.real]])
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, 1e-300)
    whiten = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.T
    pts = np.stack([z.real, z.imag], axis=-1)
    gap = 0.0
    for r in radii:
        for th in np.pi * np.arange(n_dir) / n_dir:
            u = whiten @ (r * np.array([math.cos(th), math.sin(th)]))
            emp = np.mean(np.exp(1j * pts @ u))
            gap = max(gap, abs(emp - math.exp(-0.5 * r * r)))
    return gap


def diffusion_check(ctx: RateContext, t, kick_scales=(1.0, 0.25, 0.0625), n_traj=20000,
                    seed=0, probe_offset=None) -> DiffusionReport:
    """Compare sampled displacements with the diffusion-limit prediction.

    Along ``sigma_g^2 -> eps sigma_g^2``, ``gamma -> gamma / eps`` the first two
    moments of the displacement are unchanged, so the ladder measures the
    remaining non-Gaussian part: the sup distance between the empirical
    characteristic function of single- and two-point probes and the Gaussian
    one with the predicted covariance. ``moment_deviation`` reports the
    largest relative mismatch of the probe variances.
    """
    m = ctx.x_nodes
    off = m // 8 if probe_offset is None else int(probe_offset)
    probes = (((0,), (1.0,)), ((0, off), (1.0, 1.0)), ((0, off), (1.0, 1.0j)))
    cf_dev, mom_dev = [], []
    zero = ClassicalField.zeros(ctx)
    for eps in kick_scales:
        noise = replace(ctx.noise, gamma=ctx.noise.gamma / eps, sigma_g_sq=ctx.noise.sigma_g_sq * eps)
        sub = RateContext.build(ctx.model, noise, x_nodes=ctx.x_nodes,
                                t_nodes_per_period=ctx.t_nodes_per_period)
        p, s = predicted_moments(sub, t)
        sample = sample_ensemble(sub, zero, t, seed, n_traj)
        fields = sample.fields(sub)
        worst_cf = 0.0
        worst_mom = 0.0
        for idx, coef in probes:
            z = sum(c * fields[:, i] for i, c in zip(idx, coef))
            var, pseudo = _probe_moments(p, s, idx, coef)
            if var == 0.0:
                worst_mom = max(worst_mom, float(np.max(np.abs(z))))
                continue
            worst_cf = max(worst_cf, _cf_gap(z, var, pseudo))
            worst_mom = max(worst_mom, abs(float(np.mean(np.abs(z) ** 2)) - var) / var)
        cf_dev.append(worst_cf)
        mom_dev.append(worst_mom)
    return DiffusionReport(tuple(kick_scales), tuple(cf_dev), tuple(mom_dev), (0, off), int(n_traj))
