"""Mode-space decoherence rate, its broad-spread limit and its time integral.

The rate at phase point ``{eta_k}`` and time ``t`` is

    Gamma_t = gamma - gamma * mean_x  ghat(s_t(x)),
    s_t(x)  = 2 | sum_k Op_k f_k e^{ikx} e^{i w_k t} eta_k
                  + Om_k f_k* e^{-ikx} e^{-i w_k t} eta_k* |,

with ``ghat`` the Hankel transform of the kick pdf. The x-average uses the
trapezoidal rule on the periodic grid ``x_m = m L / M``, which is exact for
the band-limited ``s_t^2`` once ``M`` exceeds twice the largest mode index.
``s_t`` itself is obtained from one inverse FFT per point and time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import FieldModel, ModeGrid, NoiseModel, as_eta
from .specfun import gaussian_hankel

__all__ = [
    "QuadratureError",
    "RateContext",
    "s_arg",
    "s_profile",
    "gamma_exact",
    "gamma_broad",
    "gamma_time_integral",
    "exposures",
    "time_panels",
]


class QuadratureError(RuntimeError):
    """A quadrature failed its doubling convergence check."""


@dataclass(frozen=True)
class RateContext:
    model: FieldModel
    noise: NoiseModel
    grid: ModeGrid
    x_nodes: int
    t_nodes_per_period: int = 8
    x_tol: float = 1e-6
    t_tol: float = 1e-5

    def __post_init__(self):
        if self.grid.n_modes != self.model.n_modes:
            raise ValueError("grid does not match model")
        if self.x_nodes < 4 * self.model.n_modes:
            raise ValueError(f"x_nodes must be >= 4 * n_modes = {4 * self.model.n_modes}")
        if self.t_nodes_per_period < 8:
            raise ValueError("t_nodes_per_period must be >= 8")

    @classmethod
    def build(cls, model: FieldModel, noise: NoiseModel, x_nodes=None,
              t_nodes_per_period=8, **kw) -> "RateContext":
        if x_nodes is None:
            x_nodes = max(256, 8 * model.n_modes)
        return cls(model, noise, ModeGrid.build(model, noise), int(x_nodes),
                   int(t_nodes_per_period), **kw)

    @property
    def x_grid(self) -> np.ndarray:
        return self.model.length * np.arange(self.x_nodes) / self.x_nodes

    @property
    def shortest_period(self) -> float:
        return 2.0 * math.pi / float(np.max(self.grid.omega_k))


def _mode_terms(ctx: RateContext, eta, t):
    g = ctx.grid
    phase = np.exp(1j * g.omega_k * t)
    a = g.omega_plus * g.f_k * phase * eta
    b = g.omega_minus * np.conj(g.f_k) * np.conj(phase) * np.conj(eta)
    return a, b


def s_arg(ctx: RateContext, point, t, x):
    """Hankel argument ``s_t(x)`` by direct summation (any real ``x``)."""
    eta = as_eta(point)
    a, b = _mode_terms(ctx, eta, t)
    x = np.asarray(x, dtype=float)
    kx = np.multiply.outer(x, ctx.grid.wavenumbers)
    # (..., N) against x of shape (X,) -> (..., X)
    phase = np.exp(1j * np.atleast_1d(kx)).reshape(-1, len(ctx.grid.wavenumbers)).T
    total = a @ phase + b @ np.conj(phase)
    return 2.0 * np.abs(total).reshape(eta.shape[:-1] + np.shape(x))


def s_profile(ctx: RateContext, eta, t, x_nodes=None):
    """``s_t`` on the periodic grid, shape (..., x_nodes), via inverse FFT."""
    m = ctx.x_nodes if x_nodes is None else int(x_nodes)
    eta = as_eta(eta)
    a, b = _mode_terms(ctx, eta, t)
    j = ctx.model.mode_indices
    coeff = np.zeros(eta.shape[:-1] + (m,), dtype=complex)
    coeff[..., j % m] += a
    coeff[..., (-j) % m] += b
    return 2.0 * m * np.abs(np.fft.ifft(coeff, axis=-1))


def _gamma_on_grid(ctx, eta, t, x_nodes=None):
    s = s_profile(ctx, eta, t, x_nodes)
    return ctx.noise.gamma * (1.0 - gaussian_hankel(ctx.noise, s).mean(axis=-1))


def gamma_exact(ctx: RateContext, point, t, check=True):
    """Decoherence rate Gamma_t at a phase point (or batch of points).

    With ``check`` the x-quadrature is repeated on a doubled grid and a
    QuadratureError is raised if the two differ by more than ``x_tol * gamma``.
    """
    eta = as_eta(point)
    if ctx.noise.gamma == 0.0:
        return np.zeros(eta.shape[:-1]) if eta.ndim > 1 else 0.0
    val = _gamma_on_grid(ctx, eta, t)
    if check:
        fine = _gamma_on_grid(ctx, eta, t, 2 * ctx.x_nodes)
        gap = float(np.max(np.abs(fine - val)))
        if gap > ctx.x_tol * ctx.noise.gamma:
            raise QuadratureError(
                f"x-quadrature not converged: doubling x_nodes changed Gamma by {gap:.3e}"
            )
    return float(val) if eta.ndim == 1 else val


def gamma_broad(noise: NoiseModel, model: FieldModel, eta0):
    """Broad-spread rate ``gamma (1 - exp(-2 L sigma_g^2 |eta_0|^2))``."""
    return noise.gamma * -np.expm1(-2.0 * model.length * noise.sigma_g_sq * np.abs(eta0) ** 2)


def time_panels(ctx: RateContext, times, nodes_per_panel=None):
    """Composite Gauss-Legendre rule on [0, max(times)].

    Breakpoints are placed at every requested time. Panels are no longer than
    the shortest mode period. Returns ``(nodes, weights, owner)``, where
    ``owner[i]`` indexes the interval ending at ``sorted(times)[owner[i]]``.
    """
    n = ctx.t_nodes_per_period if nodes_per_panel is None else int(nodes_per_panel)
    xg, wg = np.polynomial.legendre.leggauss(n)
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    edges = np.concatenate([[0.0], np.sort(times)])
    period = ctx.shortest_period
    nodes, weights, owner = [], [], []
    for i in range(len(edges) - 1):
        lo, hi = edges[i], edges[i + 1]
        if hi <= lo:
            continue
        n_pan = max(1, math.ceil((hi - lo) / period - 1e-12))
        cuts = np.linspace(lo, hi, n_pan + 1)
        for p0, p1 in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (p1 - p0)
            nodes.append(p0 + half * (xg + 1.0))
            weights.append(half * wg)
            owner.append(np.full(n, i))
    if not nodes:
        return np.empty(0), np.empty(0), np.empty(0, dtype=int)
    return np.concatenate(nodes), np.concatenate(weights), np.concatenate(owner)


def _exposure_sweep(ctx, eta, times, nodes_per_panel=None):
    order = np.argsort(times, kind="stable")
    sorted_t = np.asarray(times, dtype=float)[order]
    nodes, weights, owner = time_panels(ctx, sorted_t, nodes_per_panel)
    per_interval = np.zeros(eta.shape[:-1] + (len(sorted_t),))
    for tau, w, i in zip(nodes, weights, owner):
        per_interval[..., i] += w * _gamma_on_grid(ctx, eta, tau)
    cum = np.cumsum(per_interval, axis=-1)
    out = np.empty_like(cum)
    out[..., order] = cum
    return out


def exposures(ctx: RateContext, point, times, check=True):
    """``int_0^t Gamma_tau dtau`` for every ``t`` in ``times``; shape (..., len(times)).

    With ``check`` the rule is repeated with twice the nodes per panel, and a
    QuadratureError is raised when the change exceeds ``t_tol * gamma * t``.
    """
    eta = as_eta(point)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if ctx.noise.gamma == 0.0:
        return np.zeros(eta.shape[:-1] + times.shape)
    val = _exposure_sweep(ctx, eta, times)
    if check:
        fine = _exposure_sweep(ctx, eta, times, 2 * ctx.t_nodes_per_period)
        tol = ctx.t_tol * ctx.noise.gamma * np.maximum(times, 1e-300)
        gap = np.abs(fine - val)
        if np.any(gap > tol):
            raise QuadratureError(
                f"time quadrature not converged: max change {float(gap.max()):.3e}"
            )
    return val


def gamma_time_integral(ctx: RateContext, point, t, check=True):
    """Exposure ``int_0^t Gamma_tau dtau`` at a single time."""
    out = exposures(ctx, point, [t], check=check)[..., 0]
    return float(out) if np.ndim(out) == 0 else out
