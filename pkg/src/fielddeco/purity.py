"""Purity decay and initial decay rate: QMC estimates, closed forms and 2D oracles.

The purity integral is

    p_t = int prod_k d^2 eta_k / pi  |chi_0|^2  exp(-2 int_0^t Gamma_tau dtau).

For the cat state in mode 0 and vacuum elsewhere, ``|chi_0|^2`` factors into
``|chi_cat(eta_0)|^2`` times ``exp(-|eta_k|^2)`` for every other mode. Those
Gaussians are absorbed into the QMC point mapping. ``|chi_cat|^2`` has three
unit-width lobes, at 0 and at +-(alpha - beta). A vacuum mapping of mode 0
would miss the outer two, so mode 0 is drawn from a Gaussian mixture placed on
the lobes. A narrow component is added at the origin when late times
concentrate the integrand there. The mixture component is picked with one
extra uniform coordinate, so curves need a Faure dimension of ``2 N + 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .decoherence import QuadratureError, RateContext, exposures, gamma_broad, gamma_exact
from .model import CatStateSpec, FieldModel, NoiseModel, cat_char_fn
from .qmc import FaureConfig, QmcEstimate, _split_coordinates, faure_points, integrate_vector

__all__ = [
    "PurityCurve",
    "ModeZeroSampler",
    "faure_config_for",
    "purity_curve",
    "purity_qmc",
    "purity_oracle_2d",
    "initial_rate_oracle_2d",
    "purity_analytic_narrow",
    "purity_shorttime",
    "purity_longtime_asymptote",
    "initial_rate_qmc",
    "initial_rate_analytic",
    "r_max",
]

DEFAULT_POINTS = 2**16
# points whose quadratures are re-run at doubled resolution before a QMC run
GUARD_POINTS = 64
CORE_WEIGHT = 0.25


@dataclass(frozen=True)
class ModeZeroSampler:
    """Gaussian mixture importance density for the mode-0 amplitude.

    Component ``j`` is ``exp(-|eta - c_j|^2 / w_j^2) / (pi w_j^2)``.
    """

    centers: tuple
    weights: tuple
    widths: tuple

    def __post_init__(self):
        if not (len(self.centers) == len(self.weights) == len(self.widths)):
            raise ValueError("centers, weights and widths must have equal length")
        if not math.isclose(sum(self.weights), 1.0, rel_tol=1e-12):
            raise ValueError("mixture weights must sum to 1")
        if min(self.widths) <= 0:
            raise ValueError("widths must be positive")

    @classmethod
    def for_state(cls, state: CatStateSpec, noise: NoiseModel, model: FieldModel,
                  t_max: float = 0.0) -> "ModeZeroSampler":
        centers = list(state.lobe_centers())
        weights = [1.0] if len(centers) == 1 else [0.5, 0.25, 0.25]
        widths = [1.0] * len(centers)
        core = 1.0 / math.sqrt(1.0 + 4.0 * noise.gamma * t_max * noise.sigma_g_sq * model.length)
        if core < 0.5:
            weights = [w * (1.0 - CORE_WEIGHT) for w in weights] + [CORE_WEIGHT]
            centers.append(0j)
            widths.append(core)
        return cls(tuple(complex(c) for c in centers), tuple(weights), tuple(widths))

    def place(self, z, u_select):
        """Map a unit complex Gaussian ``z`` and a uniform selector to ``eta_0``."""
        edges = np.cumsum(self.weights)[:-1]
        comp = np.searchsorted(edges, u_select, side="right")
        centers = np.asarray(self.centers)[comp]
        widths = np.asarray(self.widths)[comp]
        return centers + widths * z

    def density(self, eta0):
        """Mixture density with respect to ``d^2 eta / pi``."""
        eta0 = np.asarray(eta0)
        out = np.zeros(eta0.shape)
        for c, p, w in zip(self.centers, self.weights, self.widths):
            out += p * np.exp(-np.abs(eta0 - c) ** 2 / w**2) / w**2
        return out


@dataclass(frozen=True)
class PurityCurve:
    gamma_t: np.ndarray
    p_qmc: list
    p_analytic: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        gt = np.asarray(self.gamma_t, dtype=float)
        if len(gt) != len(self.p_qmc):
            raise ValueError("one estimate per time is required")
        if np.any(np.diff(gt) < 0):
            raise ValueError("times must be ordered")
        for est in self.p_qmc:
            if not (0.0 < est.value <= 1.0 + 3.0 * est.error_estimate + 1e-12):
                raise ValueError(f"purity estimate {est.value} outside (0, 1]")
        object.__setattr__(self, "gamma_t", gt)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.p_qmc])

    @property
    def errors(self) -> np.ndarray:
        return np.array([e.error_estimate for e in self.p_qmc])


def faure_config_for(model: FieldModel, scramble_seed: int = 1) -> FaureConfig:
    """Faure configuration covering all modes plus the mixture selector."""
    return FaureConfig(2 * model.n_modes + 1, scramble_seed=scramble_seed)


def _check_cfg(ctx: RateContext, cfg: FaureConfig):
    if cfg.dimension < 2 * ctx.model.n_modes + 1:
        raise ValueError(
            f"Faure dimension {cfg.dimension} < 2 * n_modes + 1 = {2 * ctx.model.n_modes + 1}"
        )


def _weighted_points(state, ctx, sampler, eta, extra):
    """Move mode 0 onto the mixture and return the importance ratio per point.

    Mode 0 and the selector take the leading Faure coordinates, which are the
    most uniform at small point counts: the selector is coordinate 0 and the
    first Gaussian pair is swapped into the k = 0 slot.
    """
    eta = np.array(eta, copy=True)
    k0 = ctx.model.zero_mode
    eta[:, [0, k0]] = eta[:, [k0, 0]]
    eta[:, k0] = sampler.place(eta[:, k0], extra[:, 0])
    ratio = np.abs(cat_char_fn(state, eta[:, k0])) ** 2 / sampler.density(eta[:, k0])
    return eta, ratio


def _guard_points(state, ctx, cfg, sampler):
    n_modes = ctx.model.n_modes
    u = faure_points(cfg, 0, GUARD_POINTS)
    eta, extra = _split_coordinates(u, n_modes, leading_extra=1)
    eta, _ = _weighted_points(state, ctx, sampler, eta, extra)
    return eta


def purity_curve(state: CatStateSpec, ctx: RateContext, cfg: FaureConfig, times,
                 n_points: int = DEFAULT_POINTS, workers: int = 1,
                 with_analytic: bool = True) -> PurityCurve:
    """QMC purity at every time in ``times`` from one shared point set.

    Each point contributes a nonincreasing sequence, so the curve is
    nonincreasing in t by construction.
    """
    _check_cfg(ctx, cfg)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a non-empty 1D sequence")
    if np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("times must be non-negative and strictly increasing")
    sampler = ModeZeroSampler.for_state(state, ctx.noise, ctx.model, float(times[-1]))
    exposures(ctx, _guard_points(state, ctx, cfg, sampler), times, check=True)

    def integrand(eta, extra):
        eta, ratio = _weighted_points(state, ctx, sampler, eta, extra)
        return ratio[:, None] * np.exp(-2.0 * exposures(ctx, eta, times, check=False))

    est = integrate_vector(integrand, cfg, n_points, n_modes=ctx.model.n_modes,
                          workers=workers, leading_extra=1)
    m_sq = 4.0 * ctx.noise.gamma * times * ctx.noise.sigma_g_sq * ctx.model.length
    analytic = purity_analytic_narrow(state, m_sq) if with_analytic else None
    meta = {
        "alpha": state.alpha, "beta": state.beta, "n_points": int(n_points),
        "faure_base": cfg.base, "scramble_seed": cfg.scramble_seed, "skip": cfg.skip,
        "x_nodes": ctx.x_nodes, "t_nodes_per_period": ctx.t_nodes_per_period,
        "sampler": sampler,
    }
    return PurityCurve(ctx.noise.gamma * times, est, analytic, meta)


def purity_qmc(state: CatStateSpec, ctx: RateContext, cfg: FaureConfig, t,
               n_points: int = DEFAULT_POINTS, workers: int = 1) -> QmcEstimate:
    return purity_curve(state, ctx, cfg, [t], n_points, workers, with_analytic=False).p_qmc[0]


def initial_rate_qmc(state: CatStateSpec, ctx: RateContext, cfg: FaureConfig,
                     n_points: int = DEFAULT_POINTS, workers: int = 1) -> QmcEstimate:
    """QMC estimate of ``R_0 = 2 int |chi_0|^2 Gamma_0``."""
    _check_cfg(ctx, cfg)
    sampler = ModeZeroSampler.for_state(state, ctx.noise, ctx.model)
    gamma_exact(ctx, _guard_points(state, ctx, cfg, sampler), 0.0, check=True)

    def integrand(eta, extra):
        eta, ratio = _weighted_points(state, ctx, sampler, eta, extra)
        return (2.0 * ratio * gamma_exact(ctx, eta, 0.0, check=False))[:, None]

    return integrate_vector(integrand, cfg, n_points, n_modes=ctx.model.n_modes,
                          workers=workers, leading_extra=1)[0]


# ---------------------------------------------------------------- 2D oracles

_RING_START = 64
_RING_MAX = 2**14


def _ring_mean(state, r):
    """Angular mean of |chi_cat|^2 on the circle |eta| = r (periodic trapezoid)."""
    n = _RING_START
    prev = None
    while n <= _RING_MAX:
        theta = 2.0 * np.pi * np.arange(n) / n
        val = float(np.mean(np.abs(cat_char_fn(state, r * np.exp(1j * theta))) ** 2))
        if prev is not None and abs(val - prev) <= 1e-14 + 1e-12 * abs(val):
            return val
        prev = val
        n *= 2
    raise QuadratureError(f"angular quadrature did not converge at r = {r}")


def _disk_integral(state: CatStateSpec, radial_weight, breaks, tol=1e-6):
    """``int d^2 eta / pi |chi_cat|^2 w(|eta|)`` over the disk of the oracle radius."""
    from scipy import integrate

    radius = max(8.0, abs(state.alpha) + abs(state.beta) + 6.0)
    pts = sorted({0.0, radius, *(b for b in breaks if 0.0 < b < radius)})
    total = 0.0
    err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for lo, hi in zip(pts[:-1], pts[1:]):
            try:
                val, e = integrate.quad(
                    lambda r: 2.0 * r * _ring_mean(state, r) * radial_weight(r),
                    lo, hi, epsabs=0.1 * tol / len(pts), epsrel=1e-10, limit=200,
                )
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(f"radial quadrature failed on [{lo}, {hi}]: {exc}") from exc
            total += val
            err += e
    if err > tol:
        raise QuadratureError(f"radial quadrature error {err:.2e} exceeds {tol:.0e}")
    return total


def _oracle_breaks(state, noise, model, t):
    core = 1.0 / math.sqrt(1.0 + 4.0 * noise.gamma * t * noise.sigma_g_sq * model.length)
    d = state.separation
    return [core, 3 * core, 10 * core, d - 4.0, d, d + 4.0, 1.0 / math.sqrt(noise.sigma_g_sq * model.length)]


def purity_oracle_2d(state: CatStateSpec, noise: NoiseModel, model: FieldModel, t) -> float:
    """Broad-spread purity by direct 2D quadrature (absolute error target 1e-6)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if noise.gamma == 0.0 or t == 0.0:
        weight = lambda r: 1.0  # noqa: E731
    else:
        weight = lambda r: math.exp(-2.0 * t * float(gamma_broad(noise, model, r)))  # noqa: E731
    return _disk_integral(state, weight, _oracle_breaks(state, noise, model, t))


def initial_rate_oracle_2d(state: CatStateSpec, noise: NoiseModel, model: FieldModel) -> float:
    """Broad-spread ``R_0 = 2 int |chi|^2 Gamma_broad`` by direct 2D quadrature."""
    if noise.gamma == 0.0:
        return 0.0
    weight = lambda r: 2.0 * float(gamma_broad(noise, model, r))  # noqa: E731
    return _disk_integral(state, weight, _oracle_breaks(state, noise, model, 0.0))


# ---------------------------------------------------------------- closed forms

def purity_analytic_narrow(state: CatStateSpec, m_sq, normalization: str = "exact"):
    """Closed-form purity for Gaussian suppression ``exp(-m^2 |eta|^2)``.

    ``(2 N^2 / (1 + m^2)) [1 + e^{-d^2/(1+m^2)} + 4 e^{-d^2/2} cos(th)
    + e^{-d^2 m^2/(1+m^2)} + e^{-d^2} cos(2 th)]`` with ``d = |alpha - beta|``
    and ``th = Im(alpha beta*)``. With ``m^2 = 4 gamma t sigma_g^2 L`` it is the
    narrow-kick purity; with ``m^2 = 2 sigma_g^2 L`` it gives ``R_0``.
    ``normalization`` is passed to :meth:`CatStateSpec.normalization`.
    """
    m_sq = np.asarray(m_sq, dtype=float)
    if np.any(m_sq < 0):
        raise ValueError("m_sq must be non-negative")
    norm = state.normalization(normalization)
    d2 = state.separation**2
    th = state.phase
    one = 1.0 + m_sq
    bracket = (
        1.0
        + np.exp(-d2 / one)
        + 4.0 * math.exp(-0.5 * d2) * math.cos(th)
        + np.exp(-d2 * m_sq / one)
        + math.exp(-d2) * math.cos(2.0 * th)
    )
    out = 2.0 * norm**2 / one * bracket
    return float(out) if out.ndim == 0 else out


def purity_shorttime(noise: NoiseModel, t):
    """Short-time broad-spread behaviour ``exp(-2 gamma t)``."""
    return np.exp(-2.0 * noise.gamma * np.asarray(t, dtype=float))


def purity_longtime_asymptote(noise: NoiseModel, model: FieldModel, t):
    """Laplace-method asymptote ``1 / (4 gamma t L sigma_g^2)``."""
    gt = noise.gamma * np.asarray(t, dtype=float)
    if np.any(gt <= 0):
        raise ValueError("gamma * t must be positive")
    out = 1.0 / (4.0 * gt * model.length * noise.sigma_g_sq)
    return float(out) if out.ndim == 0 else out


def initial_rate_analytic(state: CatStateSpec, noise: NoiseModel, model: FieldModel,
                          normalization: str = "exact") -> float:
    """``R_0 = 2 gamma - 2 gamma E`` with ``E`` the closed form at ``m^2 = 2 sigma_g^2 L``."""
    e = purity_analytic_narrow(state, 2.0 * noise.sigma_g_sq * model.length, normalization)
    return 2.0 * noise.gamma * (1.0 - e)


def r_max(noise: NoiseModel, model: FieldModel) -> float:
    """Large-separation limit ``gamma (2 - 1 / (1 + 2 sigma_g^2 L))``."""
    return noise.gamma * (2.0 - 1.0 / (1.0 + 2.0 * noise.sigma_g_sq * model.length))
