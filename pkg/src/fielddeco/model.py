"""Physical parameters, mode machinery and the cat-state characteristic function.

Internal units: hbar = omega = L = 1 unless overridden. The dimensionless
inputs used throughout the CLI (gamma/omega, sigma_g^2 L, sigma_x/L, v/(L omega))
map one-to-one onto the fields below in those units.

The truncated wavenumber set is ``k_j = 2 pi j / L`` with
``j in {-n_modes/2, ..., n_modes/2 - 1}``. The unpaired ``j = -n_modes/2`` mode
is harmless as long as ``f_k`` is negligible at the cutoff.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .specfun import jacobi_theta3

__all__ = [
    "FieldModel",
    "NoiseModel",
    "ModeGrid",
    "CatStateSpec",
    "PhasePoint",
    "dispersion",
    "mode_coefficients",
    "spread_coefficient",
    "kick_pdf",
    "cat_char_fn",
    "vacuum_char_fn",
]


def _finite_positive(name, value, allow_zero=False):
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if allow_zero and value < 0.0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    if not allow_zero and value <= 0.0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    return value


@dataclass(frozen=True)
class FieldModel:
    """Parameters of the free field Hamiltonian and its mode truncation."""

    mass_density: float = 1.0
    omega: float = 1.0
    speed: float = 0.01
    length: float = 1.0
    hbar: float = 1.0
    n_modes: int = 32

    def __post_init__(self):
        for name in ("mass_density", "omega", "length", "hbar"):
            object.__setattr__(self, name, _finite_positive(name, getattr(self, name)))
        object.__setattr__(self, "speed", _finite_positive("speed", self.speed, allow_zero=True))
        n = self.n_modes
        if isinstance(n, bool) or int(n) != n or n < 2 or n % 2:
            raise ValueError(f"n_modes must be an even integer >= 2, got {n!r}")
        object.__setattr__(self, "n_modes", int(n))

    @property
    def mode_indices(self) -> np.ndarray:
        half = self.n_modes // 2
        return np.arange(-half, half)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * self.mode_indices / self.length

    @property
    def zero_mode(self) -> int:
        """Position of k = 0 in the ordered wavenumber array."""
        return self.n_modes // 2


@dataclass(frozen=True)
class NoiseModel:
    """Decoherence parameters: Poisson rate, kick width and spread width.

    ``sigma_g_sq`` is the per-quadrature variance of the complex kick, so the
    full second moment is ``<|xi|^2> = 2 sigma_g_sq``.
    """

    gamma: float = 1.0
    sigma_g_sq: float = 0.32
    sigma_x: float = 1.0
    spread: str = "theta-gaussian"
    kick: str = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "gamma", _finite_positive("gamma", self.gamma, allow_zero=True))
        object.__setattr__(self, "sigma_g_sq", _finite_positive("sigma_g_sq", self.sigma_g_sq))
        object.__setattr__(self, "sigma_x", _finite_positive("sigma_x", self.sigma_x))
        if self.spread != "theta-gaussian":
            raise ValueError(f"unsupported spread function {self.spread!r}")
        if self.kick != "gaussian":
            raise ValueError(f"unsupported kick distribution {self.kick!r}")


def dispersion(model: FieldModel, k):
    """Mode frequency ``sqrt(omega^2 + v^2 k^2)``."""
    k = np.asarray(k, dtype=float)
    return np.sqrt(model.omega**2 + (model.speed * k) ** 2)


def mode_coefficients(model: FieldModel, k):
    """Return ``(Omega_plus, Omega_minus)`` for wavenumber(s) ``k``.

    ``Omega_pm = [(w/w_k)^(1/2) +- (w_k/w)^(1/2)] / 2``; their squares differ by one.
    """
    ratio = np.sqrt(model.omega / dispersion(model, k))
    return 0.5 * (ratio + 1.0 / ratio), 0.5 * (ratio - 1.0 / ratio)


def _theta_norm(model: FieldModel, noise: NoiseModel) -> float:
    q = math.exp(-2.0 * math.pi**2 * (noise.sigma_x / model.length) ** 2)
    return jacobi_theta3(q)


def spread_coefficient(model: FieldModel, noise: NoiseModel, k):
    """Fourier coefficient f_k of the theta-normalized Gaussian spread function."""
    k = np.asarray(k, dtype=float)
    return (
        math.sqrt(model.length)
        * np.exp(-0.5 * (noise.sigma_x * k) ** 2)
        / _theta_norm(model, noise)
    )


def kick_pdf(noise: NoiseModel, xi):
    """Isotropic Gaussian kick density ``exp(-|xi|^2 / 2 s) / (2 pi s)``."""
    s = noise.sigma_g_sq
    return np.exp(-np.abs(xi) ** 2 / (2.0 * s)) / (2.0 * np.pi * s)


@dataclass(frozen=True)
class ModeGrid:
    """Per-mode quantities on the truncated wavenumber set."""

    wavenumbers: np.ndarray
    omega_k: np.ndarray
    omega_plus: np.ndarray
    omega_minus: np.ndarray
    f_k: np.ndarray

    @classmethod
    def build(cls, model: FieldModel, noise: NoiseModel) -> "ModeGrid":
        k = model.wavenumbers
        op, om = mode_coefficients(model, k)
        arrays = (k, dispersion(model, k), op, om, spread_coefficient(model, noise, k))
        for a in arrays:
            a.setflags(write=False)
        return cls(*arrays)

    @property
    def n_modes(self) -> int:
        return len(self.wavenumbers)


@dataclass(frozen=True)
class PhasePoint:
    """One complex Weyl amplitude per mode, ordered like ``ModeGrid.wavenumbers``."""

    eta: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=complex)
        if eta.ndim != 1:
            raise ValueError("PhasePoint.eta must be one-dimensional")
        eta = eta.copy()
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)

    def check(self, model: FieldModel) -> "PhasePoint":
        if len(self.eta) != model.n_modes:
            raise ValueError(
                f"PhasePoint has {len(self.eta)} amplitudes, model has {model.n_modes} modes"
            )
        return self

    @classmethod
    def single_mode(cls, model: FieldModel, eta0: complex) -> "PhasePoint":
        eta = np.zeros(model.n_modes, dtype=complex)
        eta[model.zero_mode] = eta0
        return cls(eta)


def as_eta(point) -> np.ndarray:
    """Accept a PhasePoint or an array of shape (..., n_modes)."""
    if isinstance(point, PhasePoint):
        return point.eta
    return np.asarray(point, dtype=complex)


@dataclass(frozen=True)
class CatStateSpec:
    """Normalized superposition of coherent states |alpha> + |beta> in the k = 0 mode.

    All other modes are in the vacuum.
    """

    alpha: complex
    beta: complex

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        if not all(math.isfinite(v) for v in (a.real, a.imag, b.real, b.imag)):
            raise ValueError("cat-state amplitudes must be finite")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def separation(self) -> float:
        return abs(self.alpha - self.beta)

    @property
    def phase(self) -> float:
        """``Im(alpha beta*)``."""
        return (self.alpha * self.beta.conjugate()).imag

    @property
    def overlap(self) -> complex:
        """``<alpha|beta>``."""
        a, b = self.alpha, self.beta
        return np.exp(-0.5 * abs(a) ** 2 - 0.5 * abs(b) ** 2 + a.conjugate() * b)

    def normalization(self, kind: str = "exact") -> float:
        """Density-matrix normalization so that ``rho = N (|a>+|b>)(<a|+<b|)``.

        ``kind="exact"`` uses ``1 / (2 + 2 Re<alpha|beta>)``. ``kind="double-angle"``
        uses ``cos(2 Im alpha beta*)`` in place of ``cos(Im alpha beta*)``; the
        two agree when ``Im alpha beta* = 0``, and only the exact form gives a
        unit-trace state otherwise.
        """
        e = math.exp(-0.5 * self.separation**2)
        if kind == "exact":
            return 1.0 / (2.0 + 2.0 * e * math.cos(self.phase))
        if kind == "double-angle":
            if not math.isclose(math.cos(2 * self.phase), math.cos(self.phase), abs_tol=1e-12):
                warnings.warn(
                    "double-angle normalization with Im(alpha beta*) != 0 does not give a "
                    "unit-trace state; use kind='exact'",
                    stacklevel=2,
                )
            return 1.0 / (2.0 + 2.0 * e * math.cos(2.0 * self.phase))
        raise ValueError(f"unknown normalization kind {kind!r}")

    def lobe_centers(self) -> tuple[complex, ...]:
        """Centres of the Gaussian lobes of ``|chi_0|^2`` in the eta plane."""
        d = self.alpha - self.beta
        if d == 0:
            return (0j,)
        return (0j, d, -d)


def cat_char_fn(spec: CatStateSpec, eta):
    """Characteristic function ``Tr(rho D(eta))`` of the cat state for mode 0.

    Uses ``<a|D(eta)|b> = <a|b> exp(-|eta|^2/2 + eta a* - eta* b)``.
    """
    eta = np.asarray(eta, dtype=complex)
    if not np.all(np.isfinite(eta)):
        raise ValueError("eta must be finite")
    amps = (spec.alpha, spec.beta)
    total = np.zeros_like(eta)
    base = -0.5 * np.abs(eta) ** 2
    for a in amps:
        for b in amps:
            ov = np.exp(-0.5 * abs(a) ** 2 - 0.5 * abs(b) ** 2 + a.conjugate() * b)
            total = total + ov * np.exp(base + eta * a.conjugate() - eta.conjugate() * b)
    return spec.normalization("exact") * total


def vacuum_char_fn(eta):
    return np.exp(-0.5 * np.abs(np.asarray(eta)) ** 2)
