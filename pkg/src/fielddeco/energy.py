"""State-independent heating rate of the field energy."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import FieldModel, ModeGrid, NoiseModel

__all__ = [
    "TruncationWarning",
    "HeatingReport",
    "kick_moment",
    "heating_rate_sum",
    "heating_rate_closed",
    "heating_report",
]

TRUNCATION_LIMIT = 1e-8


class TruncationWarning(UserWarning):
    """The outermost retained mode still carries a noticeable share of a mode sum."""


@dataclass(frozen=True)
class HeatingReport:
    rate_sum: float
    rate_closed: float
    relative_gap: float

    def __post_init__(self):
        if self.rate_sum < 0 or self.rate_closed < 0:
            raise ValueError("heating rates must be non-negative")


def kick_moment(noise: NoiseModel, omega_plus, omega_minus):
    """``int d^2 xi g(xi) |xi Op - xi* Om|^2`` for the Gaussian kick.

    With ``<|xi|^2> = 2 sigma_g^2`` and ``<xi^2> = 0`` this is
    ``2 sigma_g^2 (Op^2 + Om^2)``.
    """
    return 2.0 * noise.sigma_g_sq * (np.square(omega_plus) + np.square(omega_minus))


def heating_rate_sum(model: FieldModel, noise: NoiseModel, grid: ModeGrid | None = None) -> float:
    """Mode sum ``gamma sum_k hbar w_k |f_k|^2 <|xi Op_k - xi* Om_k|^2>``.

    Warns with TruncationWarning when the outermost mode contributes more than
    1e-8 of the total.
    """
    if grid is None:
        grid = ModeGrid.build(model, noise)
    terms = (
        noise.gamma * model.hbar * grid.omega_k * np.abs(grid.f_k) ** 2
        * kick_moment(noise, grid.omega_plus, grid.omega_minus)
    )
    # ordered summation: outermost modes first, so the result is reproducible
    order = np.argsort(-np.abs(grid.wavenumbers), kind="stable")
    total = float(math.fsum(terms[order]))
    if total > 0:
        edge = np.abs(grid.wavenumbers) == np.max(np.abs(grid.wavenumbers))
        if float(np.max(terms[edge])) > TRUNCATION_LIMIT * total:
            warnings.warn(
                f"mode sum truncated: outermost mode contributes "
                f"{float(np.max(terms[edge])) / total:.2e} of the total",
                TruncationWarning,
                stacklevel=2,
            )
    return total


def heating_rate_closed(model: FieldModel, noise: NoiseModel) -> float:
    """Large-L limit ``2 sqrt(pi) gamma hbar w sigma_x sigma_g^2 (1 + v^2/(2 sigma_x w)^2)``."""
    if noise.spread != "theta-gaussian" or noise.kick != "gaussian":
        raise ValueError("closed form only holds for the Gaussian kick and theta-Gaussian spread")
    return (
        2.0 * math.sqrt(math.pi) * noise.gamma * model.hbar * model.omega
        * noise.sigma_x * noise.sigma_g_sq
        * (1.0 + model.speed**2 / (2.0 * noise.sigma_x * model.omega) ** 2)
    )


def heating_report(model: FieldModel, noise: NoiseModel, grid: ModeGrid | None = None) -> HeatingReport:
    exact = heating_rate_sum(model, noise, grid)
    closed = heating_rate_closed(model, noise)
    gap = abs(exact - closed) / closed if closed > 0 else 0.0
    return HeatingReport(exact, closed, gap)
