"""Decoherence of a one-dimensional bosonic field under random phase-space kicks."""

__version__ = "0.1.0"

from .model import CatStateSpec, FieldModel, ModeGrid, NoiseModel, PhasePoint, cat_char_fn  # noqa: E402
from .decoherence import RateContext, gamma_broad, gamma_exact  # noqa: E402
from .qmc import FaureConfig, QmcEstimate, integrate  # noqa: E402
from .purity import (  # noqa: E402
    initial_rate_analytic,
    initial_rate_qmc,
    purity_analytic_narrow,
    purity_curve,
    purity_oracle_2d,
    purity_qmc,
    r_max,
)
from .energy import heating_rate_closed, heating_rate_sum  # noqa: E402
