"""Confidence distributions, their combination, and fiducial inference."""

from __future__ import annotations

__version__ = "0.1.0"

from .cdcore import (  # noqa: F401
    CD,
    CInterval,
    GridCurve,
    cd_from_draws,
    cd_quantile,
    confidence_curve,
    interval,
    level_set,
    p_value_one_sided,
    p_value_two_sided,
    point_estimate,
    stochastic_dominance_check,
)
from .errors import ConfDistError  # noqa: F401
from .numeric import Dist, RngStream  # noqa: F401
