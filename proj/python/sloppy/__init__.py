"""Python front end for the sloppy toolkit."""

from ._sloppy import (
    SloppyError,
    __version__,
    axis_similarity,
    eigendecompose,
    explore,
    fisher,
    marchenko_pastur_support,
    spectrum,
    step_distance,
    stiffness_scale,
    validate,
    wishart,
    wishart_null,
)

__all__ = [
    "SloppyError",
    "__version__",
    "axis_similarity",
    "eigendecompose",
    "explore",
    "fisher",
    "marchenko_pastur_support",
    "spectrum",
    "step_distance",
    "stiffness_scale",
    "validate",
    "wishart",
    "wishart_null",
]
