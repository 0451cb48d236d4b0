"""Multi-bubble tower numerics for weighted critical fractional Laplacian equations."""

from .core import (
    AdmissibilityError,
    Bubble,
    EpsilonTooLargeError,
    NoRootError,
    NumericsError,
    ProblemParams,
    TowerConfig,
    WindowError,
    admissible_s_window,
    bubble_constant,
    bubble_value,
    direction_weight,
    tower_centers,
    tower_gradient,
    tower_value,
    z_derivative,
)

__version__ = "0.1.0"
