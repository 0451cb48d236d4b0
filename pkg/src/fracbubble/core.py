"""Problem parameters, bubble profiles, and polygonal tower geometry.

The basic objects are the standard bubble

    U_{x,lam}(y) = C(N, s) * (lam / (1 + lam^2 |y - x|^2))^((N - 2s)/2),

which solves the critical fractional equation (-Delta)^s U = U^((N+2s)/(N-2s)),
and the m-bubble tower obtained by placing copies of it on the vertices of a
regular m-gon of radius rbar in the first two coordinates, all sharing the
offset ybar in the remaining N-2 coordinates and a common scale lam.

All evaluation routines are vectorized: points may be passed as a single
vector of length N or as an array of shape (..., N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn


class AdmissibilityError(ValueError):
    """Raised when (N, s) lies outside the admissible parameter window."""


class EpsilonTooLargeError(ValueError):
    """Raised when eps is too large for the bubble-count formula (m = 0)."""


class NumericsError(RuntimeError):
    """A numerical procedure failed to converge or lost accuracy."""


class NoRootError(NumericsError):
    """A root finder failed to locate a zero."""


class WindowError(NoRootError):
    """The closed-form root lies outside the requested search box."""


def admissible_s_window(N: int) -> tuple[float, float]:
    """Open interval (s_min, 1) of admissible fractional orders for dimension N.

    The lower endpoint is

        s_min = max{ (N + 1 - sqrt(N^2 - 2N + 9)) / 4,
                     (3 - sqrt(N^2 - 6N + 13)) / 2 }.

    The first branch is equivalent to tau < 2s, the second to
    N > 4 + 2 tau - 2s, with tau = (N - 2s - 2)/(N - 2s).
    """
    if int(N) != N or N < 4:
        raise ValueError(f"dimension must be an integer >= 4, got {N}")
    N = int(N)
    s1 = (N + 1 - math.sqrt(N * N - 2 * N + 9)) / 4
    s2 = (3 - math.sqrt(N * N - 6 * N + 13)) / 2
    return (max(s1, s2), 1.0)


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, fractional order and perturbation of the critical equation.

    The nonlinearity is u^(2*_s - 1 + exponent_sign * eps) with
    2*_s = 2N/(N - 2s).  Only exponent_sign = +1 is analyzed in depth;
    -1 is accepted everywhere the exponent appears.
    """

    N: int
    s: float
    eps: float = 0.0
    exponent_sign: int = 1

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4:
            raise ValueError(f"N must be an integer >= 4, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if not (0.0 < self.s < 1.0):
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if self.eps < 0.0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if self.exponent_sign not in (1, -1):
            raise ValueError(f"exponent_sign must be +1 or -1, got {self.exponent_sign}")

    @property
    def two_star(self) -> float:
        """Critical Sobolev exponent 2N/(N - 2s)."""
        return 2.0 * self.N / (self.N - 2.0 * self.s)

    @property
    def tau(self) -> float:
        """Decay-weight exponent (N - 2s - 2)/(N - 2s) of the adapted norms."""
        return (self.N - 2.0 * self.s - 2.0) / (self.N - 2.0 * self.s)

    @property
    def p_eps(self) -> float:
        """Perturbed nonlinearity exponent 2*_s - 1 + sign * eps."""
        return self.two_star - 1.0 + self.exponent_sign * self.eps

    @property
    def admissible(self) -> bool:
        lo, hi = admissible_s_window(self.N)
        return lo < self.s < hi

    def require_admissible(self):
        if not self.admissible:
            lo, _ = admissible_s_window(self.N)
            raise AdmissibilityError(
                f"(N, s) = ({self.N}, {self.s}) outside admissible window ({lo:.6f}, 1)"
            )


def bubble_constant(N: int, s: float) -> float:
    """Normalization C(N, s) = (4^s gamma)^((N-2s)/(4s)) of the standard bubble.

    Here gamma = Gamma((N+2s)/2)/Gamma((N-2s)/2).  With this constant the
    bubble solves (-Delta)^s U = U^((N+2s)/(N-2s)) exactly.
    """
    ProblemParams(N, s).require_admissible()
    g = gamma_fn((N + 2.0 * s) / 2.0) / gamma_fn((N - 2.0 * s) / 2.0)
    return float((4.0 ** s * g) ** ((N - 2.0 * s) / (4.0 * s)))


def _as_points(y, N: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape == () or y.shape[-1] != N:
        raise ValueError(f"expected points with last axis of length {N}, got shape {y.shape}")
    return y


@dataclass(frozen=True, eq=False)
class Bubble:
    """A single bubble: center x in R^N and scale lam > 0."""

    center: np.ndarray
    lam: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if c.ndim != 1:
            raise ValueError("bubble center must be a 1-d vector")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.lam > 0:
            raise ValueError(f"bubble scale must be positive, got {self.lam}")

    @property
    def N(self) -> int:
        return self.center.shape[0]


def bubble_value(p: ProblemParams, b: Bubble, y) -> np.ndarray | float:
    """Evaluate U_{x,lam} at y (vectorized over leading axes of y)."""
    p.require_admissible()
    y = _as_points(y, p.N)
    C = bubble_constant(p.N, p.s)
    rho2 = np.sum((y - b.center) ** 2, axis=-1)
    g = b.lam / (1.0 + b.lam ** 2 * rho2)
    out = C * g ** ((p.N - 2.0 * p.s) / 2.0)
    return out if out.shape else float(out)


@dataclass(frozen=True, eq=False)
class TowerConfig:
    """m bubbles on a regular polygon: ring radius rbar, offset ybar, scale lam.

    Center j (1-based) sits at
        x_j = (rbar cos(2(j-1)pi/m), rbar sin(2(j-1)pi/m), ybar).
    """

    m: int
    rbar: float
    ybar: np.ndarray
    lam: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"bubble count m must be an integer >= 1, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        if not self.rbar > 0:
            raise ValueError(f"ring radius must be positive, got {self.rbar}")
        if not self.lam > 0:
            raise ValueError(f"scale must be positive, got {self.lam}")
        yb = np.atleast_1d(np.asarray(self.ybar, dtype=float))
        if yb.ndim != 1:
            raise ValueError("ybar must be a 1-d vector")
        yb.setflags(write=False)
        object.__setattr__(self, "ybar", yb)

    @property
    def N(self) -> int:
        return self.ybar.shape[0] + 2

    def min_spacing(self) -> float:
        """Minimum pairwise center distance, 2 rbar sin(pi/m) for m >= 2."""
        if self.m == 1:
            return math.inf
        return 2.0 * self.rbar * math.sin(math.pi / self.m)


def tower_centers(cfg: TowerConfig) -> np.ndarray:
    """Array of shape (m, N) with the polygon centers x_1..x_m."""
    angles = 2.0 * np.pi * np.arange(cfg.m) / cfg.m
    xs = np.zeros((cfg.m, cfg.N))
    xs[:, 0] = cfg.rbar * np.cos(angles)
    xs[:, 1] = cfg.rbar * np.sin(angles)
    xs[:, 2:] = cfg.ybar
    return xs


def _tower_geometry(p: ProblemParams, cfg: TowerConfig, y):
    """Shared plumbing: squared distances (..., m) from y to every center."""
    if cfg.N != p.N:
        raise ValueError(f"tower dimension {cfg.N} does not match params N={p.N}")
    y = _as_points(y, p.N)
    xs = tower_centers(cfg)
    diff = y[..., None, :] - xs  # (..., m, N)
    rho2 = np.sum(diff ** 2, axis=-1)
    return y, xs, diff, rho2


def tower_value(p: ProblemParams, cfg: TowerConfig, y) -> np.ndarray | float:
    """Tower Z(y) = sum_j U_{x_j,lam}(y)."""
    p.require_admissible()
    _, _, _, rho2 = _tower_geometry(p, cfg, y)
    C = bubble_constant(p.N, p.s)
    nu = (p.N - 2.0 * p.s) / 2.0
    g = cfg.lam / (1.0 + cfg.lam ** 2 * rho2)
    out = C * np.sum(g ** nu, axis=-1)
    return out if out.shape else float(out)


def direction_weight(l: int) -> int:
    """Scale weight n_l of derivative direction l: n_1 = -1, n_l = +1 otherwise."""
    if l < 1:
        raise IndexError(f"direction index must be >= 1, got {l}")
    return -1 if l == 1 else 1


def z_derivative(p: ProblemParams, cfg: TowerConfig, j: int, l: int, y) -> np.ndarray | float:
    """Analytic partial derivative Z_{j,l} of the j-th bubble in the tower.

    Directions follow the reduction bookkeeping: l = 1 differentiates in the
    scale lam, l = 2 in the ring radius rbar (chain rule through x_j), and
    l = 3..N in the offset components ybar_l.  Indices j and l are 1-based.
    """
    p.require_admissible()
    if not 1 <= j <= cfg.m:
        raise IndexError(f"bubble index j={j} outside 1..{cfg.m}")
    if not 1 <= l <= p.N:
        raise IndexError(f"direction index l={l} outside 1..{p.N}")
    y, xs, diff, rho2 = _tower_geometry(p, cfg, y)
    C = bubble_constant(p.N, p.s)
    nu = (p.N - 2.0 * p.s) / 2.0
    lam = cfg.lam
    jj = j - 1
    r2 = rho2[..., jj]
    denom = 1.0 + lam ** 2 * r2
    U = C * (lam / denom) ** nu
    if l == 1:
        out = U * nu * (1.0 - lam ** 2 * r2) / (lam * denom)
    elif l == 2:
        theta = 2.0 * np.pi * jj / cfg.m
        proj = diff[..., jj, 0] * math.cos(theta) + diff[..., jj, 1] * math.sin(theta)
        out = U * 2.0 * nu * lam ** 2 * proj / denom
    else:
        out = U * 2.0 * nu * lam ** 2 * diff[..., jj, l - 1] / denom
    return out if np.shape(out) else float(out)


def tower_gradient(p: ProblemParams, cfg: TowerConfig, y) -> np.ndarray:
    """Spatial gradient of the tower, shape (..., N)."""
    p.require_admissible()
    _, _, diff, rho2 = _tower_geometry(p, cfg, y)
    C = bubble_constant(p.N, p.s)
    nu = (p.N - 2.0 * p.s) / 2.0
    lam = cfg.lam
    denom = 1.0 + lam ** 2 * rho2
    U = C * (lam / denom) ** nu
    coef = -2.0 * nu * lam ** 2 * U / denom  # dU/dy = coef * (y - x_j)
    return np.sum(coef[..., None] * diff, axis=-2)


@dataclass(frozen=True)
class TowerSymmetry:
    """Rotation/reflection generators of the symmetry class of the tower."""

    m: int

    def rotate(self, y: np.ndarray) -> np.ndarray:
        """Rotate by 2 pi / m in the (y1, y2) plane."""
        a = 2.0 * math.pi / self.m
        out = np.array(y, dtype=float, copy=True)
        y1, y2 = out[..., 0].copy(), out[..., 1].copy()
        out[..., 0] = math.cos(a) * y1 - math.sin(a) * y2
        out[..., 1] = math.sin(a) * y1 + math.cos(a) * y2
        return out

    def reflect(self, y: np.ndarray) -> np.ndarray:
        """Reflect y2 -> -y2."""
        out = np.array(y, dtype=float, copy=True)
        out[..., 1] = -out[..., 1]
        return out
