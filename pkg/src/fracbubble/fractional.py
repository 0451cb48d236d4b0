"""Fractional Laplacian quadrature and the weighted half-space extension.

Two independent evaluation routes are provided for (-Delta)^s:

* a singular-integral quadrature of the symmetrized second-difference form

      (-Delta)^s f(y) = (c(N,s)/2) \\int (2 f(y) - f(y+z) - f(y-z)) |z|^{-N-2s} dz,

  which removes the principal value entirely (the symmetrized integrand is
  O(r^{1-2s}) near the origin and Gauss-Jacobi nodes absorb that weight), and

* the half-space extension u~(y,t) = P_s[u] with Poisson kernel
  P_s(y,t) = beta(N,s) t^{2s} (|y|^2 + t^2)^{-(N+2s)/2}, whose weighted
  Neumann trace -d_s t^{1-2s} d_t u~ recovers (-Delta)^s u as t -> 0.

The operator constant is c(N,s) = 4^s Gamma(N/2+s) / (pi^{N/2} |Gamma(-s)|),
the unique positive normalization under which the standard bubble satisfies
(-Delta)^s U = U^{(N+2s)/(N-2s)} exactly; beta(N,s) is computed numerically by
normalizing the kernel mass to 1 at t = 1.

Functions evaluated under quadrature must accept point arrays of shape
(..., N), as the routines batch all kernel evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma as gamma_fn
from scipy.special import roots_jacobi

from .core import Bubble, NumericsError, ProblemParams, bubble_value

_MAX_BATCH = 2_500_000


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts and panel radii for the singular-integral rules.

    radial_nodes is the per-panel Gauss count, angular_nodes the per-angle
    count of the product sphere rule.  The radial axis splits at inner_split
    (below it the symmetrized integrand is handled by a Jacobi rule) and is
    truncated at truncation_radius, beyond which an analytic power-law tail
    of order tail_order (0 or 1) is added.
    """

    radial_nodes: int = 16
    angular_nodes: int = 6
    truncation_radius: float = 1e3
    inner_split: float = 0.5
    tail_order: int = 1

    def __post_init__(self):
        if self.radial_nodes < 4 or self.angular_nodes < 4:
            raise ValueError("node counts must be >= 4")
        if not 0.0 < self.inner_split < self.truncation_radius:
            raise ValueError("need 0 < inner_split < truncation_radius")
        if self.tail_order not in (0, 1):
            raise ValueError("tail_order must be 0 or 1")

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return QuadratureSpec(
            self.radial_nodes * factor,
            self.angular_nodes * factor,
            self.truncation_radius,
            self.inner_split,
            self.tail_order,
        )


# ---------------------------------------------------------------------------
# Quadrature primitives
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _gauss(n: int):
    x, w = leggauss(n)
    return x, w


def gauss_panels(edges, n: int):
    """Composite Gauss-Legendre nodes/weights on consecutive panels."""
    edges = np.asarray(edges, dtype=float)
    x, w = _gauss(n)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * w).ravel()
    return nodes, weights


@lru_cache(maxsize=128)
def _jacobi01(n: int, alpha: float, beta: float):
    """Nodes/weights for int_0^1 (1-u)^alpha u^beta f(u) du."""
    x, w = roots_jacobi(n, alpha, beta)
    u = 0.5 * (x + 1.0)
    return u, w / 2.0 ** (alpha + beta + 1.0)


def geometric_edges(a: float, b: float, ratio: float = 2.5) -> np.ndarray:
    """Panel edges from a to b growing geometrically (a > 0)."""
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    count = max(1, math.ceil(math.log(b / a) / math.log(ratio)))
    return np.geomspace(a, b, count + 1)


@lru_cache(maxsize=32)
def unit_sphere_rule(N: int, n_polar: int, n_azimuth: int = 0):
    """Product quadrature on S^{N-1}: directions (M, N) and weights (M,).

    Polar angles use Gauss-Jacobi in cos(theta) (weight (1-x^2)^{(N-3)/2} for
    the outermost angle, decreasing by one per level), the azimuth a uniform
    periodic rule.  Weights sum to the sphere area.  The returned node set is
    stored in antipodal-pair layout, dirs[M/2:] = -dirs[:M/2] bitwise with
    matching weights, so symmetrized differences cancel analytically.
    """
    if n_azimuth <= 0:
        n_azimuth = 2 * n_polar
    if n_azimuth % 2:
        n_azimuth += 1
    dirs, weights = _sphere_product_rule(N, n_polar, n_azimuth)
    return _antipodal_layout(dirs, weights)


def _sphere_product_rule(N: int, n_polar: int, n_azimuth: int):
    if N == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if N == 2:
        phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return dirs, np.full(n_azimuth, 2.0 * np.pi / n_azimuth)
    sub_dirs, sub_w = _sphere_product_rule(N - 1, n_polar, n_azimuth)
    a = (N - 3) / 2.0
    x, w = roots_jacobi(n_polar, a, a)  # int_{-1}^{1} (1-x^2)^a g(x) dx
    sin_t = np.sqrt(1.0 - x ** 2)
    dirs = np.empty((n_polar * sub_dirs.shape[0], N))
    dirs[:, 0] = np.repeat(x, sub_dirs.shape[0])
    dirs[:, 1:] = np.repeat(sin_t, sub_dirs.shape[0])[:, None] * np.tile(
        sub_dirs, (n_polar, 1)
    )
    weights = (w[:, None] * sub_w).ravel()
    return dirs, weights


def _antipodal_layout(dirs: np.ndarray, weights: np.ndarray):
    from scipy.spatial import cKDTree

    M = dirs.shape[0]
    _, mate = cKDTree(dirs).query(-dirs)
    if np.any(mate[mate] != np.arange(M)) or np.any(mate == np.arange(M)):
        raise AssertionError("sphere rule is not antipodally symmetric")
    first = np.where(np.arange(M) < mate)[0]
    order = np.concatenate([first, mate[first]])
    dirs, weights = dirs[order].copy(), weights[order].copy()
    half = M // 2
    dirs[half:] = -dirs[:half]
    weights[half:] = weights[:half]
    return dirs, weights


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere S^{N-1}."""
    return float(2.0 * np.pi ** (N / 2.0) / gamma_fn(N / 2.0))


def spherical_means(f, y: np.ndarray, radii: np.ndarray, rule,
                    subtract: float | None = None) -> np.ndarray:
    """Means of f over spheres of the given radii centered at y.

    With subtract given, returns the deficits mean(f) - subtract formed from
    antipodal pair sums f(y + r w) + f(y - r w) - 2 subtract, which cancels
    the odd part of f analytically and keeps the result exact when f is
    constant on a sphere (the second-difference rules rely on this).
    Radii are processed in chunks so the (radii, directions, N) point block
    never exceeds a fixed memory budget.
    """
    dirs, w = rule
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    M = dirs.shape[0]
    chunk = max(1, _MAX_BATCH // M)
    out = np.empty(radii.size)
    wsum = np.sum(w)
    buf = np.empty((chunk, M, y.shape[0]))
    half = M // 2
    for k in range(0, radii.size, chunk):
        r = radii[k : k + chunk]
        blk = buf[: r.size]
        np.multiply(r[:, None, None], dirs[None, :, :], out=blk)
        blk += y
        vals = np.asarray(f(blk), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NumericsError("non-finite sample in spherical mean")
        if subtract is not None:
            pair = vals[:, :half] + vals[:, half:] - 2.0 * subtract
            out[k : k + r.size] = pair @ w[:half] / (2.0 * np.sum(w[:half]))
        else:
            out[k : k + r.size] = vals @ w / wsum
    return out


# ---------------------------------------------------------------------------
# Singular-integral route
# ---------------------------------------------------------------------------

def fractional_constant(N: int, s: float) -> float:
    """Positive operator constant 4^s Gamma(N/2+s) / (pi^{N/2} |Gamma(-s)|)."""
    return float(4.0 ** s * gamma_fn(N / 2.0 + s) / (np.pi ** (N / 2.0) * abs(gamma_fn(-s))))


def frac_lap_exact_bubble(p: ProblemParams, b: Bubble, y) -> np.ndarray | float:
    """(-Delta)^s of a bubble via the closed identity U^{(N+2s)/(N-2s)}."""
    u = bubble_value(p, b, y)
    return u ** ((p.N + 2.0 * p.s) / (p.N - 2.0 * p.s))


def frac_lap_quadrature(f, y, q: QuadratureSpec, *, N: int | None = None,
                        s: float | None = None, p: ProblemParams | None = None,
                        full_output: bool = False):
    """Singular-integral evaluation of (-Delta)^s f at the point y.

    f must be C^2 near y and decay at least like |z|^{-(N-2s)}; the value is

        c(N,s) |S^{N-1}| int_0^inf r^{-1-2s} (f(y) - M_f(y, r)) dr

    with M_f the spherical mean.  The inner panel [0, inner_split] uses a
    Gauss-Jacobi rule in the weight r^{1-2s} applied to the smooth even
    function (f(y) - M_f)/r^2; the mid range uses geometric Gauss panels; the
    tail beyond truncation_radius is integrated analytically assuming the
    bubble decay rate (tail_order=1 keeps the spherical-mean correction).

    Pass full_output=True to also receive a diagnostics dict with the panel
    split and a tail_warning flag raised when the measured far-field decay is
    materially slower than the assumed rate.
    """
    if p is not None:
        N, s = p.N, p.s
    if N is None or s is None:
        raise ValueError("provide either p or both N and s")
    y = np.asarray(y, dtype=float)
    fy = float(np.asarray(f(y[None, :]), dtype=float).reshape(()))
    if not np.isfinite(fy):
        raise NumericsError("non-finite sample at evaluation point")
    rule = unit_sphere_rule(N, q.angular_nodes)
    r0, R = q.inner_split, q.truncation_radius

    # inner panel in v = r^2: int_0^{r0} r^{1-2s} h(r) dr
    #   = (r0^{2-2s}/2) int_0^1 u^{-s} h(r0 sqrt(u)) du
    # with h = (f(y) - M_f)/r^2 smooth and even, hence analytic in u.
    u_in, w_in = _jacobi01(2 * q.radial_nodes, 0.0, -s)
    r_in = r0 * np.sqrt(u_in)
    r_mid, w_mid = gauss_panels(geometric_edges(r0, R, 2.5), q.radial_nodes)
    r_probe = np.array([0.6 * R, R])
    radii = np.concatenate([r_in, r_mid, r_probe])
    deficits = -spherical_means(f, y, radii, rule, subtract=fy)  # f(y) - M
    d_in = deficits[: r_in.size]
    d_mid = deficits[r_in.size : r_in.size + r_mid.size]
    m_R6, m_R = fy - deficits[-2], fy - deficits[-1]

    inner = 0.5 * r0 ** (2.0 - 2.0 * s) * float(np.dot(w_in, d_in / r_in ** 2))
    mid = float(np.dot(w_mid, r_mid ** (-1.0 - 2.0 * s) * d_mid))
    tail = fy * R ** (-2.0 * s) / (2.0 * s)
    if q.tail_order >= 1:
        tail -= m_R * R ** (-2.0 * s) / N

    tail_warning = False
    if abs(m_R) > 1e-280 and abs(m_R6) > abs(m_R):
        decay = math.log(abs(m_R6 / m_R)) / math.log(1.0 / 0.6)
        tail_warning = decay < 0.8 * (N - 2.0 * s)

    value = fractional_constant(N, s) * sphere_area(N) * (inner + mid + tail)
    if full_output:
        return value, {
            "inner": inner,
            "mid": mid,
            "tail": tail,
            "tail_warning": tail_warning,
        }
    return value


# ---------------------------------------------------------------------------
# Half-space extension route
# ---------------------------------------------------------------------------

def neumann_constant(s: float) -> float:
    """d_s = 2^{2s-1} Gamma(s) / Gamma(1-s), weight of the Neumann trace."""
    return float(2.0 ** (2.0 * s - 1.0) * gamma_fn(s) / gamma_fn(1.0 - s))


def _kernel_radial_nodes(s: float, w_max: float, n: int):
    """Nodes/weights for int_0^inf w^{N-1} (1+w^2)^{-(N+2s)/2} g(w) dw pieces.

    Returns finite-range composite Gauss nodes on (0, w_max] plus a mapped
    far rule on (w_max, inf) via w = w_max / v, v = z^{1/(2s)} (the z-power
    flattens the v^{2s-1} endpoint behavior of the kernel tail).
    """
    edges = np.concatenate([[0.0, 1.0], geometric_edges(1.0, w_max, 3.0)[1:]])
    w_fin, wt_fin = gauss_panels(edges, n)
    z, wz = _gauss(2 * n)
    z01 = 0.5 * (z + 1.0)
    wz01 = 0.5 * wz
    v = z01 ** (1.0 / (2.0 * s))
    w_far = w_max / v
    # dw = -w_max v^{-2} dv, dv = (1/2s) z^{1/2s - 1} dz
    jac = w_max / v ** 2 * (1.0 / (2.0 * s)) * z01 ** (1.0 / (2.0 * s) - 1.0)
    return np.concatenate([w_fin, w_far]), np.concatenate([wt_fin, wz01 * jac])


@lru_cache(maxsize=32)
def poisson_normalization(N: int, s: float, n: int = 48) -> float:
    """beta(N,s) fixed by int_{R^N} P_s(y, 1) dy = 1 (numeric normalization)."""
    w, wt = _kernel_radial_nodes(s, 64.0, n)
    kern = w ** (N - 1) * (1.0 + w ** 2) ** (-(N + 2.0 * s) / 2.0)
    mass = sphere_area(N) * float(np.dot(wt, kern))
    return 1.0 / mass


def poisson_kernel_mass(N: int, s: float, t: float, q: QuadratureSpec) -> float:
    """int P_s(y, t) dy by radial quadrature in physical coordinates."""
    beta = poisson_normalization(N, s)
    R = 256.0 * max(t, 1.0)
    r, wt = gauss_panels(
        np.concatenate([[0.0], np.geomspace(t / 32.0, R, 32)]), q.radial_nodes
    )
    kern = beta * t ** (2.0 * s) * r ** (N - 1) * (r ** 2 + t ** 2) ** (-(N + 2.0 * s) / 2.0)
    # analytic tail with the first correction of (1 + t^2/r^2)^{-(N+2s)/2}
    tail = beta * t ** (2.0 * s) * (
        R ** (-2.0 * s) / (2.0 * s)
        - (N + 2.0 * s) * t ** 2 * R ** (-2.0 - 2.0 * s) / (2.0 * (2.0 + 2.0 * s))
    )
    return sphere_area(N) * (float(np.dot(wt, kern)) + tail)


@dataclass(frozen=True, eq=False)
class ExtensionField:
    """Half-space extension data for a base function u: R^N -> R.

    u must accept point arrays of shape (..., N).  The kernel normalization
    beta(N,s) is computed once by normalizing the mass at t = 1.
    """

    u: object
    N: int
    s: float

    @property
    def beta(self) -> float:
        return poisson_normalization(self.N, self.s)

    @property
    def d_s(self) -> float:
        return neumann_constant(self.s)


def _extend_weights(e: ExtensionField, t: float, q: QuadratureSpec):
    w_max = max(48.0, 24.0 / t) if t < 2.0 else 48.0
    w, wt = _kernel_radial_nodes(e.s, w_max, q.radial_nodes)
    kern = w ** (e.N - 1) * (1.0 + w ** 2) ** (-(e.N + 2.0 * e.s) / 2.0)
    return w, wt, kern


def poisson_extend(e: ExtensionField, y, t: float, q: QuadratureSpec) -> float:
    """Extension u~(y, t) = int P_s(y - xi, t) u(xi) d xi for t > 0.

    Evaluated in kernel-scaled radial coordinates: with M_u the spherical
    mean of u about y, u~ = beta |S^{N-1}| int w^{N-1}(1+w^2)^{-(N+2s)/2}
    M_u(y, t w) dw, so the rule is exact on constants by construction of beta.
    """
    if t <= 0:
        raise ValueError(f"extension height must be positive, got {t}")
    y = np.asarray(y, dtype=float)
    w, wt, kern = _extend_weights(e, t, q)
    rule = unit_sphere_rule(e.N, q.angular_nodes)
    means = spherical_means(e.u, y, t * w, rule)
    return e.beta * sphere_area(e.N) * float(np.dot(wt, kern * means))


def extension_d_t(e: ExtensionField, y, t: float, q: QuadratureSpec) -> float:
    """d/dt of the extension, via the analytic kernel derivative."""
    if t <= 0:
        raise ValueError(f"extension height must be positive, got {t}")
    y = np.asarray(y, dtype=float)
    w, wt, kern = _extend_weights(e, t, q)
    rule = unit_sphere_rule(e.N, q.angular_nodes)
    means = spherical_means(e.u, y, t * w, rule)
    dkern = kern * (2.0 * e.s - (e.N + 2.0 * e.s) / (1.0 + w ** 2)) / t
    return e.beta * sphere_area(e.N) * float(np.dot(wt, dkern * means))


def extension_harmonicity_residual(e: ExtensionField, y, t: float,
                                   q: QuadratureSpec, h: float = 0.05) -> float:
    """Relative residual of div(t^{1-2s} grad u~) = 0 at an interior point.

    Second derivatives are formed by central differences of the extension with
    one shared kernel grid across the whole stencil, so quadrature error
    cancels smoothly instead of being amplified by 1/h^2.  The residual is
    normalized by the sum of the magnitudes of its constituent terms.
    """
    if t <= 0:
        raise ValueError(f"extension height must be positive, got {t}")
    y = np.asarray(y, dtype=float)
    w, wt, kern = _extend_weights(e, t, q)
    rule = unit_sphere_rule(e.N, q.angular_nodes)
    pref = e.beta * sphere_area(e.N)

    def ext(yy, tt):
        means = spherical_means(e.u, yy, tt * w, rule)
        return pref * float(np.dot(wt, kern * means))

    ht = min(h, 0.18 * t)
    u0 = ext(y, t)
    u_tp, u_tm = ext(y, t + ht), ext(y, t - ht)
    du_t = (u_tp - u_tm) / (2.0 * ht)
    d2u_t = (u_tp - 2.0 * u0 + u_tm) / ht ** 2
    lap_y = 0.0
    for i in range(e.N):
        step = np.zeros(e.N)
        step[i] = h
        lap_y += (ext(y + step, t) - 2.0 * u0 + ext(y - step, t)) / h ** 2
    wgt = t ** (1.0 - 2.0 * e.s)
    resid = wgt * (lap_y + d2u_t) + (1.0 - 2.0 * e.s) * t ** (-2.0 * e.s) * du_t
    scale = (
        wgt * (abs(lap_y) + abs(d2u_t))
        + abs((1.0 - 2.0 * e.s) * t ** (-2.0 * e.s) * du_t)
    )
    return abs(resid) / max(scale, 1e-300)


def extension_flux(e: ExtensionField, y, q: QuadratureSpec, *, t0: float = 0.2,
                   levels: int = 7, full_output: bool = False):
    """Weighted Neumann trace -d_s lim_{t->0} t^{1-2s} d_t u~(y, t).

    The limit is extrapolated from the geometric ladder t_k = t0 2^{-k}
    by least-squares fitting the boundary expansion a + b t^{2-2s} (augmented
    with the next regular term c t^2, which keeps the fit well conditioned as
    s -> 1 where the two leading exponents nearly coincide); the returned
    flux is -d_s a.  Raises NumericsError when the fit does not represent
    the ladder (non-convergent extrapolation).
    """
    y = np.asarray(y, dtype=float)
    ts = t0 * 0.5 ** np.arange(levels)
    g = np.array([t ** (1.0 - 2.0 * e.s) * extension_d_t(e, y, t, q) for t in ts])
    design = np.stack([np.ones_like(ts), ts ** (2.0 - 2.0 * e.s), ts ** 2], axis=1)
    coef, *_ = np.linalg.lstsq(design, g, rcond=None)
    resid = g - design @ coef
    scale = float(np.max(np.abs(design @ coef)))
    scale = max(scale, 1e-300)
    rel = float(np.max(np.abs(resid))) / scale
    if rel > 5e-2:
        raise NumericsError(f"flux extrapolation did not converge (residual {rel:.2e})")
    flux = -e.d_s * float(coef[0])
    if full_output:
        return flux, {"coef": coef, "fit_residual": rel, "ladder": g}
    return flux
