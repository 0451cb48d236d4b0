"""Model weight fields K(r, y'') with a prescribed (possibly saddle) critical point.

The family is

    K(r, y'') = 1 + (1/2) v^T H v * chi(|v| / cutoff),     v = (r - r0, y'' - y0''),

with H a symmetric nondegenerate matrix of negative trace and chi a fixed
C-infinity bump equal to 1 on [0, 1/2] and 0 on [1, inf).  K then has the
critical value K = 1 at (r0, y0''), is exactly 1 outside the cutoff ball,
and satisfies the negative-Laplacian trace condition there.  Saddles (mixed
signature H) are first-class; only trace(H) < 0 and det(H) != 0 are required.

Gradients and Hessians are analytic.  As a function on R^N (through
r = |y'|), the radial chain rule applies away from the polar set y' = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _bump_pieces(xi: np.ndarray):
    """exp(-1/x) transition data on the open interval 1/2 < xi < 1."""
    z = 2.0 * xi - 1.0  # in (0, 1)
    with np.errstate(divide="ignore", over="ignore"):
        A = np.exp(-1.0 / (1.0 - z))
        B = np.exp(-1.0 / z)
    return z, A, B


def bump(xi) -> np.ndarray:
    """C-infinity cutoff: 1 on [0, 1/2], 0 on [1, inf)."""
    xi = np.asarray(xi, dtype=float)
    out = np.where(xi <= 0.5, 1.0, 0.0)
    mid = (xi > 0.5) & (xi < 1.0)
    if np.any(mid):
        _, A, B = _bump_pieces(xi[mid])
        out = out.astype(float)
        out[mid] = A / (A + B)
    return out


def bump_d1(xi) -> np.ndarray:
    """First derivative of the cutoff."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    mid = (xi > 0.5) & (xi < 1.0)
    if np.any(mid):
        z, A, B = _bump_pieces(xi[mid])
        P = -A * B * (1.0 / (1.0 - z) ** 2 + 1.0 / z ** 2)
        out[mid] = 2.0 * P / (A + B) ** 2
    return out


def bump_d2(xi) -> np.ndarray:
    """Second derivative of the cutoff."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    mid = (xi > 0.5) & (xi < 1.0)
    if np.any(mid):
        z, A, B = _bump_pieces(xi[mid])
        dA = -A / (1.0 - z) ** 2
        dB = B / z ** 2
        D = A + B
        P = dA * B - A * dB
        d2A = A / (1.0 - z) ** 4 - 2.0 * A / (1.0 - z) ** 3
        d2B = B / z ** 4 - 2.0 * B / z ** 3
        dP = d2A * B - A * d2B
        out[mid] = 4.0 * (dP * D - 2.0 * P * (dA + dB)) / D ** 3
    return out


@dataclass(frozen=True, eq=False)
class WeightField:
    """Quadratic-dip weight with critical point (r0, y0pp) and Hessian H.

    H lives in (r, y'') coordinates, shape (d, d) with d = 1 + len(y0pp).
    The constructor enforces the structural assumptions: symmetry,
    trace(H) < 0, |det H| bounded away from zero, and positivity of K on
    the dip (1 + min_eig * cutoff^2 / 2 >= 0).
    """

    r0: float
    y0pp: np.ndarray
    H: np.ndarray
    cutoff: float = 0.5

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError(f"critical radius must be positive, got {self.r0}")
        if not self.cutoff > 0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")
        y0 = np.atleast_1d(np.asarray(self.y0pp, dtype=float))
        if y0.ndim != 1 or y0.size < 1:
            raise ValueError("y0pp must be a nonempty 1-d vector")
        y0.setflags(write=False)
        object.__setattr__(self, "y0pp", y0)
        H = np.asarray(self.H, dtype=float)
        d = y0.size + 1
        if H.shape != (d, d):
            raise ValueError(f"H must have shape ({d}, {d}), got {H.shape}")
        if not np.allclose(H, H.T, atol=1e-12):
            raise ValueError("H must be symmetric")
        H = 0.5 * (H + H.T)
        H.setflags(write=False)
        object.__setattr__(self, "H", H)
        tr = float(np.trace(H))
        if tr >= 0:
            raise ValueError(f"trace(H) must be negative, got {tr}")
        eig = np.linalg.eigvalsh(H)
        if np.min(np.abs(eig)) < 1e-10:
            raise ValueError("H is degenerate (eigenvalue below tolerance)")
        if 1.0 + 0.5 * min(0.0, float(eig[0])) * self.cutoff ** 2 < 0:
            raise ValueError("quadratic dip drops below zero inside the cutoff ball")

    @property
    def N(self) -> int:
        return self.y0pp.size + 2

    @property
    def laplacian_at_critical(self) -> float:
        """trace(H), the (r, y'')-Laplacian of K at the critical point."""
        return float(np.trace(self.H))

    def _v(self, y: np.ndarray):
        """Reduced coordinates v = (r - r0, y'' - y0'') for y in R^N."""
        y = np.asarray(y, dtype=float)
        r = np.sqrt(y[..., 0] ** 2 + y[..., 1] ** 2)
        v = np.concatenate(
            [(r - self.r0)[..., None], y[..., 2:] - self.y0pp], axis=-1
        )
        return r, v

    def eval_reduced(self, v: np.ndarray) -> np.ndarray:
        """K as a function of the reduced coordinates v = (r - r0, y'' - y0'')."""
        v = np.asarray(v, dtype=float)
        q = 0.5 * np.einsum("...i,ij,...j->...", v, self.H, v)
        rho = np.linalg.norm(v, axis=-1)
        return 1.0 + q * bump(rho / self.cutoff)

    def grad_reduced(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        Hv = v @ self.H
        q = 0.5 * np.einsum("...i,...i->...", v, Hv)
        rho = np.linalg.norm(v, axis=-1)
        xi = rho / self.cutoff
        chi = bump(xi)
        dchi = bump_d1(xi)
        safe = np.where(rho > 0, rho, 1.0)
        rad = np.where(rho > 0, q * dchi / (safe * self.cutoff), 0.0)
        return chi[..., None] * Hv + rad[..., None] * v

    def hess_reduced(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        d = v.shape[-1]
        Hv = v @ self.H
        q = 0.5 * np.einsum("...i,...i->...", v, Hv)
        rho = np.linalg.norm(v, axis=-1)
        xi = rho / self.cutoff
        chi, dchi, d2chi = bump(xi), bump_d1(xi), bump_d2(xi)
        eye = np.eye(d)
        out = chi[..., None, None] * self.H
        safe = np.where(rho > 0, rho, 1.0)
        inside = rho > 0
        c1 = np.where(inside, dchi / (safe * self.cutoff), 0.0)
        cross = Hv[..., :, None] * v[..., None, :]
        out = out + c1[..., None, None] * (cross + np.swapaxes(cross, -1, -2))
        vv = v[..., :, None] * v[..., None, :]
        c2 = np.where(inside, d2chi / (safe ** 2 * self.cutoff ** 2), 0.0)
        c3 = np.where(inside, dchi / (safe * self.cutoff), 0.0)
        out = out + (q * c2)[..., None, None] * vv
        out = out + (q * c3)[..., None, None] * (
            eye - vv / (safe ** 2)[..., None, None]
        )
        return out


def weight_eval(K: WeightField, y) -> np.ndarray | float:
    """K at points y in R^N (vectorized over leading axes)."""
    _, v = K._v(y)
    out = K.eval_reduced(v)
    return out if np.shape(out) else float(out)


def weight_grad(K: WeightField, y, *, full: bool = False):
    """Gradient of K at y: (dK/dr, dK/dy3..dK/dyN), or the full R^N gradient.

    The full gradient needs the polar chain rule through r = |y'| and
    raises on the polar set y' = 0.
    """
    y = np.asarray(y, dtype=float)
    r, v = K._v(y)
    g = K.grad_reduced(v)
    if not full:
        return g
    if np.any(r == 0):
        raise ValueError("full gradient undefined on the polar set |y'| = 0")
    out = np.empty_like(y)
    out[..., 0] = g[..., 0] * y[..., 0] / r
    out[..., 1] = g[..., 0] * y[..., 1] / r
    out[..., 2:] = g[..., 1:]
    return out


def weight_hess(K: WeightField, y) -> np.ndarray:
    """Hessian of K in (r, y'') coordinates at points y in R^N."""
    _, v = K._v(y)
    return K.hess_reduced(v)


def critical_degree(K: WeightField, tol: float = 1e-10) -> int:
    """Topological degree of grad K at the critical point: sign(det H)."""
    det = float(np.linalg.det(K.H))
    if abs(det) < tol:
        raise ValueError(f"degenerate critical point (|det H| = {abs(det):.2e})")
    return 1 if det > 0 else -1


def default_weight_field(N: int = 5, cutoff: float = 0.5) -> WeightField:
    """Default saddle instance: r0 = 1, y0'' = 0, H = diag(-2, -1, 1/(N-3), ...).

    The trailing entries are scaled so trace(H) = -2 for every N, keeping a
    genuine saddle with the required negative trace.
    """
    if N < 4:
        raise ValueError(f"need N >= 4, got {N}")
    diag = np.full(N - 1, 1.0 / (N - 3))
    diag[0], diag[1] = -2.0, -1.0
    return WeightField(r0=1.0, y0pp=np.zeros(N - 2), H=np.diag(diag), cutoff=cutoff)
