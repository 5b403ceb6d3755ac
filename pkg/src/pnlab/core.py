"""Primitives on the cone of positive-definite matrices: validation,
congruence action, Iwasawa coordinates, geodesics, invariant density and a
metric-derived Laplace-Beltrami operator used as an independent oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import FDInconsistency, InputError

TAU_PD = 1e-12
ASYM_TOL = 1e-9
DET_TOL = 1e-8


def sym_matrix(Y) -> np.ndarray:
    """Symmetrize a square real matrix after checking its asymmetry."""
    A = np.array(Y, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    if np.max(np.abs(A - A.T), initial=0.0) > ASYM_TOL * scale:
        raise InputError("matrix is not symmetric")
    return (A + A.T) / 2


def cholesky(Y) -> np.ndarray:
    """Lower Cholesky factor; rejects pivots below TAU_PD."""
    try:
        L = np.linalg.cholesky(Y)
    except np.linalg.LinAlgError:
        raise InputError("matrix is not positive definite") from None
    if np.min(np.diag(L)) <= TAU_PD:
        raise InputError("matrix is numerically singular")
    return L


def spd_matrix(Y) -> np.ndarray:
    A = sym_matrix(Y)
    cholesky(A)
    return A


def unit_det(Y, tol: float = DET_TOL) -> np.ndarray:
    A = spd_matrix(Y)
    d = np.linalg.det(A)
    if abs(d - 1) > tol:
        raise InputError(f"determinant {d!r} is not 1")
    return A


def det1_normalize(Y) -> np.ndarray:
    A = spd_matrix(Y)
    return A / np.linalg.det(A) ** (1 / len(A))


def congruence(Y, A, spd: bool = False) -> np.ndarray:
    """Y[A] = A^T Y A, symmetrized."""
    Y = np.asarray(Y, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != Y.shape[0]:
        raise InputError("dimension mismatch in congruence")
    if spd and (A.shape[0] != A.shape[1] or abs(np.linalg.det(A)) < 1e-300):
        raise InputError("singular transformation cannot produce an SPD result")
    R = A.T @ Y @ A
    return (R + R.T) / 2


# -- Iwasawa coordinates ----------------------------------------------------


@dataclass(frozen=True)
class PartialIwasawa:
    """Y = [v, x, W] with y11 = 1/v, first column x/v and lower block
    v^{-1} x x^T + v^{1/(n-1)} W, det W = 1."""

    v: float
    x: np.ndarray
    W: np.ndarray

    @property
    def n(self) -> int:
        return len(self.x) + 1

    def matrix(self) -> np.ndarray:
        n = self.n
        x = np.asarray(self.x, dtype=float)
        W = np.asarray(self.W, dtype=float)
        Y = np.empty((n, n))
        Y[0, 0] = 1 / self.v
        Y[0, 1:] = Y[1:, 0] = x / self.v
        Y[1:, 1:] = np.outer(x, x) / self.v + self.v ** (1 / (n - 1)) * W
        return (Y + Y.T) / 2


def partial_iwasawa(Y, check: bool = True) -> PartialIwasawa:
    Y = unit_det(Y) if check else np.asarray(Y, dtype=float)
    n = len(Y)
    if n < 2:
        raise InputError("partial Iwasawa coordinates need n >= 2")
    v = 1 / Y[0, 0]
    x = Y[1:, 0] / Y[0, 0]
    W = v ** (-1 / (n - 1)) * (Y[1:, 1:] - np.outer(x, x) / v)
    return PartialIwasawa(v, x, (W + W.T) / 2)


@dataclass(frozen=True)
class FullIwasawa:
    """Y = y^{-1/n} diag(1, y1^2, (y1 y2)^2, ...)[N] with N unit upper
    triangular holding x_ij, and y = prod_j y_j^{2(n-j)}."""

    y: float
    ys: np.ndarray
    N: np.ndarray

    @property
    def n(self) -> int:
        return len(self.N)

    def x(self, i: int, j: int) -> float:
        """x_ij with 1-based indices, i < j."""
        return float(self.N[i - 1, j - 1])

    def diagonal(self) -> np.ndarray:
        n = self.n
        cum = np.concatenate([[1.0], np.cumprod(np.asarray(self.ys) ** 2)])
        return self.y ** (-1 / n) * cum

    def matrix(self) -> np.ndarray:
        D = np.diag(self.diagonal())
        return congruence(D, self.N)


def full_iwasawa(Y) -> FullIwasawa:
    Y = unit_det(Y)
    n = len(Y)
    L = cholesky(Y)
    d = np.diag(L) ** 2
    N = (L / np.diag(L)).T
    ys = np.sqrt(d[1:] / d[:-1])
    y = float(np.prod(ys ** (2 * (n - np.arange(1, n))))) if n > 1 else 1.0
    return FullIwasawa(y, ys, N)


# -- geodesics, distance, density ------------------------------------------


@dataclass(frozen=True)
class GeodesicSpec:
    """alpha(t) = exp(t V^T diag(a) V) with V orthogonal."""

    V: np.ndarray
    a: np.ndarray

    def at(self, t: float) -> np.ndarray:
        M = self.V.T @ np.diag(np.exp(t * self.a)) @ self.V
        return (M + M.T) / 2

    @property
    def length(self) -> float:
        return float(np.sqrt(np.sum(self.a**2)))


def geodesic_spec(Y) -> GeodesicSpec:
    Y = spd_matrix(Y)
    lam, Q = np.linalg.eigh(Y)
    return GeodesicSpec(Q.T, np.log(lam))


def geodesic(Y, t: float) -> np.ndarray:
    """Point at time t on the geodesic from I to Y."""
    return geodesic_spec(Y).at(t)


def distance(Y1, Y2=None) -> float:
    """Riemannian distance; distance(Y) measures from the identity."""
    if Y2 is None:
        Y1, Y2 = np.eye(len(np.atleast_2d(Y1))), Y1
    Y1 = spd_matrix(Y1)
    Y2 = spd_matrix(Y2)
    if Y1.shape != Y2.shape:
        raise InputError("dimension mismatch")
    Linv = np.linalg.inv(cholesky(Y1))
    Z = Linv @ Y2 @ Linv.T
    lam = np.linalg.eigvalsh((Z + Z.T) / 2)
    return float(np.sqrt(np.sum(np.log(lam) ** 2)))


def volume_density(Y) -> float:
    """GL(n)-invariant density det(Y)^{-(n+1)/2} in entry coordinates."""
    Y = spd_matrix(Y)
    n = len(Y)
    return float(np.linalg.det(Y) ** (-(n + 1) / 2))


def iwasawa_volume_density(p: PartialIwasawa) -> float:
    """Density v^{-(n+2)/2} of the invariant measure in (v, x, W)."""
    return float(p.v ** (-(p.n + 2) / 2))


# -- finite differences -----------------------------------------------------


def richardson(op: Callable[[float], complex], h: float, tol: float = 1e-4,
               atol: float = 1e-10) -> complex:
    """One Richardson level for a second-order accurate stencil op(h)."""
    a = op(h)
    b = op(2 * h)
    est = (4 * a - b) / 3
    err = abs(a - b) / 3
    if not np.isfinite(est) or err > 10 * max(tol * abs(est), atol):
        raise FDInconsistency(
            f"finite differences disagree (estimate {est!r}, error {err:.3g})"
        )
    return est


def _check_step(h: float) -> None:
    if not (1e-6 <= h <= 1e-2):
        raise InputError("relative step must lie in [1e-6, 1e-2]")


# -- coordinates for the metric oracle --------------------------------------


def iwasawa_coords(Y) -> np.ndarray:
    """Flatten (v, x, then recursively W) into a coordinate vector."""
    Y = np.asarray(Y, dtype=float)
    out = []
    while len(Y) >= 2:
        p = partial_iwasawa(Y, check=False)
        out.append(p.v)
        out.extend(p.x)
        Y = p.W
    return np.array(out)


def matrix_from_coords(q, n: int) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if n == 1:
        return np.ones((1, 1))
    v, x, rest = q[0], q[1:n], q[n:]
    W = matrix_from_coords(rest, n - 1)
    return PartialIwasawa(v, x, W).matrix()


def metric_tensor(q, n: int, h: float = 1e-5) -> np.ndarray:
    """g_ab = tr(Y^-1 dY_a Y^-1 dY_b) assembled from central differences of
    the coordinate map; the matrix-trace form of the invariant metric."""
    q = np.asarray(q, dtype=float)
    d = len(q)
    Y = matrix_from_coords(q, n)
    Yi = np.linalg.inv(Y)
    dY = []
    for a in range(d):
        s = h * max(1.0, abs(q[a]))
        e = np.zeros(d)
        e[a] = s
        p1 = matrix_from_coords(q + e, n)
        m1 = matrix_from_coords(q - e, n)
        p2 = matrix_from_coords(q + 2 * e, n)
        m2 = matrix_from_coords(q - 2 * e, n)
        dY.append(Yi @ ((8 * (p1 - m1) - (p2 - m2)) / (12 * s)))
    g = np.empty((d, d))
    for a in range(d):
        for b in range(a, d):
            g[a, b] = g[b, a] = np.trace(dY[a] @ dY[b])
    return g


def laplace_beltrami_oracle(f: Callable[[np.ndarray], complex], p: PartialIwasawa,
                            h: float = 1e-4) -> complex:
    """(1/sqrt g) d_a (sqrt g g^{ab} d_b f) for the invariant metric on the
    determinant-one slice, in (v, x, Iwasawa-of-W) coordinates.

    The metric is assembled numerically, so this shares no formula with the
    closed-form operators in :mod:`pnlab.operators`.
    """
    _check_step(h)
    n = p.n
    q0 = iwasawa_coords(p.matrix())
    d = len(q0)
    steps = h * np.maximum(1.0, np.abs(q0))

    def flux(q, scale):
        g = metric_tensor(q, n)
        sg = math.sqrt(np.linalg.det(g))
        grad = np.empty(d, dtype=complex)
        for b in range(d):
            e = np.zeros(d)
            e[b] = steps[b] * scale
            grad[b] = (f(matrix_from_coords(q + e, n)) - f(matrix_from_coords(q - e, n))) / (2 * e[b])
        return sg * np.linalg.solve(g, grad)

    sg0 = math.sqrt(np.linalg.det(metric_tensor(q0, n)))

    def op(scale):
        total = 0j
        for a in range(d):
            e = np.zeros(d)
            e[a] = steps[a] * scale
            total += (flux(q0 + e, scale)[a] - flux(q0 - e, scale)[a]) / (2 * e[a])
        return total / sg0

    f0 = f(p.matrix())
    return richardson(op, 1.0, tol=1e-4, atol=1e-8 * max(1.0, abs(f0)))
