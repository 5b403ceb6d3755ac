"""Invariant differential operators by finite differences: the trace
operators tr((Y d/dY)^k), the recursive Iwasawa-coordinate Laplacian, and
the closed-form Eisenstein eigenvalue."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (PartialIwasawa, _check_step, cholesky, iwasawa_coords, matrix_from_coords,
                   richardson, spd_matrix)
from .errors import InputError, Unsupported
from .selberg import as_param

Field = Callable[[np.ndarray], complex]


@dataclass(frozen=True)
class OperatorSpec:
    h: float | None = None  # relative step; None picks a default per operator
    richardson: int = 1
    tol: float = 1e-4

    def step(self, default: float = 1e-4) -> float:
        h = default if self.h is None else self.h
        _check_step(h)
        if self.richardson != 1:
            raise Unsupported("only one Richardson level is implemented")
        return h


def _sym_basis(n: int) -> list[tuple[int, int, np.ndarray]]:
    out = []
    for l in range(n):
        for j in range(l, n):
            S = np.zeros((n, n))
            if l == j:
                S[l, l] = 1.0
            else:
                S[l, j] = S[j, l] = 0.5
            out.append((l, j, S))
    return out


def apply_Dk(f: Field, Y, k: int, spec: OperatorSpec = OperatorSpec()) -> complex:
    """tr((Y d/dY)^k) f at Y, where d/dY is the symmetrized derivative
    matrix ((1 + delta_ij)/2) d/dy_ij."""
    Y = spd_matrix(Y)
    n = len(Y)
    if k < 1:
        raise InputError("k must be at least 1")
    if k >= 2 and n > 3:
        raise Unsupported("k >= 2 is provided only for n <= 3")
    if k >= 3 and n > 2:
        raise Unsupported("k >= 3 is provided only for n <= 2")
    h = spec.step(1e-3 if k >= 3 else 1e-4)
    # The operators commute with Y -> Y[g], so evaluate the pullback of f
    # along Y = I[L^T] at the identity, where the stencil is well conditioned.
    g = cholesky(Y).T
    basis = _sym_basis(n)

    def F(Z: np.ndarray):
        M = g.T @ Z @ g
        return f((M + M.T) / 2)

    def G(m: int, Z: np.ndarray, eps: float) -> np.ndarray:
        # G_1 = Z dF, G_{m+1} = Z d G_m with the derivative index contracted
        if m == 0:
            return np.asarray(F(Z), dtype=complex)
        inner_shape = () if m == 1 else (n, n)
        D = np.empty((n, n) + inner_shape, dtype=complex)
        for l, j, S in basis:
            d = (G(m - 1, Z + eps * S, eps) - G(m - 1, Z - eps * S, eps)) / (2 * eps)
            D[l, j] = d
            D[j, l] = d
        if m == 1:
            return Z @ D
        return np.einsum("il,ljjk->ik", Z, D)

    def op(mult: float) -> complex:
        return complex(np.trace(G(k, np.eye(n), h * mult)))

    f0 = complex(f(Y))
    return richardson(op, 1.0, tol=spec.tol, atol=1e-8 * max(1.0, abs(f0)))


# -- Iwasawa-coordinate Laplacian --------------------------------------------


def _levels(n: int):
    """(offset, m) for each partial-Iwasawa level of the flat coordinates."""
    off = 0
    for m in range(n, 1, -1):
        yield off, m
        off += m


def laplacian_paper(f: Field, p: PartialIwasawa, spec: OperatorSpec = OperatorSpec(),
                    mode: str = "paper") -> complex:
    """Recursive Laplacian in [v, x, W] coordinates:

        ((m-1)/m) v^2 f_vv - (1/m) v f_v + v^{m/(m-1)} W[d/dx] f + (level m-1)

    with the level-1 operator zero. mode="verbatim" uses -(1/m) f_v for the
    first-order term instead of -(1/m) v f_v.
    """
    if mode not in ("paper", "verbatim"):
        raise InputError(f"unknown mode {mode!r}")
    n = p.n
    if n < 2:
        raise InputError("n must be at least 2")
    h = spec.step()
    q0 = iwasawa_coords(p.matrix())
    base = h * np.maximum(1.0, np.abs(q0))

    def F(q):
        return complex(f(matrix_from_coords(q, n)))

    f0 = F(q0)

    def op(mult: float) -> complex:
        st = base * mult

        def shifted(*pairs):
            q = q0.copy()
            for a, sgn in pairs:
                q[a] += sgn * st[a]
            return F(q)

        def d1(a):
            return (shifted((a, 1)) - shifted((a, -1))) / (2 * st[a])

        def d2(a, b):
            if a == b:
                return (shifted((a, 1)) - 2 * f0 + shifted((a, -1))) / st[a] ** 2
            return (shifted((a, 1), (b, 1)) - shifted((a, 1), (b, -1))
                    - shifted((a, -1), (b, 1)) + shifted((a, -1), (b, -1))) / (4 * st[a] * st[b])

        total = 0j
        for off, m in _levels(n):
            v = q0[off]
            first = v * d1(off) if mode == "paper" else d1(off)
            total += (m - 1) / m * v**2 * d2(off, off) - first / m
            W = matrix_from_coords(q0[off + m:], m - 1)
            xs = range(off + 1, off + m)
            acc = 0j
            for i, a in enumerate(xs):
                for j, b in enumerate(xs):
                    if j < i:
                        continue
                    term = W[i, j] * d2(a, b)
                    acc += term if i == j else 2 * term
            total += v ** (m / (m - 1)) * acc
        return total

    return richardson(op, 1.0, tol=spec.tol, atol=1e-8 * max(1.0, abs(f0)))


def eigenvalue_lambda(s, n: int | None = None) -> complex:
    """sum_j ((n-j)/(n-j+1)) (s_j + xi_j)(s_j - 1 + xi_j - 1/(n-j))."""
    s = as_param(s)
    if n is not None and n != s.n:
        raise InputError(f"expected {n - 1} parameters, got {len(s.s)}")
    n = s.n
    xi = s.xi()
    lam = 0j
    for j in range(1, n):
        a = s.s[j - 1] + xi[j - 1]
        lam += (n - j) / (n - j + 1) * a * (a - 1 - 1 / (n - j))
    return lam


def eigen_residual(f: Field, s, points, spec: OperatorSpec = OperatorSpec(),
                   mode: str = "paper", operator=None) -> float:
    """max over points of |L f - lambda f| / |f|; operator defaults to
    laplacian_paper."""
    lam = eigenvalue_lambda(s)
    worst = 0.0
    for p in points:
        val = complex(f(p.matrix()))
        if abs(val) < 1e-300:
            raise InputError("field vanishes at a test point")
        if operator is None:
            Lf = laplacian_paper(f, p, spec, mode)
        else:
            Lf = operator(f, p)
        worst = max(worst, abs(Lf - lam * val) / abs(val))
    return worst
