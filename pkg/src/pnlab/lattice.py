"""Integer lattice plumbing: exact unimodular algebra, basis completion,
LLL preconditioning and Fincke-Pohst short vector enumeration."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import EnumerationOverflow, InputError

MAX_NODES = 10**7


def ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, x, y) with a*x + b*y == g == gcd(a, b) >= 0."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, r = divmod(a, b)
        a, b = b, r
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        return -a, -x0, -y0
    return a, x0, y0


def int_det(M) -> int:
    """Exact determinant by Bareiss fraction-free elimination."""
    A = [[int(v) for v in row] for row in np.asarray(M).tolist()]
    n = len(A)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for r in range(k + 1, n):
                if A[r][k] != 0:
                    A[k], A[r] = A[r], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def int_inv(U) -> np.ndarray:
    """Exact inverse of a unimodular integer matrix."""
    A = [[Fraction(int(v)) for v in row] for row in np.asarray(U).tolist()]
    n = len(A)
    I = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for c in range(n):
        p = next((r for r in range(c, n) if A[r][c] != 0), None)
        if p is None:
            raise InputError("matrix is singular")
        A[c], A[p] = A[p], A[c]
        I[c], I[p] = I[p], I[c]
        piv = A[c][c]
        A[c] = [v / piv for v in A[c]]
        I[c] = [v / piv for v in I[c]]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
                I[r] = [a - f * b for a, b in zip(I[r], I[c])]
    out = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if I[i][j].denominator != 1:
                raise InputError("matrix is not unimodular")
            out[i, j] = int(I[i][j])
    return out


def as_int_matrix(A) -> np.ndarray:
    arr = np.asarray(A)
    if arr.dtype.kind == "f":
        r = np.rint(arr)
        if np.max(np.abs(arr - r), initial=0.0) > 1e-9:
            raise InputError("matrix has non-integral entries")
        arr = r
    out = arr.astype(np.int64)
    if np.max(np.abs(out), initial=0) > 2**31:
        raise InputError("integer entries too large for checked 64-bit arithmetic")
    return out


def unimodular(A) -> np.ndarray:
    """Validate an integer matrix with |det| == 1 and return it as int64."""
    M = as_int_matrix(A)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError("unimodular matrix must be square")
    if abs(int_det(M)) != 1:
        raise InputError("matrix is not unimodular")
    return M


def gamma_class(A) -> np.ndarray:
    """Canonical representative of A modulo {+-I}: first nonzero entry of
    the first column positive."""
    M = unimodular(A)
    col = M[:, 0]
    first = col[np.nonzero(col)[0][0]]
    return M if first > 0 else -M


def is_primitive(v) -> bool:
    return math.gcd(*(int(a) for a in v)) == 1


def sign_normalize(v) -> np.ndarray:
    """Flip v so that its first nonzero entry is positive."""
    v = np.asarray(v)
    nz = np.nonzero(v)[0]
    if len(nz) and v[nz[0]] < 0:
        return -v
    return v


def complete_basis(P) -> np.ndarray:
    """Extend the primitive integer columns of P (n x k) to a unimodular
    n x n matrix whose first k columns are P.

    Deterministic: iterated extended-gcd row elimination on P with the
    inverse column operations accumulated in the result.
    """
    P = as_int_matrix(P)
    if P.ndim == 1:
        P = P[:, None]
    n, k = P.shape
    M = [[int(v) for v in row] for row in P.tolist()]
    U = [[int(i == j) for j in range(n)] for i in range(n)]

    def row_combo(r1, r2, a, b, c, d):
        # rows (r1, r2) <- [[a, b], [c, d]] @ rows, det == 1; U <- U @ inv
        M[r1], M[r2] = (
            [a * x + b * y for x, y in zip(M[r1], M[r2])],
            [c * x + d * y for x, y in zip(M[r1], M[r2])],
        )
        for row in U:
            x, y = row[r1], row[r2]
            row[r1], row[r2] = d * x - c * y, -b * x + a * y

    for c in range(k):
        for r in range(c + 1, n):
            a, b = M[c][c], M[r][c]
            if b == 0:
                continue
            g, x, y = ext_gcd(a, b)
            row_combo(c, r, x, y, -b // g, a // g)
        if abs(M[c][c]) != 1:
            raise InputError("columns do not span a primitive sublattice")
        if M[c][c] == -1:
            M[c] = [-v for v in M[c]]
            for row in U:
                row[c] = -row[c]
        for r in range(c):
            f = M[r][c]
            if f:
                # row r -= f * row c  ->  U col c += f * U col r
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
                for row in U:
                    row[c] += f * row[r]
    out = np.array(U, dtype=np.int64)
    if not np.array_equal(out[:, :k], P):
        raise AssertionError("basis completion failed")
    return out


def size_reduce_against(Q: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Shift the columns of Q by integer combinations of the columns of P so
    their Gram-Schmidt coefficients against P lie in [-1/2, 1/2)."""
    if P.shape[1] == 0:
        return Q
    Pf = P.astype(float)
    coef = np.linalg.lstsq(Pf, Q.astype(float), rcond=None)[0]
    return Q - P @ np.floor(coef + 0.5).astype(np.int64)


def lll_gram(G, delta: float = 0.99) -> np.ndarray:
    """LLL-reduce the quadratic form G; returns unimodular U with G[U]
    reduced. Floating point, intended for small dimensions."""
    G = np.array(G, dtype=float)
    n = len(G)
    U = np.eye(n, dtype=np.int64)
    if n < 2:
        return U

    def gso(G):
        mu = np.zeros((n, n))
        B = np.zeros(n)
        for i in range(n):
            for j in range(i):
                mu[i, j] = (G[i, j] - np.dot(mu[j, :j] * mu[i, :j], B[:j])) / B[j]
            B[i] = G[i, i] - np.dot(mu[i, :i] ** 2, B[:i])
        return mu, B

    k = 1
    guard = 0
    while k < n:
        guard += 1
        if guard > 100000:
            raise EnumerationOverflow("LLL did not terminate")
        mu, B = gso(G)
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                E = np.eye(n, dtype=np.int64)
                E[j, k] = -q
                U = U @ E
                G = E.T @ G @ E
                mu, B = gso(G)
        if B[k] >= (delta - mu[k, k - 1] ** 2) * B[k - 1]:
            k += 1
        else:
            perm = np.arange(n)
            perm[[k, k - 1]] = perm[[k - 1, k]]
            U = U[:, perm]
            G = G[np.ix_(perm, perm)]
            k = max(k - 1, 1)
    return U


def short_vectors(G, radius: float, *, max_nodes: int = MAX_NODES, half: bool = True):
    """All nonzero integer x with x^T G x <= radius (Fincke-Pohst).

    With ``half`` only one vector of each +-pair is returned (the one whose
    first nonzero entry is positive). Returns (X, norms) sorted by norm
    and then lexicographically.
    """
    G = np.asarray(G, dtype=float)
    n = len(G)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise InputError("quadratic form is not positive definite") from None
    R = L.T
    d = np.diag(R) ** 2
    off = R / np.diag(R)[:, None]
    radius = float(radius) * (1 + 1e-12) + 1e-300
    x = [0] * n
    found = []
    nodes = 0
    # last-nonzero-positive normalisation during the search, fixed up below
    stack = []

    def bounds(i, rem):
        c = -sum(off[i, j] * x[j] for j in range(i + 1, n))
        w = math.sqrt(max(rem, 0.0) / d[i])
        return c, math.ceil(c - w - 1e-12), math.floor(c + w + 1e-12)

    i = n - 1
    rem = [0.0] * (n + 1)
    rem[n] = radius
    c, lo, hi = bounds(i, radius)
    if half:
        lo = max(lo, 0)
    stack = [None] * n
    stack[i] = [lo, hi, c]
    x[i] = lo - 1
    while True:
        lo_i, hi_i, c_i = stack[i]
        x[i] += 1
        if x[i] > hi_i:
            i += 1
            if i == n:
                break
            continue
        nodes += 1
        if nodes > max_nodes:
            raise EnumerationOverflow(f"more than {max_nodes} enumeration nodes")
        r = rem[i + 1] - d[i] * (x[i] - c_i) ** 2
        if r < -1e-12 * radius:
            continue
        if i == 0:
            if any(x):
                found.append((radius - (r if r > 0 else 0.0), tuple(x)))
            continue
        rem[i] = r
        i -= 1
        c, lo, hi = bounds(i, r)
        if half and all(v == 0 for v in x[i + 1 :]):
            lo = max(lo, 0)
        stack[i] = [lo, hi, c]
        x[i] = lo - 1
    if not found:
        return np.zeros((0, n), dtype=np.int64), np.zeros(0)
    X = np.array([v for _, v in found], dtype=np.int64)
    if half:
        X = np.array([sign_normalize(v) for v in X], dtype=np.int64)
    norms = np.einsum("ij,jk,ik->i", X.astype(float), G, X.astype(float))
    keep = norms <= radius
    X, norms = X[keep], norms[keep]
    order = np.lexsort(tuple(X[:, ::-1].T) + (norms,))
    return X[order], norms[order]


@lru_cache(maxsize=None)
def combos(n: int, j: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(n), j))


def plucker(B) -> np.ndarray:
    """Plucker coordinates (j x j minors, rows in lexicographic order) of
    the integer n x j matrix B."""
    B = np.asarray(B)
    n, j = B.shape
    out = np.empty(len(combos(n, j)), dtype=np.int64)
    for t, rows in enumerate(combos(n, j)):
        out[t] = int_det(B[list(rows), :])
    return out


@lru_cache(maxsize=None)
def _wedge_table(n: int, j: int):
    """Index table expressing (p wedge v)_I for p in wedge^{j-1}, v in Z^n."""
    idx_prev = {I: t for t, I in enumerate(combos(n, j - 1))}
    rows = []
    for I in combos(n, j):
        terms = []
        for r, i in enumerate(I):
            rest = I[:r] + I[r + 1 :]
            terms.append((idx_prev[rest], i, (-1) ** (j - 1 - r)))
        rows.append(terms)
    return rows


def wedge(p, v, n: int, j: int):
    """p wedge v for p in wedge^{j-1} Z^n (coordinates) and v in Z^n; works
    on the trailing axis, so batched inputs are accepted."""
    p = np.asarray(p)
    v = np.asarray(v)
    cols = []
    for terms in _wedge_table(n, j):
        acc = 0
        for a, i, sgn in terms:
            acc = acc + sgn * p[..., a] * v[..., i]
        cols.append(acc)
    return np.stack(cols, axis=-1)


def compound(M, j: int) -> np.ndarray:
    """j-th compound matrix: all j x j minors of M."""
    M = np.asarray(M, dtype=float)
    n = len(M)
    idx = combos(n, j)
    C = np.empty((len(idx), len(idx)))
    for a, I in enumerate(idx):
        for b, J in enumerate(idx):
            C[a, b] = np.linalg.det(M[np.ix_(I, J)])
    return C
