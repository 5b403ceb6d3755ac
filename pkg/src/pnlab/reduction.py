"""Reduction theory: Minkowski reduction on the full cone, the Grenier
fundamental domain on the determinant-one slice, Siegel sets and the
sandwich probe."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import congruence, full_iwasawa, partial_iwasawa, spd_matrix, unit_det
from .errors import GuardrailExceeded, InputError
from .lattice import complete_basis, int_inv, lll_gram, short_vectors, sign_normalize
from .parallel import pmap, shard_rngs, shard_sizes

REL_TOL = 1e-10
INTERIOR = 1e-6


@dataclass(frozen=True)
class Verdict:
    ok: bool
    condition: str | None = None
    datum: tuple | None = None
    notes: tuple = ()

    def __bool__(self) -> bool:
        return self.ok


@dataclass
class ReductionResult:
    A: np.ndarray
    R: np.ndarray
    domain: str
    iterations: int = 0
    boundary: bool = False
    notes: list = field(default_factory=list)

    def to_json(self, Y=None) -> dict:
        out = {
            "A": self.A.tolist(),
            "R": self.R.tolist(),
            "domain": self.domain,
            "iterations": self.iterations,
            "boundary": self.boundary,
        }
        if Y is not None:
            out = {"input": np.asarray(Y).tolist(), **out}
        if self.notes:
            out["notes"] = list(self.notes)
        return out


# -- Minkowski ----------------------------------------------------------------


def _tail_gcd(a, k: int) -> int:
    return math.gcd(*(int(t) for t in a[k:]))


def is_minkowski_reduced(Y, bound: int = 10) -> Verdict:
    """Check (M.1) over all integer a with ||a||_inf <= bound and (M.2).

    Vectors that can violate (M.1) satisfy Y[a] < max_k y_kk, a finite set
    that is enumerated completely; ``bound`` only filters that set.
    """
    Y = spd_matrix(Y)
    if bound < 1:
        raise InputError("bound must be positive")
    n = len(Y)
    diag = np.diag(Y)
    X, norms = short_vectors(Y, float(diag.max()))
    for a, q in zip(X, norms):
        if np.max(np.abs(a)) > bound:
            continue
        for k in range(n):
            if _tail_gcd(a, k) == 1 and q < diag[k] * (1 - REL_TOL):
                return Verdict(False, "M.1", (k + 1, tuple(int(t) for t in a)))
    for k in range(n - 1):
        if Y[k, k + 1] < -REL_TOL * diag[k]:
            return Verdict(False, "M.2", (k + 1, k + 2))
    return Verdict(True)


def minkowski_margin(Y) -> float:
    """Smallest relative slack of the (M.1)/(M.2) inequalities, ignoring the
    identities Y[+-e_k] = y_kk and ties between equal diagonal entries that
    are forced by the ordering."""
    Y = spd_matrix(Y)
    n = len(Y)
    diag = np.diag(Y)
    X, norms = short_vectors(Y, 1.5 * float(diag.max()))
    slack = np.inf
    for a, q in zip(X, norms):
        nz = np.nonzero(a)[0]
        for k in range(n):
            if _tail_gcd(a, k) != 1:
                continue
            if len(nz) == 1 and nz[0] == k:
                continue
            slack = min(slack, (q - diag[k]) / diag[k])
    for k in range(n - 1):
        slack = min(slack, abs(Y[k, k + 1]) / diag[k])
    return float(slack)


def _extends(P: np.ndarray, Uinv: np.ndarray, u) -> bool:
    k = P.shape[1]
    coords = Uinv @ np.asarray(u, dtype=np.int64)
    return math.gcd(*(int(t) for t in coords[k:])) == 1


def _pick(X, norms):
    best = norms.min()
    tied = [tuple(int(t) for t in x) for x, q in zip(X, norms) if q <= best * (1 + REL_TOL)]
    # lexicographic max prefers e_k over e_{k+1}, so reduced input keeps A = I
    return np.array(max(tied), dtype=np.int64)


def minkowski_reduce(Y) -> ReductionResult:
    """Greedy successive choice of the shortest vector extending the
    previous columns to a primitive system, then (M.2) sign fixing."""
    Y = spd_matrix(Y)
    n = len(Y)
    if n > 6:
        raise InputError("Minkowski reduction is limited to n <= 6")
    U0 = lll_gram(Y)
    G = congruence(Y, U0)
    cols = np.zeros((n, 0), dtype=np.int64)
    for k in range(n):
        C = complete_basis(cols) if k else np.eye(n, dtype=np.int64)
        Cinv = int_inv(C)
        rest = C[:, k:]
        radius = float(min(np.einsum("ij,jk,ik->i", rest.T.astype(float), G, rest.T.astype(float))))
        X, norms = short_vectors(G, radius)
        ok = [i for i, x in enumerate(X) if _extends(cols, Cinv, x)]
        u = _pick(X[ok], norms[ok])
        cols = np.column_stack([cols, u])
    for k in range(n - 1):
        R = congruence(G, cols)
        if R[k, k + 1] < 0:
            cols[:, k + 1] *= -1
    A = U0 @ cols
    R = congruence(Y, A)
    return ReductionResult(A, R, "minkowski", 1, minkowski_margin(R) < INTERIOR)


def r4_check(Y) -> bool:
    """Diagonal chain y_11 <= ... <= y_nn and |y_ij| < y_ii / 2 for i < j."""
    Y = spd_matrix(Y)
    d = np.diag(Y)
    if np.any(np.diff(d) < 0):
        return False
    iu = np.triu_indices(len(Y), 1)
    return bool(np.all(np.abs(Y[iu]) < d[iu[0]] / 2))


# -- Grenier domain -----------------------------------------------------------


def _f1_vectors(v: float, x: np.ndarray, W: np.ndarray):
    """Primitive (a, c), c != 0, whose value (a + x.c)^2 + v^{n/(n-1)} W[c]
    can fall below 1, with that value."""
    n = len(x) + 1
    e = n / (n - 1)
    C, _ = short_vectors(W, v ** (-e) * (1 + 1e-9), half=True)
    out = []
    for c in C:
        t = float(x @ c)
        for a in sorted({math.floor(-t), math.ceil(-t)}):
            if math.gcd(a, *(int(z) for z in c)) != 1:
                continue
            val = (a + t) ** 2 + v**e * float(c @ W @ c)
            out.append(((a, tuple(int(z) for z in c)), val))
    return out


def grenier_membership(Y, strict: bool = False) -> Verdict:
    """(F1)-(F3). The default uses the box 0 <= x_1 <= 1/2 and |x_j| <= 2 for
    2 <= j <= n-2; ``strict`` uses |x_j| <= 1/2 for 2 <= j <= n-1."""
    return _membership(unit_det(Y), strict)


def _membership(Y: np.ndarray, strict: bool) -> Verdict:
    n = len(Y)
    if n == 1:
        return Verdict(True)
    p = partial_iwasawa(Y, check=False)
    notes = []
    for (a, c), val in _f1_vectors(p.v, p.x, p.W):
        if val < 1 - REL_TOL:
            return Verdict(False, "F1", (a, c))
    if n > 2:
        sub = _membership(p.W, strict)
        if not sub:
            return Verdict(False, "F2", (sub.condition, sub.datum), sub.notes)
        notes.extend(sub.notes)
    x = p.x
    if x[0] < -REL_TOL or x[0] > 0.5 + REL_TOL:
        return Verdict(False, "F3", (1, float(x[0])))
    last = n - 1 if strict else n - 2
    cap = 0.5 if strict else 2.0
    for j in range(2, last + 1):
        if abs(x[j - 1]) > cap + REL_TOL:
            return Verdict(False, "F3", (j, float(x[j - 1])))
    for j in range(2, n):
        if abs(x[j - 1]) > 0.5 + REL_TOL:
            notes.append(f"|x_{j}| = {abs(x[j - 1]):.6g} exceeds 1/2")
    return Verdict(True, notes=tuple(notes))


def grenier_membership_n2(v, x) -> np.ndarray:
    """Vectorized membership for n = 2 points [v, x, 1]: the box
    0 <= x <= 1/2 and (F1) at the two candidate columns that matter inside
    it, c = 1 with a = 0 or a = -1 (any other primitive column gives at
    least 4 v^2 >= 1 once the c = 1 conditions hold)."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    box = (x >= -REL_TOL) & (x <= 0.5 + REL_TOL)
    f1 = (x**2 + v**2 >= 1 - REL_TOL) & ((x - 1) ** 2 + v**2 >= 1 - REL_TOL)
    return box & f1 & (4 * v**2 >= 1 - REL_TOL)


def grenier_margin(Y, strict: bool = True) -> float:
    """Smallest slack among the active (F1)-(F3) inequalities (absolute, in
    the units of each condition)."""
    return _margin(unit_det(Y), strict)


def _margin(Y: np.ndarray, strict: bool) -> float:
    n = len(Y)
    if n == 1:
        return np.inf
    p = partial_iwasawa(Y, check=False)
    slack = np.inf
    for _, val in _f1_vectors(p.v, p.x, p.W):
        slack = min(slack, val - 1)
    x = p.x
    slack = min(slack, x[0], 0.5 - x[0])
    last = n - 1 if strict else n - 2
    for j in range(2, last + 1):
        slack = min(slack, (0.5 if strict else 2.0) - abs(x[j - 1]))
    if n > 2:
        slack = min(slack, _margin(p.W, strict))
    return float(slack)


def _shortest(Y) -> tuple[np.ndarray, float]:
    X, norms = short_vectors(Y, float(Y[0, 0]))
    return _pick(X, norms), float(norms.min())


def _grenier_pass(Y: np.ndarray) -> np.ndarray:
    """One highest-point pass; returns the unimodular transformation."""
    n = len(Y)
    A = np.eye(n, dtype=np.int64)
    if n == 1:
        return A
    u, q = _shortest(Y)
    if q < Y[0, 0] * (1 - REL_TOL):
        A = complete_basis(u)
        Y = congruence(Y, A)
    p = partial_iwasawa(Y, check=False)
    if n > 2:
        d = _grenier_pass(p.W)
        g = np.eye(n, dtype=np.int64)
        g[1:, 1:] = d
        A = A @ g
        Y = congruence(Y, g)
        p = partial_iwasawa(Y, check=False)
    b = -np.round(p.x).astype(np.int64)
    t = np.eye(n, dtype=np.int64)
    t[0, 1:] = b
    A = A @ t
    x = p.x + b
    if x[0] < 0:
        A = A @ np.diag([-1] + [1] * (n - 1)).astype(np.int64)
    return A


def grenier_reduce(Y, max_iter: int = 10_000, strict: bool = True) -> ReductionResult:
    """Highest-point reduction into the Grenier domain: make e_1 a shortest
    vector, reduce W recursively, translate x into its box and fix the sign
    of x_1; repeat until membership holds."""
    Y = unit_det(Y)
    n = len(Y)
    if n > 4:
        raise InputError("Grenier reduction is limited to n <= 4")
    A = np.eye(n, dtype=np.int64)
    R = Y
    for it in range(max_iter + 1):
        if _membership(R, strict):
            notes = list(_membership(R, False).notes)
            return ReductionResult(A, R, "grenier", it, _margin(R, True) < INTERIOR, notes)
        step = _grenier_pass(R)
        A = A @ step
        R = congruence(Y, A)
    raise GuardrailExceeded(f"Grenier reduction did not settle in {max_iter} iterations")


# -- Siegel sets and the sandwich probe --------------------------------------


def siegel_membership(Y, t: float) -> bool:
    if t <= 0:
        raise InputError("t must be positive")
    F = full_iwasawa(Y)
    if np.any(F.ys < t ** (-0.5) * (1 - REL_TOL)):
        return False
    iu = np.triu_indices(F.n, 1)
    return bool(np.all(np.abs(F.N[iu]) <= 0.5 + REL_TOL))


def sign_diagonals(n: int) -> list[np.ndarray]:
    """D_n modulo +-I: diagonal sign matrices with first entry +1."""
    out = []
    for bits in range(2 ** (n - 1)):
        signs = [1] + [(-1) ** ((bits >> i) & 1) for i in range(n - 1)]
        out.append(np.diag(signs).astype(np.int64))
    return out


def random_unit_det(rng: np.random.Generator, n: int, spread: float = 0.5) -> np.ndarray:
    A = rng.standard_normal((n, n)) * np.exp(spread * rng.standard_normal(n))
    Y = A @ A.T
    Y = Y / np.linalg.det(Y) ** (1 / n)
    return (Y + Y.T) / 2


def random_siegel_point(rng: np.random.Generator, n: int, t: float = 1.0) -> np.ndarray:
    """A point with y_i >= t^{-1/2} and |x_ij| <= 1/2 (heavy-tailed in y)."""
    ys = t ** (-0.5) * (1 + rng.exponential(0.5, n - 1))
    N = np.eye(n) + np.triu(rng.uniform(-0.5, 0.5, (n, n)), 1)
    cum = np.concatenate([[1.0], np.cumprod(ys**2)])
    D = np.diag(cum / np.prod(cum) ** (1 / n))
    return congruence(D, N)


@dataclass
class SandwichReport:
    n: int
    samples: int
    inner_violations: list
    outer_violations: list

    @property
    def ok(self) -> bool:
        return not self.inner_violations and not self.outer_violations

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "samples": self.samples,
            "inner_violations": len(self.inner_violations),
            "outer_violations": len(self.outer_violations),
            "counterexamples": [np.asarray(Y).tolist() for Y in
                                (self.inner_violations + self.outer_violations)[:10]],
            "ok": self.ok,
        }


SANDWICH_SHARDS = 16


def sandwich_probe(N: int, n: int = 2, seed: int = 0, threads: int | None = None) -> SandwichReport:
    """Empirical check of S_{1,1/2} in F_n^# in S_{4/3,1/2}: reduced random
    points must lie in the larger Siegel set, and random points of the
    smaller Siegel set must land in F_n after some sign change."""
    if n < 2 or n > 3:
        raise InputError("sandwich probe supports n in {2, 3}")
    if N < 1:
        raise InputError("need at least one sample")
    signs = sign_diagonals(n)
    rngs = shard_rngs(seed, SANDWICH_SHARDS)
    sizes = shard_sizes(N, SANDWICH_SHARDS)

    def shard(i):
        rng = rngs[i]
        inner, outer = [], []
        for _ in range(sizes[i]):
            R = grenier_reduce(random_unit_det(rng, n)).R
            if not all(siegel_membership(congruence(R, g), 4 / 3) for g in signs):
                outer.append(R)
            S = random_siegel_point(rng, n, 1.0)
            if not any(grenier_membership(congruence(S, g), strict=True) for g in signs):
                inner.append(S)
        return inner, outer

    parts = pmap(shard, range(SANDWICH_SHARDS), threads)
    inner = [Y for p in parts for Y in p[0]]
    outer = [Y for p in parts for Y in p[1]]
    return SandwichReport(n, N, inner, outer)
