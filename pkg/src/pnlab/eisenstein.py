"""Truncated Selberg Eisenstein series and related limits.

Cosets of the upper-triangular subgroup correspond to complete flags of
primitive sublattices 0 < L_1 < ... < L_{n-1} < Z^n, and the summand
p_{-s}(Y[M]) only depends on the flag: det of the leading j x j block of
Y[M] is the Gram determinant (wedge^j Y)[p_j] of the Plucker vector p_j of
L_j. The series is truncated by the Plucker height max_j ||p_j||_inf <= H,
which for n = 2 is the usual box on primitive pairs (a, c).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Callable

import numpy as np

from .core import PartialIwasawa, cholesky, congruence, spd_matrix, unit_det
from .errors import GuardrailExceeded, InputError, NonConvergence, Unsupported
from .lattice import (combos, complete_basis, compound, lll_gram, plucker, sign_normalize,
                      unimodular, wedge)
from .parallel import pmap
from .selberg import SpectralParameter, as_param

GUARDRAILS = {1: 10**9, 2: 1000, 3: 30, 4: 6}
CHUNK = 1 << 16

Field = Callable[[np.ndarray], complex]


# -- cosets -----------------------------------------------------------------


def _level_basis(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic complement Q of the columns of P (n x (j-1)) together
    with A whose columns are p_{j-1} wedge q_i, LLL-reduced in step."""
    n, jm1 = P.shape
    j = jm1 + 1
    C = complete_basis(P) if jm1 else np.eye(n, dtype=np.int64)
    Q = C[:, jm1:]
    if jm1 == 0:
        return Q, Q.copy()
    p = plucker(P)
    A = np.stack([wedge(p, Q[:, i], n, j) for i in range(Q.shape[1])], axis=1)
    if A.shape[1] > 1:
        U = lll_gram(A.T.astype(float) @ A.astype(float))
        Q = Q @ U
        A = A @ U
    return Q, A


def _first_nonzero_positive(K: np.ndarray) -> np.ndarray:
    """Mask of rows whose first nonzero entry is positive."""
    nz = K != 0
    first = np.argmax(nz, axis=1)
    vals = K[np.arange(len(K)), first]
    return nz.any(axis=1) & (vals > 0)


def _primitive_rows(K: np.ndarray) -> np.ndarray:
    return np.gcd.reduce(np.abs(K), axis=1) == 1


def _box_candidates(A: np.ndarray, H: int) -> np.ndarray:
    """All primitive k (first nonzero positive) with ||A k||_inf <= H."""
    m = A.shape[1]
    Af = A.astype(float)
    pinv = np.linalg.pinv(Af)
    rad = np.floor(np.sqrt(np.sum(pinv**2, axis=1)) * H * math.sqrt(A.shape[0]) + 1e-9).astype(int)
    if m == 1:
        K = np.arange(1, rad[0] + 1, dtype=np.int64)[:, None]
    else:
        axes = [np.arange(0, rad[0] + 1, dtype=np.int64)] + [
            np.arange(-r, r + 1, dtype=np.int64) for r in rad[1:]]
        K = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        K = K[_first_nonzero_positive(K)]
    K = K[_primitive_rows(K)]
    ok = np.max(np.abs(K @ A.T), axis=1) <= H
    return K[ok]


@dataclass(frozen=True)
class CosetTable:
    n: int
    H: int
    pl: tuple  # pl[j-1]: (N, C(n, j)) int64 Plucker rows of L_j, j = 1..n-1

    def __len__(self) -> int:
        return len(self.pl[0]) if self.pl else 1


def _primitive_vectors(n: int, H: int) -> np.ndarray:
    axes = [np.arange(-H, H + 1, dtype=np.int64)] * n
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    X = X[_first_nonzero_positive(X)]
    return X[_primitive_rows(X)]


@lru_cache(maxsize=8)
def coset_table(n: int, H: int) -> CosetTable:
    """All flags of Plucker height <= H, sorted lexicographically by their
    concatenated Plucker vectors."""
    if n < 1:
        raise InputError("n must be positive")
    if H < 1:
        raise InputError("H must be at least 1")
    if n > 4 or H > GUARDRAILS[n]:
        raise GuardrailExceeded(f"coset enumeration for n={n}, H={H} exceeds the guardrail")
    if n == 1:
        return CosetTable(1, H, ())
    U = _primitive_vectors(n, H)
    if n == 2:
        rows = [[U]]
    else:
        rows = []
        for u in U:
            rows.extend(_extend_flags(np.asarray(u)[:, None], n, H))
    levels = [np.concatenate([r[j] for r in rows]) for j in range(n - 1)]
    key = np.concatenate(levels, axis=1)
    order = np.lexsort(key.T[::-1])
    return CosetTable(n, H, tuple(np.ascontiguousarray(L[order]) for L in levels))


def _extend_flags(P: np.ndarray, n: int, H: int) -> list:
    """Flags starting with the columns of P; returns a list of per-level
    Plucker arrays (one list entry per completed branch batch)."""
    j = P.shape[1] + 1
    Q, A = _level_basis(P)
    K = _box_candidates(A, H)
    if len(K) == 0:
        return []
    p_prev = [plucker(P[:, :i]) for i in range(1, j)]
    new = K @ A.T
    if j == n - 1:
        cols = [np.repeat(p[None, :], len(K), axis=0) for p in p_prev] + [new]
        return [cols]
    out = []
    for k in K:
        v = Q @ k
        out.extend(_extend_flags(np.column_stack([P, v]), n, H))
    return out


@dataclass(frozen=True)
class CosetRep:
    M: np.ndarray

    def key(self) -> tuple:
        return tuple(int(t) for t in self.M.ravel())

    def flag(self) -> tuple:
        n = len(self.M)
        return tuple(tuple(plucker(self.M[:, :j]).tolist()) for j in range(1, n))


def canonicalize(M) -> CosetRep:
    """Canonical representative of M modulo the upper-triangular subgroup
    (with +-1 diagonal): column 1 is the sign-normalized first column, and
    each later column is the sign-normalized solution k of
    p_j = +-(p_{j-1} wedge Q k) in the deterministic complement Q of the
    previous columns (the last column uses k = +1)."""
    M = unimodular(M)
    n = len(M)
    cols = np.zeros((n, 0), dtype=np.int64)
    for j in range(1, n + 1):
        if j == 1:
            c = sign_normalize(M[:, 0])
        else:
            Q, A = _level_basis(cols)
            if j == n:
                c = Q[:, 0]
            else:
                target = plucker(M[:, :j]).astype(float)
                k = np.linalg.lstsq(A.astype(float), target, rcond=None)[0]
                k = sign_normalize(np.rint(k).astype(np.int64))
                c = Q @ k
        cols = np.column_stack([cols, c])
    return CosetRep(cols)


def _flag_matrix(pl_rows: list, n: int) -> np.ndarray:
    """Canonical matrix of the flag given by its Plucker vectors."""
    cols = np.zeros((n, 0), dtype=np.int64)
    for j in range(1, n + 1):
        if j == 1:
            c = pl_rows[0]
        else:
            Q, A = _level_basis(cols)
            if j == n:
                c = Q[:, 0]
            else:
                k = np.linalg.lstsq(A.astype(float), pl_rows[j - 1].astype(float), rcond=None)[0]
                c = Q @ sign_normalize(np.rint(k).astype(np.int64))
        cols = np.column_stack([cols, c])
    return cols


def enumerate_cosets(n: int, H: int) -> list[CosetRep]:
    """Canonical representatives of all cosets of Plucker height <= H."""
    T = coset_table(n, H)
    if n == 1:
        return [CosetRep(np.eye(1, dtype=np.int64))]
    return [CosetRep(_flag_matrix([T.pl[j][i] for j in range(n - 1)], n)) for i in range(len(T))]


# -- the series -------------------------------------------------------------


@dataclass
class EisensteinValue:
    value: complex
    terms: int
    H: int
    tail_estimate: float | None = None
    wall_time_ms: float = 0.0
    notes: list = field(default_factory=list)

    def to_json(self, s=None, Y=None) -> dict:
        out = {}
        if s is not None:
            out["s"] = as_param(s).real_if_close()
        if Y is not None:
            Y = np.asarray(Y)
            out["n"] = len(Y)
            out["Y"] = Y.tolist()
        out.update({
            "H": self.H,
            "terms": self.terms,
            "value": {"re": self.value.real, "im": self.value.imag},
            "tail_estimate": self.tail_estimate,
            "wall_time_ms": self.wall_time_ms,
        })
        return out


def _check_region(s: SpectralParameter) -> None:
    if any(z.real <= 1 for z in s.s):
        raise InputError("the series is only summed for Re(s_j) > 1")


def _summands(T: CosetTable, s: SpectralParameter, L: np.ndarray, lo: int, hi: int) -> np.ndarray:
    n = T.n
    logsum = np.zeros(hi - lo, dtype=complex)
    for j in range(1, n):
        Cj = compound(L, j)
        Z = T.pl[j - 1][lo:hi].astype(float) @ Cj
        logsum -= s.s[j - 1] * np.log(np.einsum("ij,ij->i", Z, Z))
    return np.exp(logsum)


def _chunk_sum(vals: np.ndarray) -> tuple[float, float]:
    return math.fsum(vals.real.tolist()), math.fsum(vals.imag.tolist())


def _truncated(s: SpectralParameter, Y: np.ndarray, H: int, threads=None) -> tuple[complex, int]:
    n = len(Y)
    if n == 1:
        return 1 + 0j, 1
    T = coset_table(n, H)
    L = cholesky(Y)
    N = len(T)
    bounds = [(lo, min(lo + CHUNK, N)) for lo in range(0, N, CHUNK)]
    parts = pmap(lambda b: _chunk_sum(_summands(T, s, L, *b)), bounds, threads)
    re = math.fsum(p[0] for p in parts)
    im = math.fsum(p[1] for p in parts)
    return complex(re, im), N


def eisenstein_series(s, Y, H: int = 50, tail: str = "none", threads=None,
                      require_unit_det: bool = True) -> EisensteinValue:
    """Sum of p_{-s}(Y[gamma]) over cosets of Plucker height <= H.

    tail="heuristic" adds an estimate of the omitted part from the decay
    exponent 2 min Re(s_j) - 2, reported separately and never added.
    """
    t0 = time.perf_counter()
    s = as_param(s)
    Y = unit_det(Y) if require_unit_det else spd_matrix(Y)
    n = len(Y)
    if n == 1:
        return EisensteinValue(1 + 0j, 1, H, 0.0 if tail == "heuristic" else None)
    if len(s.s) != n - 1:
        raise InputError(f"expected {n - 1} spectral parameters, got {len(s.s)}")
    if tail not in ("none", "heuristic"):
        raise InputError(f"unknown tail mode {tail!r}")
    _check_region(s)
    value, terms = _truncated(s, Y, H, threads)
    est = None
    if tail == "heuristic":
        delta = 2 * min(z.real for z in s.s) - 2
        if H >= 2:
            coarse, _ = _truncated(s, Y, H // 2, threads)
            r = 2.0 ** (-delta)
            est = abs(value - coarse) * r / (1 - r)
        else:
            est = float("nan")
    ms = (time.perf_counter() - t0) * 1e3
    return EisensteinValue(value, terms, H, est, ms)


def eisenstein_field(s, H: int = 50, threads=None) -> Field:
    s = as_param(s)
    return lambda Y: eisenstein_series(s, Y, H, threads=threads, require_unit_det=False).value


# -- block identities for gamma acting on [v, x, W] --------------------------


def gamma_blocks(p: PartialIwasawa, gamma) -> tuple[float, np.ndarray, np.ndarray]:
    """(alpha, q, R) with Y[gamma] = [[alpha, q], [q^T, R]] for
    gamma = [[a, b^T], [c, D]]:

        alpha = v^-1 (a + c.x)^2 + v^{1/(n-1)} W[c]
        q     = v^-1 (a + c.x)(b^T + x^T D) + v^{1/(n-1)} c^T W D
        R     = v^-1 (b + D^T x)(b^T + x^T D) + v^{1/(n-1)} W[D]
    """
    g = np.asarray(gamma, dtype=float)
    n = p.n
    a, b, c, D = g[0, 0], g[0, 1:], g[1:, 0], g[1:, 1:]
    x, W, v = np.asarray(p.x), np.asarray(p.W), p.v
    e = v ** (1 / (n - 1))
    t = a + c @ x
    row = b + x @ D
    alpha = t**2 / v + e * (c @ W @ c)
    q = t * row / v + e * (c @ W @ D)
    R = np.outer(row, row) / v + e * (D.T @ W @ D)
    return float(alpha), q, R


# -- Fourier coefficients and block integrals ---------------------------------


def _torus_mean(g: Callable[[np.ndarray], complex], dim: int, M: int) -> complex:
    pts = np.arange(M) / M
    acc = []
    for idx in product(range(M), repeat=dim):
        acc.append(complex(g(pts[list(idx)])))
    arr = np.array(acc)
    return complex(math.fsum(arr.real.tolist()), math.fsum(arr.imag.tolist())) / M**dim


def fourier_coefficient(f: Field, N, v: float, W, M: int = 16, tol: float | None = None) -> complex:
    """Trapezoid approximation of the x-integral over [0,1]^{n-1} of
    f([v, x, W]) exp(-2 pi i x.N). With tol set, the rule is repeated with
    2M points and NonConvergence raised if the two differ by more than
    10 tol."""
    N = np.atleast_1d(np.asarray(N, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if len(N) != len(W):
        raise InputError("N must have length n-1")
    if M < 8:
        raise InputError("need at least 8 quadrature points per dimension")

    def g(x):
        return f(PartialIwasawa(v, x, W).matrix()) * np.exp(-2j * np.pi * (x @ N))

    val = _torus_mean(g, len(N), M)
    if tol is not None:
        fine = _torus_mean(g, len(N), 2 * M)
        if abs(fine - val) > 10 * tol * max(1.0, abs(fine)):
            raise NonConvergence(f"Fourier quadrature moved by {abs(fine - val):.3g}")
        val = fine
    return val


def cuspidality_defect(f: Field, j: int, Y, M: int = 16, tol: float | None = None) -> complex:
    """Integral over X in (R/Z)^{j x (n-j)} of f(Y[[I_j, X], [0, I_{n-j}]])."""
    Y = spd_matrix(Y)
    n = len(Y)
    if not 1 <= j <= n - 1:
        raise InputError("j must lie in 1..n-1")
    if M < 8:
        raise InputError("need at least 8 quadrature points per dimension")
    dim = j * (n - j)

    def g(xs):
        U = np.eye(n)
        U[:j, j:] = np.reshape(xs, (j, n - j))
        return f(congruence(Y, U))

    val = _torus_mean(g, dim, M)
    if tol is not None:
        fine = _torus_mean(g, dim, 2 * M)
        if abs(fine - val) > 10 * tol * max(1.0, abs(fine)):
            raise NonConvergence("block integral quadrature did not settle")
        val = fine
    return val


# -- rank-one K-Bessel --------------------------------------------------------

_XK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])


def _gk15(g, a: float, b: float) -> tuple[complex, float]:
    c, h = (a + b) / 2, (b - a) / 2
    x = np.concatenate([c - h * _XK, c + h * _XK[-2::-1]])
    fx = g(x)
    f_left, f_right = fx[:8], fx[8:][::-1]
    k = h * (np.sum(_WK[:7] * (f_left[:7] + f_right)) + _WK[7] * f_left[7])
    gauss = h * (np.sum(_WG[:3] * (f_left[1:7:2] + f_right[1::2])) + _WG[3] * f_left[7])
    return k, abs(k - gauss)


def adaptive_gk(g, a: float, b: float, rtol: float = 1e-13, atol: float = 0.0,
                max_intervals: int = 2000) -> tuple[complex, float]:
    """Globally adaptive Gauss-Kronrod (7/15) on [a, b]."""
    ivs = [(a, b, *_gk15(g, a, b))]
    for _ in range(max_intervals):
        total = sum(iv[2] for iv in ivs)
        err = sum(iv[3] for iv in ivs)
        if err <= max(atol, rtol * abs(total)):
            return total, err
        i = max(range(len(ivs)), key=lambda t: ivs[t][3])
        lo, hi, _, _ = ivs.pop(i)
        mid = (lo + hi) / 2
        ivs.append((lo, mid, *_gk15(g, lo, mid)))
        ivs.append((mid, hi, *_gk15(g, mid, hi)))
    raise NonConvergence("K-Bessel quadrature tolerance not met")


def k_bessel_rank1(s, a: float, b: float, rtol: float = 1e-13, sign: str = "decaying") -> complex:
    """Integral over y > 0 of y^s exp(-(a y + b / y)) dy / y, computed in
    t = log y where the integrand exp(s t - a e^t - b e^-t) is concentrated
    around the maximum of its real exponent."""
    if sign != "decaying":
        raise Unsupported("the growing exponential makes the integral diverge for a, b > 0")
    if not (a > 0 and b > 0):
        raise InputError("a and b must be positive")
    s = complex(s)
    sr = s.real

    def expo(t):
        return sr * t - a * np.exp(t) - b * np.exp(-t)

    # maximum of the concave real exponent: a e^t - b e^-t = sr
    lo, hi = -1.0, 1.0
    while a * math.exp(lo) - b * math.exp(-lo) > sr:
        lo *= 2
    while a * math.exp(hi) - b * math.exp(-hi) < sr:
        hi *= 2
    for _ in range(200):
        mid = (lo + hi) / 2
        if a * math.exp(mid) - b * math.exp(-mid) < sr:
            lo = mid
        else:
            hi = mid
    t0 = (lo + hi) / 2
    peak = expo(t0)
    cut = peak - 80.0
    left = t0 - 1.0
    while expo(left) > cut:
        left = t0 - 2 * (t0 - left)
    right = t0 + 1.0
    while expo(right) > cut:
        right = t0 + 2 * (right - t0)

    def g(t):
        return np.exp(s * t - a * np.exp(t) - b * np.exp(-t) - peak)

    val, _ = adaptive_gk(g, left, right, rtol=rtol)
    val = val * math.exp(peak)
    return val if s.imag != 0 else complex(val.real, 0.0)


# -- Grenier operator and stable chains ----------------------------------------


@dataclass
class LimitReport:
    limit: complex
    converged: bool
    exponent: complex
    schedule: list
    scaled: list
    rate: float | None

    def to_json(self) -> dict:
        return {
            "limit": {"re": self.limit.real, "im": self.limit.imag},
            "converged": self.converged,
            "exponent": {"re": self.exponent.real, "im": self.exponent.imag},
            "rate": self.rate,
            "series": [{"v": v, "re": z.real, "im": z.imag} for v, z in zip(self.schedule, self.scaled)],
        }


def grenier_exponent(s) -> complex:
    s = as_param(s)
    if not s.s:
        return 0j
    return s.s[0] + s.xi()[0]


def grenier_operator(f: Field, s, W, v_schedule, x_probe=None, tol: float = 1e-2,
                     exponent_shift: float = 0.0) -> LimitReport:
    """Evaluate v^{-(s_1 + xi_1)} f([v, x, W]) along an increasing schedule.

    The limit estimate is the value at the largest v; the run counts as
    converged when the last two values agree to ``tol`` relative. The rate
    is the slope of log |g(v_i) - g(v_last)| against log v.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    vs = [float(v) for v in v_schedule]
    if len(vs) < 3 or any(b <= a for a, b in zip(vs, vs[1:])) or vs[0] <= 0:
        raise InputError("schedule needs at least 3 increasing positive points")
    if vs[-1] / vs[0] < 100:
        raise InputError("schedule must span at least two decades")
    x = np.zeros(len(W)) if x_probe is None else np.asarray(x_probe, dtype=float)
    e = grenier_exponent(s) + exponent_shift
    scaled = [complex(np.exp(-e * math.log(v)) * f(PartialIwasawa(v, x, W).matrix())) for v in vs]
    last = scaled[-1]
    converged = abs(scaled[-1] - scaled[-2]) <= tol * max(abs(last), 1e-300)
    diffs = [abs(z - last) for z in scaled[:-1]]
    rate = None
    pts = [(math.log(v), math.log(d)) for v, d in zip(vs, diffs) if d > 0]
    if len(pts) >= 2:
        X = np.array(pts)
        rate = float(np.polyfit(X[:, 0], X[:, 1], 1)[0])
    return LimitReport(last, bool(converged), e, vs, scaled, rate)


@dataclass
class ChainReport:
    levels: list
    tol: float

    @property
    def ok(self) -> bool:
        return all(r["rel_error"] < self.tol for r in self.levels)

    def to_json(self) -> dict:
        return {"tol": self.tol, "ok": self.ok, "levels": self.levels}


def stable_chain_check(s, n_max: int, probes: dict | None = None, H: int = 20, v: float = 1e3,
                       tol: float = 1e-2, x_probe: dict | None = None,
                       exponent_shift: float = 0.0, threads=None) -> ChainReport:
    """Check that v^{-(s_1+xi_1)} E_n(s, [v, x, W]) matches E_{n-1}(tail s, W)
    for n = n_max down to 2, where the parameter one level down drops s_1.

    ``probes`` maps the level n to a list of W in the det-one slice of size
    n-1; the identity is used when absent.
    """
    s = as_param(s)
    if n_max < 2 or n_max > 3:
        raise InputError("stable chains are checked for n_max in {2, 3}")
    if len(s.s) != n_max - 1:
        raise InputError("s must have n_max - 1 entries")
    _check_region(s)
    probes = probes or {}
    x_probe = x_probe or {}
    levels = []
    cur = s
    for n in range(n_max, 1, -1):
        Ws = probes.get(n) or [np.eye(n - 1)]
        x = np.asarray(x_probe.get(n, 0.3 * np.ones(n - 1)), dtype=float)
        e = grenier_exponent(cur) + exponent_shift
        below = cur.tail()
        for W in Ws:
            W = unit_det(W) if n > 2 else np.ones((1, 1))
            Y = PartialIwasawa(v, x, W).matrix()
            top = eisenstein_series(cur, Y, H, threads=threads, require_unit_det=False).value
            scaled = top * np.exp(-e * math.log(v))
            ref = eisenstein_series(below, W, H, threads=threads).value if n > 2 else 1 + 0j
            err = abs(scaled - ref) / abs(ref)
            levels.append({"n": n, "v": v, "H": H, "W": W.tolist(),
                           "scaled": {"re": scaled.real, "im": scaled.imag},
                           "reference": {"re": ref.real, "im": ref.imag},
                           "rel_error": float(err)})
        cur = below
    return ChainReport(levels, tol)
