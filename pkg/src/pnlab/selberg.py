"""Power functions, triangular characters and Monte Carlo spherical
functions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import cholesky, spd_matrix
from .errors import InputError
from .parallel import pmap, shard_rngs, shard_sizes

SHARDS = 16


@dataclass(frozen=True)
class SpectralParameter:
    s: tuple

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(complex(z) for z in np.atleast_1d(self.s)))

    @property
    def n(self) -> int:
        """Dimension for an Eisenstein parameter (length n - 1)."""
        return len(self.s) + 1

    def xi(self) -> tuple:
        """xi_j = (1/(n-j)) sum_{k>j} (n-k) s_k, 1-based j; xi_{n-1} = 0."""
        n = self.n
        out = []
        for j in range(1, n):
            tot = sum((n - k) * self.s[k - 1] for k in range(j + 1, n))
            out.append(tot / (n - j))
        return tuple(out)

    def tail(self) -> "SpectralParameter":
        """(s_2, ..., s_{n-1}), the parameter one level down."""
        return SpectralParameter(self.s[1:])

    def real_if_close(self):
        if all(z.imag == 0 for z in self.s):
            return [z.real for z in self.s]
        return [[z.real, z.imag] for z in self.s]


def as_param(s) -> SpectralParameter:
    return s if isinstance(s, SpectralParameter) else SpectralParameter(s)


def leading_minors(Y) -> np.ndarray:
    """det Y_1, ..., det Y_n from running products of Cholesky pivots."""
    L = cholesky(spd_matrix(Y))
    return np.cumprod(np.diag(L) ** 2)


def log_leading_minors(Y) -> np.ndarray:
    L = cholesky(spd_matrix(Y))
    return np.cumsum(2 * np.log(np.diag(L)))


def power_function(s, Y) -> complex:
    """p_s(Y) = prod_j (det Y_j)^{s_j}; s may have length n or less."""
    s = np.asarray(as_param(s).s, dtype=complex)
    logm = log_leading_minors(Y)
    if len(s) > len(logm):
        raise InputError("parameter longer than matrix dimension")
    return complex(np.exp(np.sum(s * logm[: len(s)])))


def _triangular(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise InputError("expected a square matrix")
    if np.any(np.tril(t, -1) != 0):
        raise InputError("matrix is not upper triangular")
    if np.any(np.diag(t) <= 0):
        raise InputError("triangular matrix needs a positive diagonal")
    return t


def tau_character(r, t) -> complex:
    t = _triangular(t)
    r = np.asarray(r, dtype=complex)
    if len(r) != len(t):
        raise InputError("length of r must equal n")
    return complex(np.exp(np.sum(r * np.log(np.diag(t)))))


def r_from_s(s) -> np.ndarray:
    """r_j = 2 (s_j + ... + s_n)."""
    s = np.asarray(as_param(s).s, dtype=complex)
    return 2 * np.cumsum(s[::-1])[::-1]


def phi_exponents(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    n = len(z)
    return 2 * z + np.arange(1, n + 1) - (n + 1) / 2


def s_from_z(z) -> np.ndarray:
    """Back-substitute 2(s_j + ... + s_n) = 2 z_j + j - (n+1)/2."""
    r = phi_exponents(z)
    s = np.empty_like(r)
    s[-1] = r[-1] / 2
    s[:-1] = (r[:-1] - r[1:]) / 2
    return s


def phi_character(z, t) -> complex:
    return tau_character(phi_exponents(z), t)


def haar_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    while True:
        G = rng.standard_normal((n, n))
        Q, R = np.linalg.qr(G)
        d = np.diag(R)
        if np.all(d != 0):
            return Q * np.sign(d)


@dataclass(frozen=True)
class MCResult:
    estimate: complex
    stderr: float
    samples: int


def _moments(values: np.ndarray) -> tuple[complex, float, int]:
    return complex(values.sum()), float(np.sum(np.abs(values) ** 2)), len(values)


def combine_moments(parts) -> MCResult:
    tot = sum(p[0] for p in parts)
    sq = sum(p[1] for p in parts)
    N = sum(p[2] for p in parts)
    mean = tot / N
    var = max(sq / N - abs(mean) ** 2, 0.0) * N / max(N - 1, 1)
    return MCResult(mean, math.sqrt(var / N), N)


def spherical_function(s, Y, samples: int = 10_000, seed: int = 0,
                       threads: int | None = None) -> MCResult:
    """h_s(Y) = integral over O(n) of p_s(Y[k]) dk by plain Monte Carlo."""
    Y = spd_matrix(Y)
    n = len(Y)
    s = as_param(s)
    if samples < 100:
        raise InputError("need at least 100 samples")
    if np.array_equal(Y, np.eye(n)):
        return MCResult(1 + 0j, 0.0, 0)
    if n == 1:
        return MCResult(power_function(s, Y), 0.0, 0)
    sv = np.asarray(s.s, dtype=complex)
    rngs = shard_rngs(seed, SHARDS)
    sizes = shard_sizes(samples, SHARDS)

    def shard(i):
        rng = rngs[i]
        vals = np.empty(sizes[i], dtype=complex)
        for m in range(sizes[i]):
            k = haar_orthogonal(rng, n)
            L = np.linalg.cholesky(k.T @ Y @ k)
            logm = np.cumsum(2 * np.log(np.diag(L)))
            vals[m] = np.exp(np.sum(sv * logm[: len(sv)]))
        return _moments(vals)

    return combine_moments(pmap(shard, range(SHARDS), threads))
