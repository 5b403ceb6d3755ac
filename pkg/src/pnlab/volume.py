"""Volume of the fundamental domain: the closed product formula and a Monte
Carlo estimate over the Siegel set S_{4/3,1/2}, which contains every
sign-conjugate of the Grenier domain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import zeta

from .core import PartialIwasawa
from .errors import InputError, NonConvergence
from .parallel import pmap, shard_rngs, shard_sizes
from .reduction import grenier_membership, grenier_membership_n2

SHARDS = 16
C_SIEGEL = math.sqrt(3) / 2  # (4/3)^{-1/2}


def sphere_volume(k: int) -> float:
    """Volume of the unit sphere S^{k-1} in R^k."""
    return 2 * math.pi ** (k / 2) / float(gamma_fn(k / 2))


def siegel_volume(n: int) -> float:
    """n 2^{n-1} prod_{k=2}^n zeta(k) / Vol(S^{k-1}) for SL(n, Z)."""
    if n < 2:
        raise InputError("n must be at least 2")
    out = n * 2.0 ** (n - 1)
    for k in range(2, n + 1):
        out *= float(zeta(k)) / sphere_volume(k)
    return out


def lambda_product(n: int) -> float:
    """prod_{k=2}^n pi^{-k/2} Gamma(k/2) zeta(k), the classical volume of
    GL(n,Z)/{+-I} acting on the det-one slice with the recursive measure
    v^{-(n+2)/2} dv dx dmu_{n-1}."""
    out = 1.0
    for k in range(2, n + 1):
        out *= math.pi ** (-k / 2) * float(gamma_fn(k / 2)) * float(zeta(k))
    return out


def gamma_index(n: int) -> int:
    """Volume ratio between the SL(n,Z) quotient and the GL(n,Z)/{+-I}
    quotient: 2 for even n, 1 for odd n (where GL(n,Z)/{+-I} acts as
    SL(n,Z))."""
    return 2 if n % 2 == 0 else 1


def siegel_set_measure(n: int) -> float:
    """Invariant measure of S_{4/3,1/2} in the det-one slice (n = 2, 3)."""
    c = C_SIEGEL
    if n == 2:
        return 1 / c
    if n == 3:
        return c**-4 / 3
    raise InputError("Monte Carlo volume supports n in {2, 3}")


@dataclass
class VolumeResult:
    n: int
    estimate: float
    stderr: float
    samples: int
    formula_sl: float
    index: int

    @property
    def target(self) -> float:
        return self.formula_sl / self.index

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "samples": self.samples,
            "formula_SL": self.formula_sl,
            "index": self.index,
            "target": self.target,
            "lambda_product": lambda_product(self.n),
        }


def _shard_n2(rng: np.random.Generator, m: int) -> tuple[int, int]:
    v = C_SIEGEL / (1 - rng.random(m))
    x = rng.random(m) - 0.5
    return int(np.count_nonzero(grenier_membership_n2(v, x))), m


def sample_n3(rng: np.random.Generator):
    c = C_SIEGEL
    v2 = c * (1 - rng.random()) ** -0.5
    v0 = c ** (4 / 3) * v2 ** (2 / 3)
    v = v0 * (1 - rng.random()) ** (-2 / 3)
    x = rng.random(2) - 0.5
    xw = rng.random() - 0.5
    W = PartialIwasawa(v2, np.array([xw]), np.ones((1, 1))).matrix()
    return PartialIwasawa(v, x, W).matrix()


def _shard_n3(rng: np.random.Generator, m: int) -> tuple[int, int]:
    hits = 0
    for _ in range(m):
        if grenier_membership(sample_n3(rng), strict=True):
            hits += 1
    return hits, m


def volume_mc(n: int, samples: int = 10**6, seed: int = 0, threads: int | None = None,
              max_rel_stderr: float | None = None) -> VolumeResult:
    """Hit-or-miss estimate of the invariant volume of the Grenier domain.

    Points are drawn from S_{4/3,1/2} with density proportional to the
    invariant measure, so the estimate is measure(S) * (hit fraction). n = 3
    uses the |x_j| <= 1/2 box for the domain.
    """
    S = siegel_set_measure(n)
    if samples < 1:
        raise InputError("need at least one sample")
    rngs = shard_rngs(seed, SHARDS)
    sizes = shard_sizes(samples, SHARDS)
    fn = _shard_n2 if n == 2 else _shard_n3
    parts = pmap(lambda i: fn(rngs[i], sizes[i]), range(SHARDS), threads)
    hits = sum(p[0] for p in parts)
    p = hits / samples
    est = S * p
    err = S * math.sqrt(p * (1 - p) / samples)
    res = VolumeResult(n, est, err, samples, siegel_volume(n), gamma_index(n))
    if max_rel_stderr is not None and err > max_rel_stderr * est:
        raise NonConvergence(f"standard error {err:.3g} above the requested tolerance")
    return res
