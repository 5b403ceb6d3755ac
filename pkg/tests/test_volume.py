from __future__ import annotations

import math

import mpmath
import pytest

from pnlab.errors import InputError, NonConvergence
from pnlab.volume import (gamma_index, lambda_product, siegel_set_measure, siegel_volume,
                          sphere_volume, volume_mc)


def test_sphere_volume_low_dimensions():
    assert sphere_volume(2) == pytest.approx(2 * math.pi)
    assert sphere_volume(3) == pytest.approx(4 * math.pi)
    assert sphere_volume(4) == pytest.approx(2 * math.pi**2)


def test_formula_against_mpmath():
    for n in (2, 3, 4, 5):
        ref = n * mpmath.mpf(2) ** (n - 1)
        for k in range(2, n + 1):
            ref *= mpmath.zeta(k) * mpmath.gamma(mpmath.mpf(k) / 2) / (2 * mpmath.pi ** (mpmath.mpf(k) / 2))
        assert siegel_volume(n) == pytest.approx(float(ref), rel=1e-13)
    assert siegel_volume(2) == pytest.approx(math.pi / 3, rel=1e-14)
    assert abs(siegel_volume(3) - 0.3005142) < 1e-7
    with pytest.raises(InputError):
        siegel_volume(1)


def test_index_bookkeeping():
    assert gamma_index(2) == 2 and gamma_index(3) == 1
    assert lambda_product(2) == pytest.approx(siegel_volume(2) / gamma_index(2))


def test_mc_n2_close_to_target():
    r = volume_mc(2, samples=200_000, seed=11)
    assert abs(r.estimate - r.target) / r.target < 0.02
    assert abs(r.estimate - r.target) < 4 * r.stderr
    assert r.to_json()["index"] == 2


def test_mc_stderr_scaling():
    a = volume_mc(2, samples=50_000, seed=3)
    b = volume_mc(2, samples=100_000, seed=3)
    assert abs(a.stderr / b.stderr / math.sqrt(2) - 1) < 0.5
    c = volume_mc(2, samples=200_000, seed=3)
    assert a.stderr / c.stderr == pytest.approx(2.0, rel=0.1)


def test_mc_n3_matches_lambda_product():
    r = volume_mc(3, samples=6000, seed=5)
    assert abs(r.estimate - lambda_product(3)) < 4 * r.stderr
    assert r.estimate < siegel_set_measure(3)


def test_mc_reproducible_across_threads():
    runs = {volume_mc(2, samples=30_000, seed=9, threads=t).estimate for t in (1, 2, 5)}
    assert len(runs) == 1


def test_mc_errors():
    with pytest.raises(InputError):
        volume_mc(4, samples=10)
    with pytest.raises(InputError):
        volume_mc(2, samples=0)
    with pytest.raises(NonConvergence):
        volume_mc(2, samples=100, max_rel_stderr=1e-4)
