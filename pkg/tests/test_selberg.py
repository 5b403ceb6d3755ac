from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import random_spd, random_upper
from hypothesis import given, settings
from hypothesis import strategies as st

from pnlab.core import congruence
from pnlab.errors import InputError
from pnlab.selberg import (SpectralParameter, haar_orthogonal, phi_character, power_function,
                           r_from_s, s_from_z, spherical_function, tau_character)

seeds = st.integers(0, 2**32 - 1)


def test_power_function_examples():
    assert power_function([0.3, -1.2, 2.0], np.eye(3)) == 1
    assert power_function([1, 2], np.diag([1.0, 4.0])) == pytest.approx(16, rel=1e-14)


def test_power_function_shorter_parameter():
    # p_{(s)} on n=2 is y11^s
    assert power_function([2.0], np.array([[3.0, 1.0], [1.0, 2.0]])) == pytest.approx(9.0)


def test_power_function_rejects_long_parameter():
    with pytest.raises(InputError):
        power_function([1, 2, 3], np.eye(2))


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(2, 5))
def test_multiplicativity_and_tau(seed, n):
    rng = np.random.default_rng(seed)
    Y = random_spd(rng, n, 0.3)
    t = random_upper(rng, n)
    s = rng.uniform(-2, 2, n) + 1j * rng.uniform(-2, 2, n)
    It = t.T @ t
    rhs = power_function(s, It) * power_function(s, Y)
    assert abs(power_function(s, congruence(Y, t)) - rhs) <= 1e-12 * abs(rhs)
    tau = tau_character(r_from_s(s), t)
    assert abs(power_function(s, It) - tau) <= 1e-12 * abs(tau)


def test_tau_character_examples_and_homomorphism(rng):
    assert tau_character([1, 2], np.eye(2)) == 1
    assert tau_character([1, 2], np.diag([2.0, 3.0])) == pytest.approx(18)
    r = [0.5 + 1j, -1.0, 2.0]
    for _ in range(20):
        t1, t2 = random_upper(rng, 3), random_upper(rng, 3)
        prod = tau_character(r, t1) * tau_character(r, t2)
        assert abs(tau_character(r, t1 @ t2) - prod) <= 1e-12 * abs(prod)


def test_tau_rejects_lower_triangular():
    with pytest.raises(InputError):
        tau_character([1, 1], [[1.0, 0.0], [1.0, 1.0]])


def test_phi_character_examples(rng):
    assert phi_character([0.3, 0.1], np.eye(2)) == 1
    assert phi_character([1, 0], np.diag([2.0, 1.0])).real == pytest.approx(2**1.5)
    for _ in range(10):
        z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        t = random_upper(rng, 3)
        val = power_function(s_from_z(z), t.T @ t)
        assert abs(phi_character(z, t) - val) <= 1e-12 * abs(val)


def test_spectral_parameter_xi():
    s = SpectralParameter((2.0, 2.0))
    assert s.n == 3
    assert s.xi()[0] == pytest.approx(1.0)
    assert s.xi()[-1] == 0
    s4 = SpectralParameter((1.0, 2.0, 3.0))
    # xi_1 = (1/3)(2 s_2 + s_3), xi_2 = (1/2) s_3
    assert s4.xi()[0] == pytest.approx((2 * 2.0 + 3.0) / 3)
    assert s4.xi()[1] == pytest.approx(1.5)


def test_haar_orthogonal_properties():
    rng = np.random.default_rng(5)
    for n in (2, 3, 5):
        k = haar_orthogonal(rng, n)
        assert np.allclose(k.T @ k, np.eye(n), atol=1e-12)
    draws = np.array([haar_orthogonal(rng, 1)[0, 0] for _ in range(10_000)])
    assert set(np.unique(draws)) == {-1.0, 1.0}
    frac = np.mean(draws > 0)
    assert abs(frac - 0.5) < 3 * 0.5 / math.sqrt(10_000)
    n = 3
    cols = np.array([haar_orthogonal(rng, n)[:, 0] for _ in range(10_000)])
    assert np.linalg.norm(cols.mean(axis=0)) < 3 * math.sqrt(n) * 1e-2


def test_spherical_exact_cases():
    r = spherical_function([1.0, 2.0], np.eye(3))
    assert r.estimate == 1 and r.stderr == 0
    r = spherical_function([1.5], np.array([[2.0]]))
    assert r.estimate == pytest.approx(2**1.5)
    with pytest.raises(InputError):
        spherical_function([1.0], np.eye(2) * 2, samples=10)


def test_spherical_k_invariance(rng):
    Y = random_spd(rng, 3)
    k0 = haar_orthogonal(rng, 3)
    s = [0.7, -0.4]
    a = spherical_function(s, Y, samples=20_000, seed=1)
    b = spherical_function(s, congruence(Y, k0), samples=20_000, seed=2)
    assert abs(a.estimate - b.estimate) <= 3 * (a.stderr + b.stderr)


def test_spherical_reproducible_and_stderr_scaling(rng):
    Y = random_spd(rng, 2)
    s = [1.2]
    errs = []
    for N in (1000, 10_000, 100_000):
        r1 = spherical_function(s, Y, samples=N, seed=4, threads=1)
        r2 = spherical_function(s, Y, samples=N, seed=4, threads=3)
        assert r1 == r2
        errs.append(r1.stderr)
    for a, b in zip(errs, errs[1:]):
        assert 0.5 < (a / b) / math.sqrt(10) < 2


def test_spherical_zero_parameter_is_one(rng):
    r = spherical_function([0.0, 0.0], random_spd(rng, 3), samples=500)
    assert r.estimate == pytest.approx(1.0) and r.stderr == pytest.approx(0.0, abs=1e-12)
