from __future__ import annotations

import itertools
import math

import mpmath
import numpy as np
import pytest
from conftest import random_det1, random_unimodular
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import kv

from pnlab.core import PartialIwasawa, congruence, partial_iwasawa
from pnlab.eisenstein import (canonicalize, coset_table, cuspidality_defect, eisenstein_field,
                              eisenstein_series, enumerate_cosets, fourier_coefficient,
                              gamma_blocks, grenier_exponent, grenier_operator, k_bessel_rank1,
                              stable_chain_check)
from pnlab.errors import GuardrailExceeded, InputError, Unsupported
from pnlab.lattice import int_det
from pnlab.selberg import power_function

seeds = st.integers(0, 2**32 - 1)


def _primitive_half(n, H):
    out = []
    for x in itertools.product(range(-H, H + 1), repeat=n):
        if math.gcd(*x) != 1:
            continue
        nz = [t for t in x if t]
        if nz[0] > 0:
            out.append(np.array(x))
    return out


def brute_e2(s, Y, H):
    return sum(float(u @ Y @ u) ** (-s) for u in _primitive_half(2, H))


def brute_e3(s1, s2, Y, H):
    """Flags in Z^3 as (line u, plane with primitive normal w), u.w = 0; the
    plane's Gram determinant is w^T adj(Y) w."""
    adj = np.linalg.det(Y) * np.linalg.inv(Y)
    P = _primitive_half(3, H)
    total = 0.0
    count = 0
    for u in P:
        qu = float(u @ Y @ u) ** (-s1)
        for w in P:
            if u @ w == 0:
                total += qu * float(w @ adj @ w) ** (-s2)
                count += 1
    return total, count


# -- cosets --------------------------------------------------------------------------


def test_coset_counts_n2():
    assert len(coset_table(2, 1)) == 4
    assert len(coset_table(2, 2)) == 8
    firsts = {tuple(c.M[:, 0]) for c in enumerate_cosets(2, 1)}
    assert firsts == {(1, 0), (0, 1), (1, 1), (1, -1)}


def test_coset_count_n3_matches_normal_vector_oracle():
    _, count = brute_e3(2.0, 2.0, np.eye(3), 2)
    assert len(coset_table(3, 2)) == count == 276


def test_identity_coset_present():
    for n, H in ((2, 1), (3, 1), (4, 1)):
        keys = {c.key() for c in enumerate_cosets(n, H)}
        assert canonicalize(np.eye(n, dtype=np.int64)).key() in keys


def test_enumerated_representatives_are_unimodular_and_canonical():
    for c in enumerate_cosets(3, 2):
        assert abs(int_det(c.M)) == 1
        assert canonicalize(c.M).key() == c.key()


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(2, 4))
def test_canonicalize_idempotent_and_coset_invariant(seed, n):
    rng = np.random.default_rng(seed)
    M = random_unimodular(rng, n, 4, 2)
    c = canonicalize(M)
    assert canonicalize(c.M).key() == c.key()
    t = np.triu(rng.integers(-3, 4, (n, n)), 1) + np.diag(rng.choice([-1, 1], n))
    assert canonicalize(M @ t).key() == c.key()
    # small entries keep the rounding of Y[M t] itself below the 1e-12 budget
    M = random_unimodular(rng, n, 3, 1)
    t = np.triu(rng.integers(-1, 2, (n, n)), 1) + np.diag(rng.choice([-1, 1], n))
    Y = random_det1(rng, n, 0.3)
    s = rng.uniform(1.5, 3, n - 1)
    a = power_function(-s, congruence(Y, M))
    b = power_function(-s, congruence(Y, M @ t))
    assert abs(a - b) <= 1e-12 * abs(a)


# -- the series ------------------------------------------------------------------------


def test_e1_is_one():
    assert eisenstein_series([], np.eye(1)).value == 1


def test_e2_matches_brute_force(rng):
    Y = random_det1(rng, 2)
    val = eisenstein_series([2.3], Y, H=25).value
    ref = brute_e2(2.3, Y, 25)
    assert val.real == pytest.approx(ref, rel=1e-12)


def test_e3_matches_normal_vector_brute_force(rng):
    Y = random_det1(rng, 3, 0.3)
    for H in (2, 3):
        val = eisenstein_series([2.5, 2.2], Y, H=H).value
        ref, _ = brute_e3(2.5, 2.2, Y, H)
        assert val.real == pytest.approx(ref, rel=1e-12)


def test_e2_closed_form_at_identity():
    exact = float(2 * mpmath.zeta(2) * mpmath.catalan / mpmath.zeta(4))
    val = eisenstein_series([2], np.eye(2), H=400, tail="heuristic")
    assert abs(val.value.real - exact) / exact < 1e-3
    assert val.tail_estimate is not None and val.tail_estimate > 0
    assert abs(val.value.real - exact) < 10 * val.tail_estimate


def test_e2_invariance():
    Y = PartialIwasawa(1.3, np.array([0.2]), np.ones((1, 1))).matrix()
    g = np.array([[1, 1], [0, 1]])
    S = np.array([[0, -1], [1, 0]])
    base = eisenstein_series([2.5], Y, H=200).value
    for gamma in (g, S, g @ S):
        other = eisenstein_series([2.5], congruence(Y, gamma), H=200).value
        assert abs(other - base) / abs(base) < 1e-6


def test_complex_parameter_conjugation(rng):
    Y = random_det1(rng, 2)
    a = eisenstein_series([2 + 1j], Y, H=60).value
    b = eisenstein_series([2 - 1j], Y, H=60).value
    assert abs(a - b.conjugate()) < 1e-12 * abs(a)


def test_series_errors():
    with pytest.raises(InputError):
        eisenstein_series([1.0], np.eye(2))
    with pytest.raises(InputError):
        eisenstein_series([2.0, 2.0], np.eye(2))
    with pytest.raises(InputError):
        eisenstein_series([2.0], np.diag([1.0, 2.0]))
    with pytest.raises(GuardrailExceeded):
        eisenstein_series([2.0, 2.0], np.eye(3), H=31)
    with pytest.raises(InputError):
        eisenstein_series([2.0], np.eye(2), tail="exact")


def test_threads_do_not_change_sum():
    Y = random_det1(np.random.default_rng(3), 3)
    a = eisenstein_series([2.5, 2.5], Y, H=5, threads=1).value
    b = eisenstein_series([2.5, 2.5], Y, H=5, threads=4).value
    assert a == b


# -- block identities -----------------------------------------------------------------------


def test_gamma_blocks_match_congruence(rng):
    for n in (2, 3, 4):
        Y = random_det1(rng, n)
        p = partial_iwasawa(Y)
        for _ in range(5):
            gamma = random_unimodular(rng, n, 5, 2)
            alpha, q, R = gamma_blocks(p, gamma)
            Z = congruence(Y, gamma)
            a, c = gamma[0, 0], gamma[1:, 0]
            direct = (a + c @ p.x) ** 2 / p.v + p.v ** (1 / (n - 1)) * c @ p.W @ c
            assert alpha == pytest.approx(Z[0, 0], rel=1e-10)
            assert direct == pytest.approx(Z[0, 0], rel=1e-10)
            assert np.allclose(q, Z[0, 1:], atol=1e-10 * np.abs(Z).max())
            assert np.allclose(R, Z[1:, 1:], atol=1e-10 * np.abs(Z).max())


# -- Fourier coefficients and block integrals -------------------------------------------------


def test_fourier_trivial_cases():
    W = np.ones((1, 1))

    def f(Y):
        return 1 / Y[0, 0]  # v, independent of x

    assert fourier_coefficient(f, [0], 2.0, W) == pytest.approx(2.0)
    W2 = np.eye(2)

    def wave(Y, N0=(1, -2)):
        p = partial_iwasawa(Y, check=False)
        return np.exp(2j * np.pi * (p.x @ np.array(N0)))

    assert abs(fourier_coefficient(wave, [1, -2], 1.0, W2, M=8) - 1) < 1e-12
    assert abs(fourier_coefficient(wave, [0, 1], 1.0, W2, M=8)) < 1e-12


def test_fourier_constant_term_of_e2():
    E2 = eisenstein_field([2.5], H=200)
    a0 = fourier_coefficient(E2, [0], 1e3, np.ones((1, 1)))
    assert abs(a0 / 1e3**2.5 - 1) < 1e-2


def test_cuspidality_defect_cases(rng):
    Y = random_det1(rng, 3)
    for j in (1, 2):
        assert cuspidality_defect(lambda Z: 3.0, j, Y, M=8) == pytest.approx(3.0)

    def wave(Z):
        return np.exp(2j * np.pi * Z[0, 1] / Z[0, 0])

    Y2 = random_det1(rng, 2)
    assert abs(cuspidality_defect(wave, 1, Y2)) < 1e-12
    E2 = eisenstein_field([2.5], H=100)
    assert abs(cuspidality_defect(E2, 1, PartialIwasawa(3.0, np.zeros(1), np.ones((1, 1))).matrix())) > 1
    with pytest.raises(InputError):
        cuspidality_defect(E2, 2, Y2)


# -- K-Bessel ------------------------------------------------------------------------------


def test_kbessel_half_closed_form():
    assert k_bessel_rank1(0.5, 1.0, 1.0) == pytest.approx(math.sqrt(math.pi) * math.exp(-2),
                                                          abs=1e-12)


def test_kbessel_against_scipy_real_order(rng):
    for _ in range(30):
        s = rng.uniform(-4, 4)
        a, b = rng.uniform(0.1, 5, 2)
        ref = 2 * (b / a) ** (s / 2) * kv(s, 2 * math.sqrt(a * b))
        assert k_bessel_rank1(s, a, b).real == pytest.approx(ref, rel=1e-11)


def test_kbessel_against_mpmath_complex_order(rng):
    for _ in range(10):
        s = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
        a, b = rng.uniform(0.2, 3, 2)
        ref = complex(2 * mpmath.power(b / a, s / 2) * mpmath.besselk(s, 2 * mpmath.sqrt(a * b)))
        assert abs(k_bessel_rank1(s, a, b) - ref) <= 1e-11 * abs(ref)


def test_kbessel_symmetry_and_errors(rng):
    for _ in range(20):
        s = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
        a, b = rng.uniform(0.2, 3, 2)
        k1, k2 = k_bessel_rank1(s, a, b), k_bessel_rank1(-s, b, a)
        assert abs(k1 - k2) <= 1e-10 * abs(k1)
    with pytest.raises(InputError):
        k_bessel_rank1(1.0, -1.0, 1.0)
    with pytest.raises(Unsupported):
        k_bessel_rank1(1.0, 1.0, 1.0, sign="verbatim")


# -- Grenier operator and stable chains ---------------------------------------------------------


def test_grenier_exponent():
    assert grenier_exponent([2.5]) == 2.5
    assert grenier_exponent([2.5, 2.5]) == pytest.approx(2.5 + 2.5 / 2)


def test_grenier_operator_constant():
    r = grenier_operator(lambda Y: 7.0, [0.0], np.ones((1, 1)), [1, 10, 100])
    assert r.converged and r.limit == 7.0


def test_grenier_operator_e2_tends_to_one():
    r = grenier_operator(eisenstein_field([2.5], H=200), [2.5], np.ones((1, 1)),
                         [10, 100, 1000], x_probe=[0.3])
    assert r.converged and abs(r.limit - 1) < 1e-2
    assert r.rate is not None and r.rate < 0


def test_grenier_operator_wrong_exponent_diverges():
    r = grenier_operator(eisenstein_field([2.5], H=200), [2.5], np.ones((1, 1)),
                         [10, 100, 1000], exponent_shift=0.1)
    assert not r.converged


def test_grenier_operator_schedule_validation():
    with pytest.raises(InputError):
        grenier_operator(lambda Y: 1.0, [2.5], np.ones((1, 1)), [10, 100])
    with pytest.raises(InputError):
        grenier_operator(lambda Y: 1.0, [2.5], np.ones((1, 1)), [10, 20, 30])


def test_stable_chain_small():
    assert stable_chain_check([2.5], 2, H=100).ok
    rep = stable_chain_check([2.5, 2.5], 3, H=8, v=1e3)
    assert rep.ok
    bad = stable_chain_check([2.5, 2.5], 3, H=8, v=1e3, exponent_shift=0.1)
    assert not bad.ok
