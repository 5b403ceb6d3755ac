from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import random_spd, random_unimodular
from hypothesis import given, settings
from hypothesis import strategies as st

from pnlab.errors import Inconclusive, InputError
from pnlab.lattice import int_inv
from pnlab.tori import (GammaStarElem, HgPoint, gamma_star_action, hermitian_form,
                        hg_equivalent, isometries, lattice_basis, polarizability_check,
                        real_structure_matrix, symplectic_J, tori_isomorphic)

seeds = st.integers(0, 2**32 - 1)


def star_elem(rng, g):
    A = random_unimodular(rng, g, 3, 1) if g > 1 else np.array([[rng.choice([-1, 1])]])
    S = rng.integers(-3, 4, (g, g))
    return GammaStarElem.make(A, (S + S.T) @ int_inv(A).T)


# -- Hermitian form and polarization -------------------------------------------------------


def test_hermitian_form_identity_and_positivity(rng):
    u = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    assert hermitian_form(np.eye(3), u, w) == pytest.approx(np.sum(u * np.conj(w)))
    for _ in range(100):
        Y = random_spd(rng, 3)
        u = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        h = hermitian_form(Y, u, u)
        assert abs(h.imag) < 1e-12 * abs(h) and h.real > 0
    Y = random_spd(rng, 3)
    assert hermitian_form(Y, u, w) == pytest.approx(np.conj(hermitian_form(Y, w, u)), abs=1e-12)


def test_alternating_form_integral_on_lattice(rng):
    Y = random_spd(rng, 3)
    B = lattice_basis(Y)
    for i in range(B.shape[1]):
        for j in range(B.shape[1]):
            e = hermitian_form(Y, B[:, i], B[:, j]).imag
            assert abs(e - round(e)) < 1e-9


def test_polarizability_examples(rng):
    Q = np.array([[math.sqrt(2), math.sqrt(3)], [math.sqrt(3), -math.sqrt(5)]])
    res = polarizability_check(Q)
    assert not res.polarized and res.signature == (1, 1, 0)
    assert res.to_json()["status"] == "NotPolarized"
    assert not polarizability_check(-np.eye(2)).polarized
    assert polarizability_check(random_spd(rng, 4)).polarized
    with pytest.raises(InputError):
        polarizability_check([[1.0, 2.0], [0.0, 1.0]])


# -- isomorphism ----------------------------------------------------------------------------


def test_tori_examples():
    assert tori_isomorphic(np.eye(2), np.diag([1.0, 2.0])) is None
    Y2 = np.array([[2.0, 1.0], [1.0, 1.0]])
    A = tori_isomorphic(np.eye(2), Y2)
    assert A is not None and np.allclose(A @ A.T, Y2)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 4))
def test_constructed_pairs_yield_witnesses(seed, n):
    rng = np.random.default_rng(seed)
    Y1 = random_spd(rng, n, 0.4)
    A = random_unimodular(rng, n, 3, 2)
    Y2 = A @ Y1 @ A.T
    W = tori_isomorphic(Y1, Y2)
    assert W is not None
    assert abs(round(np.linalg.det(W))) == 1
    assert np.allclose(W @ Y1 @ W.T, Y2, rtol=1e-8, atol=1e-8)


def test_same_det_non_isometric_forms():
    Y1 = np.diag([1.0, 6.0])
    Y2 = np.diag([2.0, 3.0])
    assert tori_isomorphic(Y1, Y2) is None


def test_isometry_budget_is_inconclusive():
    with pytest.raises(Inconclusive):
        isometries(np.eye(4), np.eye(4), max_nodes=5)


def test_all_isometries_of_square_lattice():
    # the automorphism group of Z^2 with the standard form has order 8
    assert len(isometries(np.eye(2), np.eye(2))) == 8


# -- normal forms and the parabolic action ---------------------------------------------------


def test_real_structure_examples(rng):
    M = real_structure_matrix(np.zeros((2, 2))).M
    assert np.array_equal(M, np.diag([-1, -1, 1, 1]))
    M = real_structure_matrix(np.array([[0.5]])).M
    assert np.array_equal(M, [[-1, 0], [1, 1]])
    J = symplectic_J(1)
    assert np.array_equal(M.T @ J @ M, -J)
    for i in range(100):
        g = 1 + i % 3
        T = rng.integers(-5, 6, (g, g))
        assert real_structure_matrix((T + T.T) / 2).anti_symplectic()
    with pytest.raises(InputError):
        real_structure_matrix(np.array([[0.3]]))


def test_gamma_star_examples():
    om = HgPoint.from_omega(np.array([[0.5]]), np.array([[1.0]]))
    out = gamma_star_action(GammaStarElem.make([[1]], [[1]]), om)
    assert out.omega()[0, 0] == 1.5 + 1j
    ident = gamma_star_action(GammaStarElem.make(np.eye(2, dtype=int), np.zeros((2, 2))),
                              HgPoint.make([[1, 0], [0, 0]], np.eye(2)))
    assert np.array_equal(ident.two_re, [[1, 0], [0, 0]])


def test_gamma_star_validation():
    with pytest.raises(InputError):
        GammaStarElem.make([[1, 0], [0, 1]], [[0, 1], [0, 0]])
    with pytest.raises(InputError):
        HgPoint.make([[1, 2], [0, 1]], np.eye(2))
    with pytest.raises(InputError):
        HgPoint.from_omega(np.array([[0.3]]), np.eye(1))


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 3))
def test_action_law(seed, g):
    rng = np.random.default_rng(seed)
    g1, g2 = star_elem(rng, g), star_elem(rng, g)
    T = rng.integers(-3, 4, (g, g))
    om = HgPoint.make(T + T.T, random_spd(rng, g, 0.3))
    lhs = gamma_star_action(g1 @ g2, om)
    rhs = gamma_star_action(g1, gamma_star_action(g2, om))
    assert np.max(np.abs(lhs.omega() - rhs.omega())) < 1e-10
    assert np.array_equal((g1 @ g2).block(), g1.block() @ g2.block())


def test_hg_equivalence_cases(rng):
    for g in (1, 2, 3):
        T = rng.integers(-2, 3, (g, g))
        om = HgPoint.make(T + T.T, random_spd(rng, g, 0.3))
        other = gamma_star_action(star_elem(rng, g), om)
        A = hg_equivalent(om, other)
        assert A is not None
        assert np.allclose(A @ om.im @ A.T, other.im, atol=1e-8)
        assert np.all((other.two_re - A @ om.two_re @ A.T) % 2 == 0)
    S = np.array([[2, 1], [1, 0]])
    om = HgPoint.make([[1, 0], [0, 0]], np.eye(2))
    shifted = HgPoint.make(om.two_re + 2 * S, np.eye(2))
    assert hg_equivalent(om, shifted) is not None
    assert hg_equivalent(om, HgPoint.make(om.two_re, np.diag([1.0, 2.0]))) is None


def test_hg_mod_two_obstruction():
    # same imaginary part, but 2X = diag(1, 0) and 0 differ mod 2 under every
    # automorphism of the square lattice
    a = HgPoint.make([[1, 0], [0, 0]], np.eye(2))
    b = HgPoint.make([[0, 0], [0, 0]], np.eye(2))
    assert hg_equivalent(a, b) is None
