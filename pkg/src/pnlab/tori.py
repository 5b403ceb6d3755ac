"""Principally polarized real tori T_Y = R^n / Y Z^n and the normal forms
Omega = X + iY with 2X integral."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import congruence, spd_matrix, sym_matrix
from .errors import Inconclusive, InputError
from .lattice import as_int_matrix, int_det, int_inv, short_vectors, unimodular
from .reduction import minkowski_reduce

MATCH_TOL = 1e-8


def hermitian_form(Y, u, w) -> complex:
    """H_Y(u, w) = u^T Y^{-1} conj(w); its imaginary part is E_Y."""
    Y = spd_matrix(Y)
    u = np.asarray(u, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if u.shape != (len(Y),) or w.shape != (len(Y),):
        raise InputError("vector dimension does not match Y")
    return complex(u @ np.linalg.solve(Y, np.conj(w)))


def lattice_basis(Y) -> np.ndarray:
    """Columns e_1..e_n, iY e_1..iY e_n spanning L_Y = Z^n + i Y Z^n."""
    Y = spd_matrix(Y)
    n = len(Y)
    return np.concatenate([np.eye(n, dtype=complex), 1j * Y], axis=1)


@dataclass(frozen=True)
class Polarization:
    polarized: bool
    signature: tuple  # (positive, negative, zero) eigenvalue counts
    reason: str = ""

    def to_json(self) -> dict:
        out = {"status": "Polarized" if self.polarized else "NotPolarized",
               "signature": list(self.signature)}
        if self.reason:
            out["reason"] = self.reason
        return out


def polarizability_check(Q, tol: float = 1e-12) -> Polarization:
    """T_Q is principally polarized exactly when Q is positive definite."""
    Q = sym_matrix(Q)
    lam = np.linalg.eigvalsh(Q)
    scale = max(1.0, float(np.max(np.abs(lam))))
    pos = int(np.sum(lam > tol * scale))
    neg = int(np.sum(lam < -tol * scale))
    zero = len(lam) - pos - neg
    sig = (pos, neg, zero)
    if neg == 0 and zero == 0:
        return Polarization(True, sig)
    if pos == 0 and zero == 0:
        why = "negative definite; the hermitian form must be positive definite"
    elif zero:
        why = "degenerate form"
    else:
        why = f"indefinite form with signature ({pos},{neg})"
    return Polarization(False, sig, why)


# -- isometries between reduced forms -------------------------------------------


def _close(a, b) -> bool:
    return abs(a - b) <= MATCH_TOL * max(1.0, abs(a), abs(b))


def isometries(R1, R2, max_nodes: int = 10**6, first_only: bool = False):
    """All C in GL(n, Z) with R1[C] == R2 (entrywise within tolerance).

    Complete: column i of C must lie among the finitely many vectors with
    R1[c] = (R2)_ii. Raises Inconclusive after ``max_nodes`` search nodes.
    """
    R1 = np.asarray(R1, dtype=float)
    R2 = np.asarray(R2, dtype=float)
    n = len(R1)
    cands = []
    for i in range(n):
        X, norms = short_vectors(R1, R2[i, i] * (1 + MATCH_TOL), half=False)
        cands.append([x for x, q in zip(X, norms) if _close(q, R2[i, i])])
    out = []
    nodes = 0
    chosen: list = []

    def rec(i):
        nonlocal nodes
        if i == n:
            C = np.column_stack(chosen)
            if abs(int_det(C)) == 1:
                out.append(C.astype(np.int64))
                return first_only
            return False
        for c in cands[i]:
            nodes += 1
            if nodes > max_nodes:
                raise Inconclusive(f"isometry search exceeded {max_nodes} nodes")
            rc = R1 @ c
            if all(_close(float(rc @ chosen[j]), R2[j, i]) for j in range(i)):
                chosen.append(c)
                if rec(i + 1):
                    return True
                chosen.pop()
        return False

    rec(0)
    return out


def _witnesses(Y1, Y2, search_bound: int, first_only: bool):
    Y1 = spd_matrix(Y1)
    Y2 = spd_matrix(Y2)
    if Y1.shape != Y2.shape:
        raise InputError("dimension mismatch")
    if len(Y1) > 4:
        raise InputError("isomorphism testing is limited to n <= 4")
    d1, d2 = np.linalg.det(Y1), np.linalg.det(Y2)
    if abs(d1 - d2) > 1e-8 * max(1.0, abs(d1), abs(d2)):
        return []
    r1 = minkowski_reduce(Y1)
    r2 = minkowski_reduce(Y2)
    if not all(_close(a, b) for a, b in zip(np.diag(r1.R), np.diag(r2.R))):
        return []
    out = []
    B2inv = int_inv(r2.A)
    for C in isometries(r1.R, r2.R, max_nodes=search_bound, first_only=first_only):
        A = (r1.A @ C @ B2inv).T
        # re-verify before surfacing
        if np.allclose(A @ Y1 @ A.T, Y2, rtol=1e-8, atol=1e-8 * max(1.0, np.abs(Y2).max())):
            out.append(A)
    return out


def tori_isomorphic(Y1, Y2, search_bound: int = 10**6):
    """A unimodular A with Y2 = A Y1 A^T, or None when none exists."""
    found = _witnesses(Y1, Y2, search_bound, first_only=True)
    return found[0] if found else None


# -- the normal forms Omega = X + iY ---------------------------------------------


def _half_integral(X, tol: float = 1e-9) -> np.ndarray:
    X2 = 2 * np.asarray(X, dtype=float)
    R = np.rint(X2)
    if np.max(np.abs(X2 - R), initial=0.0) >= tol:
        raise InputError("2X must be an integer matrix")
    return R.astype(np.int64)


@dataclass(frozen=True)
class HgPoint:
    two_re: np.ndarray  # the integer matrix 2 Re(Omega)
    im: np.ndarray

    @classmethod
    def make(cls, two_re, im) -> "HgPoint":
        T = as_int_matrix(np.rint(np.asarray(two_re, dtype=float)))
        if np.max(np.abs(np.asarray(two_re, dtype=float) - T), initial=0.0) >= 1e-9:
            raise InputError("2 Re(Omega) must be integral")
        if not np.array_equal(T, T.T):
            raise InputError("2 Re(Omega) must be symmetric")
        Y = spd_matrix(im)
        if T.shape != Y.shape:
            raise InputError("real and imaginary parts differ in size")
        return cls(T, Y)

    @classmethod
    def from_omega(cls, X, Y) -> "HgPoint":
        return cls.make(_half_integral(X), Y)

    @property
    def g(self) -> int:
        return len(self.im)

    @property
    def X(self) -> np.ndarray:
        return self.two_re / 2

    def omega(self) -> np.ndarray:
        return self.X + 1j * self.im

    def to_json(self) -> dict:
        return {"g": self.g, "two_re": self.two_re.tolist(), "im": self.im.tolist()}


@dataclass(frozen=True)
class GammaStarElem:
    """[[A, B], [0, A^{-T}]] with A unimodular and A B^T == B A^T."""

    A: np.ndarray
    B: np.ndarray

    @classmethod
    def make(cls, A, B) -> "GammaStarElem":
        A = unimodular(A)
        B = as_int_matrix(B)
        if B.shape != A.shape:
            raise InputError("A and B differ in size")
        if not np.array_equal(A @ B.T, B @ A.T):
            raise InputError("A B^T must equal B A^T")
        return cls(A, B)

    def __matmul__(self, other: "GammaStarElem") -> "GammaStarElem":
        A2inv_T = int_inv(other.A).T
        return GammaStarElem.make(self.A @ other.A, self.A @ other.B + self.B @ A2inv_T)

    def block(self) -> np.ndarray:
        g = len(self.A)
        M = np.zeros((2 * g, 2 * g), dtype=np.int64)
        M[:g, :g] = self.A
        M[:g, g:] = self.B
        M[g:, g:] = int_inv(self.A).T
        return M


def gamma_star_action(gamma: GammaStarElem, omega: HgPoint) -> HgPoint:
    """Omega -> A Omega A^T + B A^T, carried out on the integer matrix
    2 Re(Omega) exactly: 2 Re' = A (2X) A^T + 2 B A^T."""
    A, B = gamma.A, gamma.B
    if len(A) != omega.g:
        raise InputError("dimension mismatch")
    two_re = A @ omega.two_re @ A.T + 2 * B @ A.T
    im = congruence(omega.im, A.T.astype(float))
    out = HgPoint.make(two_re, im)
    spd_matrix(out.im)
    return out


def symplectic_J(g: int) -> np.ndarray:
    J = np.zeros((2 * g, 2 * g), dtype=np.int64)
    J[:g, g:] = np.eye(g, dtype=np.int64)
    J[g:, :g] = -np.eye(g, dtype=np.int64)
    return J


@dataclass(frozen=True)
class RealStructureMatrix:
    M: np.ndarray

    def anti_symplectic(self) -> bool:
        g = len(self.M) // 2
        J = symplectic_J(g)
        return bool(np.array_equal(self.M.T @ J @ self.M, -J))


def real_structure_matrix(X) -> RealStructureMatrix:
    """M = [[-I, 0], [2X, I]], the action of complex conjugation on the
    lattice with basis the columns of (Omega, I)."""
    T = _half_integral(sym_matrix(X))
    g = len(T)
    M = np.zeros((2 * g, 2 * g), dtype=np.int64)
    M[:g, :g] = -np.eye(g, dtype=np.int64)
    M[g:, :g] = T
    M[g:, g:] = np.eye(g, dtype=np.int64)
    out = RealStructureMatrix(M)
    if not out.anti_symplectic():
        raise AssertionError("M^T J M != -J")
    return out


def hg_equivalent(om1: HgPoint, om2: HgPoint, search_bound: int = 10**6):
    """A in GL(g, Z) with Im2 = A Im1 A^T and 2 Re2 == A (2 Re1) A^T mod 2,
    or None. All witnesses for the imaginary parts are searched."""
    if om1.g != om2.g:
        raise InputError("dimension mismatch")
    if om1.g > 3:
        raise InputError("equivalence testing is limited to g <= 3")
    for A in _witnesses(om1.im, om2.im, search_bound, first_only=False):
        diff = om2.two_re - A @ om1.two_re @ A.T
        if np.all(diff % 2 == 0):
            return A
    return None
