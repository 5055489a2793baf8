"""Minimal Naimark dilations, commutants, the set L_M and the face it generates.

For a POVM ``M`` on K (x) H0, ``L_M = {X in B(H0) : X^dag M_i X <= M_i}``.
When ``M`` is extremal for ``I_K (x) B(H0)`` and ``T`` is surjective, the
testers ``mu_X^-1 T^dag X^dag M X T`` with ``X`` in ``L_M`` form the
smallest face containing ``T^dag M T``. This module generates elements of
that face and checks certificates about it; it does not decide membership
of an arbitrary tester.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import extremality as ex
from . import linalg as la
from . import process as pp
from .errors import DimensionError, InvariantError, NotInLmError, ZeroWeightError
from .extremality import Equivalence, EquivalenceResult
from .linalg import DEFAULT_EPS, dag
from .process import ProcessPovm
from .quantum import Povm
from .sampling import ginibre, rng_from


@dataclass(frozen=True)
class NaimarkDilation:
    """``M_k = J^dag E_k J`` with ``E`` projection valued on the dilated space.

    The dilated space is the direct sum of the supports of the effects,
    outcome-major; block ``k`` uses the eigenbasis of ``M_k``.
    """

    E: Povm
    J: np.ndarray
    block_sizes: tuple

    @property
    def dilated_dim(self) -> int:
        return self.J.shape[0]

    @property
    def space_dim(self) -> int:
        return self.J.shape[1]

    def residuals(self, M: Povm) -> dict:
        E, J = self.E, self.J
        return {
            "projections": max(float(np.abs(Ek @ Ek - Ek).max()) for Ek in E),
            "resolution": float(np.abs(E.total() - np.eye(self.dilated_dim)).max()),
            "isometry": float(np.abs(dag(J) @ J - np.eye(self.space_dim)).max()),
            "compression": max(float(np.abs(dag(J) @ Ek @ J - Mk).max()) for Ek, Mk in zip(E, M)),
        }

    def is_minimal(self, eps=DEFAULT_EPS) -> bool:
        return sum(la.rank(Ek @ self.J, eps) for Ek in self.E) == self.dilated_dim


def minimal_naimark(M: Povm, eps=DEFAULT_EPS) -> NaimarkDilation:
    blocks, sizes = [], []
    for Mk in M:
        V = la.support_basis(Mk, eps)
        root = la.psd_sqrt(Mk, eps)
        blocks.append(dag(V) @ root)
        sizes.append(V.shape[1])
    J = np.concatenate(blocks, axis=0)
    D = J.shape[0]
    effects, start = [], 0
    for r in sizes:
        Ek = np.zeros((D, D), dtype=complex)
        Ek[start : start + r, start : start + r] = np.eye(r)
        effects.append(Ek)
        start += r
    return NaimarkDilation(Povm(tuple(effects)), J, tuple(sizes))


def commutant(mats, eps=DEFAULT_EPS):
    """Hilbert-Schmidt orthonormal basis of ``{X : X A = A X for all A in mats}``."""
    mats = [la.as_matrix(A) for A in mats]
    d = mats[0].shape[0]
    if any(A.shape != (d, d) for A in mats):
        raise DimensionError("commutant needs square matrices of one dimension")
    I = np.eye(d)
    L = np.concatenate([np.kron(I, A.T) - np.kron(A, I) for A in mats], axis=0)
    scale = max(1.0, max(la.opnorm(A) for A in mats))
    K = la.null_space(L, eps, floor=eps * scale)
    return [K[:, k].reshape(d, d) for k in range(K.shape[1])]


def lm_gap(M: Povm, X) -> float:
    """Most negative eigenvalue of ``M_i - X^dag M_i X`` over i (0 if none)."""
    X = la.as_matrix(X)
    if X.shape != (M.space_dim, M.space_dim):
        raise DimensionError(f"X of shape {X.shape} does not act on the POVM space")
    worst = 0.0
    for Mi in M:
        D = Mi - dag(X) @ Mi @ X
        worst = min(worst, float(np.linalg.eigvalsh((D + dag(D)) / 2)[0]))
    return -worst


def lm_membership(M: Povm, X, tol=DEFAULT_EPS) -> bool:
    """``X^dag M_i X <= M_i`` for every outcome (within ``tol``).

    ``X`` acts on the whole POVM space; lift ancilla operators first.
    """
    return lm_gap(M, X) <= tol


@dataclass(frozen=True)
class LmCertificate:
    """``C`` in the commutant of ``E`` with ``||C|| <= 1`` and ``C J = J X``."""

    X: np.ndarray
    C: np.ndarray

    def residuals(self, dilation: NaimarkDilation) -> dict:
        C, J = self.C, dilation.J
        return {
            "commutant": max(float(np.abs(C @ Ek - Ek @ C).max()) for Ek in dilation.E),
            "norm_excess": max(0.0, la.opnorm(C) - 1),
            "intertwining": float(np.abs(C @ J - J @ self.X).max()),
        }

    def verify(self, dilation: NaimarkDilation, tol=1e-8) -> bool:
        return all(v <= tol for v in self.residuals(dilation).values())


def lift_to_dilation(M: Povm, X, dilation: Optional[NaimarkDilation] = None, eps=DEFAULT_EPS, tol=1e-8):
    """Find ``C`` in ``{E}'`` with ``||C|| <= 1`` and ``C J = J X``.

    For a minimal dilation every block ``J_k`` is onto its summand, so the
    block-diagonal ``C`` is determined uniquely: ``C_k = J_k X J_k^+``.
    Returns an :class:`LmCertificate`, or None if the solution fails its
    checks numerically.
    """
    X = la.as_matrix(X)
    if not lm_membership(M, X, tol):
        raise NotInLmError(f"X^dag M X <= M fails (gap {lm_gap(M, X):.3e})")
    dilation = dilation or minimal_naimark(M, eps)
    D = dilation.dilated_dim
    C = np.zeros((D, D), dtype=complex)
    start = 0
    for r in dilation.block_sizes:
        Jk = dilation.J[start : start + r]
        C[start : start + r, start : start + r] = Jk @ X @ np.linalg.pinv(Jk, rcond=eps)
        start += r
    cert = LmCertificate(X, C)
    return cert if cert.verify(dilation, tol) else None


def lm_complement(M: Povm, X, eps=DEFAULT_EPS, tol=1e-8) -> np.ndarray:
    """``Y = (I - X^dag X)^(1/2)`` so that ``X^dag M X + Y^dag M Y = M`` (projective ``M`` only)."""
    X = la.as_matrix(X)
    if not M.is_projective(tol):
        raise ValueError("constructive complement is only available for projection-valued M")
    comm = max(float(np.abs(X @ Mi - Mi @ X).max()) for Mi in M)
    if comm > tol:
        raise NotInLmError(f"X does not commute with M (residual {comm:.3e})")
    if la.opnorm(X) > 1 + tol:
        raise NotInLmError("X is not a contraction")
    Y = la.psd_sqrt(np.eye(X.shape[0]) - dag(X) @ X, eps)
    return Y


def face_sample(T, M: Povm, X, eps=DEFAULT_EPS, tol=1e-9) -> ProcessPovm:
    """The face element ``mu_X^-1 T^dag X^dag M X T`` for ``X`` in ``L_M`` (``X`` on H0)."""
    T = la.as_matrix(T, "T")
    X = la.as_matrix(X, "X")
    d_H0 = T.shape[0]
    if M.space_dim % d_H0 or X.shape != (d_H0, d_H0):
        raise DimensionError("T, X and M do not share the ancilla")
    d_K = M.space_dim // d_H0
    if not lm_membership(M, pp.lift(X, d_K), tol):
        raise NotInLmError(f"X is not in L_M (gap {lm_gap(M, pp.lift(X, d_K)):.3e})")
    XT = X @ T
    mu = float(np.trace(dag(XT) @ XT).real)
    if mu <= tol:
        raise ZeroWeightError(f"mu_X = {mu:.3e} is not positive")
    t = pp.RepresentationTriple(d_H0, M, T=XT / np.sqrt(mu))
    return pp.realize(t)


def mface_certificate_check(N: Povm, Q, U, M: Povm, tol=1e-8) -> bool:
    """``Q U^dag N U Q = Q M = M Q`` with ``Q`` a projection and ``U`` unitary."""
    Q = la.as_matrix(Q)
    U = la.as_matrix(U)
    if not la.is_projection(Q, tol) or not la.is_unitary(U, tol):
        return False
    for Ni, Mi in zip(N, M):
        if float(np.abs(Q @ dag(U) @ Ni @ U @ Q - Q @ Mi).max()) > tol:
            return False
        if float(np.abs(Q @ Mi - Mi @ Q).max()) > tol:
            return False
    return True


@dataclass(frozen=True)
class DecompositionCheck:
    verdict: Equivalence
    members: tuple  # EquivalenceResult per decomposition term

    def __bool__(self):
        return self.verdict is Equivalence.YES


def _embedding_search(N: Povm, M: Povm, d_K, r, d_H0, eps, tol, rng, tries=16) -> EquivalenceResult:
    """Co-isometry ``v: H0 -> C^r`` with ``v M v^dag = N`` and ``v^dag v`` commuting with ``M``."""
    units = []
    for a in range(r):
        for b in range(d_H0):
            E = np.zeros((r, d_H0), dtype=complex)
            E[a, b] = 1
            units.append(E)
    cols = []
    for E in units:
        W = pp.lift(E, d_K)
        cols.append(np.concatenate([(W @ Mi - Ni @ W).ravel() for Mi, Ni in zip(M, N)]))
    K = la.null_space(np.stack(cols, axis=1), eps, floor=eps)
    if K.shape[1] == 0:
        return EquivalenceResult(Equivalence.UNKNOWN, reason="no intertwiner onto the compressed space")
    for _ in range(tries):
        c = K @ ginibre(rng, K.shape[1], 1).ravel()
        w = sum(ci * E for ci, E in zip(c, units))
        if la.rank(w, eps) < r:
            continue
        W_adj, _, _ = la.polar(dag(w), eps)  # d_H0 x r isometry
        V = pp.lift(dag(W_adj), d_K)
        Q = dag(V) @ V
        ok = all(float(np.abs(V @ Mi @ dag(V) - Ni).max()) <= tol for Mi, Ni in zip(M, N))
        ok = ok and all(float(np.abs(Q @ Mi - Mi @ Q).max()) <= tol for Mi in M)
        if ok:
            return EquivalenceResult(Equivalence.YES, dag(V))
    return EquivalenceResult(Equivalence.UNKNOWN, reason=f"no co-isometric intertwiner found in {tries} draws")


def extremal_povm_decomposition_check(M: Povm, T, decomposition, eps=DEFAULT_EPS, tol=1e-8, seed=0) -> DecompositionCheck:
    """Check that every term of ``T^dag M T = sum_i w_i F^i`` is implemented with the same ``M``.

    Full-rank terms: the minimal POVM of ``F^i`` must be unitarily
    equivalent to ``M`` inside ``I_K (x) B(H0)``. Lower-rank terms: the
    minimal POVM must be a compression ``v M v^dag`` along a co-isometry
    whose initial projection commutes with ``M``. The overall verdict is
    YES only if every term is YES, NO if any term is NO, else UNKNOWN.
    """
    T = la.as_matrix(T, "T")
    d_H0 = T.shape[0]
    d_K = M.space_dim // d_H0
    F = pp.realize(pp.RepresentationTriple(d_H0, M, T=T))
    total = [sum(w * Fi[k] for w, Fi in decomposition) for k in range(M.n)]
    residual = max(float(np.abs(a - b).max()) for a, b in zip(total, F))
    if residual > tol:
        raise InvariantError("decomposition does not sum to T^dag M T", residual)
    A = ex.ancilla_algebra(d_K, d_H0)
    rng = rng_from(seed)
    members = []
    for _, Fi in decomposition:
        t = pp.minimal_representation(Fi, eps)
        if t.d_H0 == d_H0:
            res = ex.a_equivalent(M, t.M, A, eps, tol, seed=rng)
        else:
            res = _embedding_search(t.M, M, d_K, t.d_H0, d_H0, eps, tol, rng)
        members.append(res)
    verdicts = {m.verdict for m in members}
    if verdicts == {Equivalence.YES}:
        overall = Equivalence.YES
    elif Equivalence.NO in verdicts:
        overall = Equivalence.NO
    else:
        overall = Equivalence.UNKNOWN
    return DecompositionCheck(overall, tuple(members))
