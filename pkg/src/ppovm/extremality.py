"""Subalgebra-restricted convexity of POVMs and extremality of testers.

Coefficients of a convex combination are drawn from a unital *-subalgebra
``A`` of B(H). ``A = CI`` gives ordinary convexity, ``A = B(H)`` gives
C*-convexity, and ``A = I_K (x) B(H0)`` is the algebra that governs the
convex structure of testers with ancilla H0.

Purity with respect to ``A`` is a linear condition and is decided exactly
here: the tuples ``(D_1, ..., D_n)`` with ``D_i`` supported on supp(M_i)
and ``sum_i D_i`` in ``A`` must all be multiples of ``M``. A tester is
extremal exactly when the POVM of its minimal representation is pure for
``I_K (x) B(H0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import linalg as la
from . import process as pp
from .errors import DegenerateDirectionError, DimensionError, InvariantError
from .linalg import DEFAULT_EPS, dag
from .process import ProcessPovm, RepresentationTriple
from .quantum import Povm
from .sampling import ginibre, rng_from


# -- subalgebras ---------------------------------------------------------


@dataclass(frozen=True)
class Subalgebra:
    """A unital *-subalgebra of B(C^d) stored as a Hilbert-Schmidt orthonormal basis."""

    ambient_dim: int
    basis: tuple

    def __post_init__(self):
        basis = tuple(np.asarray(B, dtype=complex) for B in self.basis)
        for B in basis:
            if B.shape != (self.ambient_dim, self.ambient_dim):
                raise DimensionError("basis elements must act on the ambient space")
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def frame(self) -> np.ndarray:
        """Columns are the row-major vectorizations of the basis."""
        return np.stack([B.ravel() for B in self.basis], axis=1)

    def project(self, X) -> np.ndarray:
        B = self.frame()
        return (B @ (dag(B) @ np.asarray(X, dtype=complex).ravel())).reshape(X.shape)

    def residual(self, X) -> float:
        X = np.asarray(X, dtype=complex)
        return float(np.linalg.norm(X - self.project(X)))

    def contains(self, X, eps=DEFAULT_EPS) -> bool:
        X = np.asarray(X, dtype=complex)
        return self.residual(X) <= 10 * eps * max(1.0, float(np.linalg.norm(X)))

    def element(self, coeffs) -> np.ndarray:
        return sum(c * B for c, B in zip(coeffs, self.basis))

    def closure_residuals(self) -> dict:
        d = self.ambient_dim
        unit = self.residual(np.eye(d)) / np.sqrt(d)
        star = max(self.residual(dag(B)) for B in self.basis)
        prod = max(self.residual(A @ B) for A in self.basis for B in self.basis)
        return {"unital": unit, "star_closed": star, "multiplicative": prod}

    def check(self, eps=DEFAULT_EPS) -> "Subalgebra":
        for name, value in self.closure_residuals().items():
            if value > 10 * eps:
                raise InvariantError(f"subalgebra is not {name}", value)
        return self


def subalgebra_from_basis(mats, eps=DEFAULT_EPS) -> Subalgebra:
    """Smallest unital *-subalgebra containing ``mats``.

    Words in the generators and their adjoints are added until the span
    stops growing.
    """
    mats = [la.as_matrix(m) for m in mats]
    if not mats:
        raise ValueError("need at least one generator")
    d = mats[0].shape[0]
    gens = la.orthonormalize_matrices(mats + [dag(m) for m in mats], eps)
    span = la.orthonormalize_matrices([np.eye(d)] + gens, eps)
    while True:
        grown = la.orthonormalize_matrices(span + [B @ g for B in span for g in gens], eps)
        if len(grown) > d * d:
            raise AssertionError("closure exceeded the ambient matrix space")
        if len(grown) == len(span):
            return Subalgebra(d, tuple(grown))
        span = grown


def scalars(d: int) -> Subalgebra:
    return Subalgebra(d, (np.eye(d) / np.sqrt(d),))


def full_algebra(d: int) -> Subalgebra:
    units = []
    for a in range(d):
        for b in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[a, b] = 1
            units.append(E)
    return Subalgebra(d, tuple(units))


def diagonal_algebra(d: int) -> Subalgebra:
    return Subalgebra(d, tuple(np.diag(np.eye(d)[k]).astype(complex) for k in range(d)))


def ancilla_algebra(d_K: int, d_H0: int) -> Subalgebra:
    """``I_K (x) B(H0)`` inside B(K (x) H0)."""
    return Subalgebra(d_K * d_H0, tuple(pp.lift(E, d_K) / np.sqrt(d_K) for E in full_algebra(d_H0).basis))


def rotated(A: Subalgebra, U) -> Subalgebra:
    """``U A U^dag``."""
    U = np.asarray(U, dtype=complex)
    return Subalgebra(A.ambient_dim, tuple(U @ B @ dag(U) for B in A.basis))


# -- A-convex combinations ----------------------------------------------


def a_convex_combine(coeffs, parts, A: Subalgebra, eps=DEFAULT_EPS):
    """``M_i = sum_j X_j^dag N^j_i X_j``.

    Returns ``(M, proper)``; ``proper`` is True when every coefficient is
    invertible (smallest singular value above ``eps`` times the largest).
    """
    if len(coeffs) != len(parts) or not coeffs:
        raise ValueError("need one POVM per coefficient")
    coeffs = [la.as_matrix(X) for X in coeffs]
    for X in coeffs:
        if not A.contains(X, eps):
            raise ValueError(f"coefficient is not in the subalgebra (residual {A.residual(X):.3e})")
    norm = float(np.abs(sum(dag(X) @ X for X in coeffs) - np.eye(A.ambient_dim)).max())
    if norm > 10 * eps * len(coeffs):
        raise InvariantError("coefficients do not resolve the identity", norm)
    n = parts[0].n
    effects = []
    for k in range(n):
        E = sum(dag(X) @ P[k] @ X for X, P in zip(coeffs, parts))
        effects.append((E + dag(E)) / 2)
    proper = all(la.rank(X, eps) == A.ambient_dim for X in coeffs)
    return Povm(tuple(effects)), proper


def combine_tail(coeffs, parts, keep: int, eps=DEFAULT_EPS):
    """Fold every term except ``keep`` into one: ``M = X^dag M^keep X + Y^dag N Y``.

    ``Y = (I - X^dag X)^(1/2)`` and ``N`` is the renormalized tail on
    supp(Y), completed by ``(I - P_Y)/n`` on the kernel. Returns
    ``(X, M^keep, Y, N)``.
    """
    X = la.as_matrix(coeffs[keep])
    d = X.shape[0]
    n = parts[0].n
    Y = la.psd_sqrt(np.eye(d) - dag(X) @ X, eps)
    if la.opnorm(Y) <= eps:
        return X, parts[keep], np.zeros_like(Y), Povm(tuple(np.eye(d) / n for _ in range(n)))
    Y_inv = la.psd_pinv(Y, eps)
    P = la.support_projection(Y, eps)
    rest = (np.eye(d) - P) / n
    effects = []
    for k in range(n):
        tail = sum(dag(Xj) @ parts[j][k] @ Xj for j, Xj in enumerate(coeffs) if j != keep)
        if isinstance(tail, int):
            tail = np.zeros((d, d), dtype=complex)
        E = Y_inv @ tail @ Y_inv + rest
        effects.append((E + dag(E)) / 2)
    return X, parts[keep], Y, Povm(tuple(effects))


# -- purity, irreducibility, extremality of POVMs -------------------------


@dataclass(frozen=True)
class PuritySolutionSpace:
    """Tuples ``(D_1..D_n)`` with ``D_i`` on supp(M_i) and ``sum D_i`` in ``A``."""

    ranks: tuple
    basis: tuple  # each element is a tuple of n matrices

    @property
    def dim(self) -> int:
        return len(self.basis)


def _support_frames(M: Povm, eps):
    return [la.support_basis(E, eps) for E in M]


def _supported_sum_map(frames):
    """Linear map from block coordinates ``Z_i`` to vec(sum_i V_i Z_i V_i^dag)."""
    cols = [np.kron(V, V.conj()) for V in frames if V.shape[1]]
    return np.concatenate(cols, axis=1)


def _unpack(z, frames):
    out, pos = [], 0
    for V in frames:
        r = V.shape[1]
        Z = z[pos : pos + r * r].reshape(r, r)
        out.append(V @ Z @ dag(V))
        pos += r * r
    return tuple(out)


def _solution_space(M: Povm, constraint_frame, eps) -> PuritySolutionSpace:
    frames = _support_frames(M, eps)
    G = _supported_sum_map(frames)
    L = G if constraint_frame is None else G - constraint_frame @ (dag(constraint_frame) @ G)
    kernel = la.null_space(L, eps, floor=eps)
    basis = tuple(_unpack(kernel[:, k], frames) for k in range(kernel.shape[1]))
    return PuritySolutionSpace(tuple(V.shape[1] for V in frames), basis)


def purity_solution_space(M: Povm, A: Subalgebra, eps=DEFAULT_EPS) -> PuritySolutionSpace:
    if A.ambient_dim != M.space_dim:
        raise DimensionError("POVM and subalgebra act on different spaces")
    return _solution_space(M, A.frame(), eps)


def is_a_pure(M: Povm, A: Subalgebra, eps=DEFAULT_EPS) -> bool:
    return purity_solution_space(M, A, eps).dim == 1


def commutant_in(M: Povm, A: Subalgebra, eps=DEFAULT_EPS):
    """Basis of ``{M}' ∩ A`` as a list of matrices (checked to be *-closed)."""
    if A.ambient_dim != M.space_dim:
        raise DimensionError("POVM and subalgebra act on different spaces")
    d = M.space_dim
    I = np.eye(d)
    B = A.frame()
    blocks = [(np.kron(I, E.T) - np.kron(E, I)) @ B for E in M]
    L = np.concatenate(blocks, axis=0)
    coeffs = la.null_space(L, eps, floor=eps)
    sols = [A.element(coeffs[:, k]) for k in range(coeffs.shape[1])]
    if sols:
        frame = np.stack([S.ravel() for S in sols], axis=1)
        q, _ = np.linalg.qr(frame)
        for S in sols:
            v = dag(S).ravel()
            res = float(np.linalg.norm(v - q @ (dag(q) @ v)))
            if res > 1e3 * eps * max(1.0, float(np.linalg.norm(v))):
                raise InvariantError("commutant intersection is not *-closed", res)
    return sols


def is_a_irreducible(M: Povm, A: Subalgebra, eps=DEFAULT_EPS) -> bool:
    return len(commutant_in(M, A, eps)) == 1


def is_classical_extremal(M: Povm, eps=DEFAULT_EPS) -> bool:
    """Ordinary extremality: the effect supports are weakly independent."""
    return _solution_space(M, None, eps).dim == 0


# -- A-equivalence -------------------------------------------------------


class Equivalence(str, Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class EquivalenceResult:
    verdict: Equivalence
    unitary: Optional[np.ndarray] = None
    reason: str = ""

    def __bool__(self):
        return self.verdict is Equivalence.YES


def _intertwiners(M, N, A: Subalgebra, eps):
    """Coefficients of ``{W in A : W M_i = N_i W}``."""
    d = A.ambient_dim
    I = np.eye(d)
    B = A.frame()
    blocks = [(np.kron(I, Mi.T) - np.kron(Ni, I)) @ B for Mi, Ni in zip(M, N)]
    L = np.concatenate(blocks, axis=0)
    return la.null_space(L, eps, floor=eps)


def a_equivalent(M: Povm, N: Povm, A: Subalgebra, eps=DEFAULT_EPS, tol=1e-8, seed=0, tries=16) -> EquivalenceResult:
    """Search for a unitary ``U`` in ``A`` with ``U^dag M_i U = N_i``.

    A YES verdict carries a verified unitary and a NO verdict rests on an
    invariant (spectra, or an empty intertwiner space), so neither can be
    wrong; UNKNOWN means the randomized search found no unitary.
    """
    if M.n != N.n or M.space_dim != N.space_dim or A.ambient_dim != M.space_dim:
        raise DimensionError("POVMs and subalgebra must share the space and outcome count")
    for Mi, Ni in zip(M, N):
        gap = float(np.abs(np.linalg.eigvalsh(Mi) - np.linalg.eigvalsh(Ni)).max())
        if gap > tol:
            return EquivalenceResult(Equivalence.NO, reason=f"effect spectra differ by {gap:.3e}")
    coeffs = _intertwiners(M, N, A, eps)
    if coeffs.shape[1] == 0:
        return EquivalenceResult(Equivalence.NO, reason="no intertwiner in the subalgebra")
    rng = rng_from(seed)
    d = M.space_dim
    for _ in range(tries):
        c = coeffs @ ginibre(rng, coeffs.shape[1], 1).ravel()
        W = A.element(c)
        V, _, unique = la.polar(W, eps)
        if not unique:
            continue
        U = dag(V)
        if not la.is_unitary(U, tol) or not A.contains(U, tol):
            continue
        residual = max(float(np.abs(dag(U) @ Mi @ U - Ni).max()) for Mi, Ni in zip(M, N))
        if residual <= tol:
            return EquivalenceResult(Equivalence.YES, U)
    return EquivalenceResult(Equivalence.UNKNOWN, reason=f"no unitary intertwiner found in {tries} draws")


# -- testers -------------------------------------------------------------


class Verdict(str, Enum):
    EXTREMAL = "Extremal"
    NOT_EXTREMAL = "NotExtremal"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Witness:
    """``F = weight * first + (1 - weight) * second`` with ``first != second``."""

    weight: float
    first: ProcessPovm
    second: ProcessPovm
    first_triple: RepresentationTriple
    second_triple: RepresentationTriple


@dataclass(frozen=True)
class ExtremalityCertificate:
    verdict: Verdict
    purity_dim: int
    witness: Optional[Witness] = None
    minimal: Optional[RepresentationTriple] = None
    diagnostics: tuple = field(default_factory=tuple)


def _hermitian_directions(D, M):
    """Hermitian, trace-orthogonal-to-M parts of a purity solution."""
    mm = sum(float(np.vdot(Mi, Mi).real) for Mi in M)
    out = []
    for H in (tuple((Di + dag(Di)) / 2 for Di in D), tuple((Di - dag(Di)) / 2j for Di in D)):
        c = sum(float(np.vdot(Mi, Hi).real) for Mi, Hi in zip(M, H)) / mm
        H = tuple(Hi - c * Mi for Hi, Mi in zip(H, M))
        size = max(float(np.abs(Hi).max()) for Hi in H)
        if size > 1e-6:
            out.append(tuple(Hi / size for Hi in H))
    return out


def _step_bound(M: Povm, H, h, weight, margin, eps):
    """Largest ``s`` with ``0 <= weight M_i + s H_i <= M_i`` and ``s h`` within the margin."""
    bounds = [margin / max(la.opnorm(h), 1e-300)]
    for Mi, Hi in zip(M, H):
        V = la.support_basis(Mi, eps)
        w = np.linalg.eigvalsh(dag(V) @ Mi @ V)
        R = np.diag(1 / np.sqrt(w)) @ dag(V) @ Hi @ V @ np.diag(1 / np.sqrt(w))
        mu = np.linalg.eigvalsh((R + dag(R)) / 2)
        if mu[-1] > 0:
            bounds.append((1 - weight) / mu[-1])
        if mu[0] < 0:
            bounds.append(weight / -mu[0])
    return min(bounds)


def nonextremal_witness(t: RepresentationTriple, D, eps=DEFAULT_EPS, tol=1e-8) -> Witness:
    """Split the tester of a minimal triple along a purity solution ``D`` not proportional to ``M``.

    ``D`` is symmetrized, the ``M`` component is removed, and the POVM is
    written as ``M_i = X N_i X + Y N'_i Y`` with ``X = d^(1/2)``,
    ``Y = (I - d)^(1/2)`` and ``d = 1/2 + s h`` kept inside ``[1/4, 3/4]``.
    Pushing that split through the input ``T`` gives two distinct testers.
    """
    M = t.M
    d_K, d_H0 = t.d_K, t.d_H0
    directions = _hermitian_directions(D, M)
    if not directions:
        raise DegenerateDirectionError("direction is proportional to the measurement")
    weight, margin = 0.5, 0.25
    F = pp.realize(t)
    last = None
    for H in directions:
        total = sum(H)
        h = la.partial_trace(total, (d_K, d_H0), 1) / d_K
        if float(np.abs(total - pp.lift(h, d_K)).max()) > 1e3 * eps:
            raise InvariantError("direction sum is not in I_K (x) B(H0)", float(np.abs(total - pp.lift(h, d_K)).max()))
        h = (h + dag(h)) / 2
        s = _step_bound(M, H, h, weight, margin, eps)
        for _ in range(60):
            try:
                w = _split(t, H, h, s, weight, eps, tol)
            except (la.NegativeEigenvalueError, InvariantError) as exc:
                last = exc
                s /= 2
                continue
            if tester_gap(w) > tol and pp.tester_distance(_recombine(w), F) <= tol:
                return w
            last = DegenerateDirectionError("split produced coinciding testers")
            break
    raise DegenerateDirectionError(f"no usable split along this direction ({last})")


def tester_gap(w: Witness) -> float:
    return pp.tester_distance(w.first, w.second)


def _recombine(w: Witness) -> ProcessPovm:
    F1, F2 = w.first, w.second
    return ProcessPovm(tuple(w.weight * a + (1 - w.weight) * b for a, b in zip(F1, F2)), F1.d_K, F1.d_H)


def _split(t, H, h, s, weight, eps, tol):
    d_K, d_H0 = t.d_K, t.d_H0
    d = weight * np.eye(d_H0) + s * h
    w = np.linalg.eigvalsh(d)
    if w[0] < 0.25 - 1e-12 or w[-1] > 0.75 + 1e-12:
        raise InvariantError("scaled coefficient left the margin", float(max(0.25 - w[0], w[-1] - 0.75)))
    X = la.psd_sqrt(d, eps)
    Y = la.psd_sqrt(np.eye(d_H0) - d, eps)
    Xi = pp.lift(np.linalg.inv(X), d_K)
    Yi = pp.lift(np.linalg.inv(Y), d_K)
    upper, lower = [], []
    for Mi, Hi in zip(t.M, H):
        part = weight * Mi + s * Hi
        la.psd_eigh(part, eps)
        la.psd_eigh(Mi - part, eps)
        upper.append(Xi @ part @ Xi)
        lower.append(Yi @ (Mi - part) @ Yi)
    N1 = Povm(tuple((E + dag(E)) / 2 for E in upper)).check(1e3 * eps)
    N2 = Povm(tuple((E + dag(E)) / 2 for E in lower)).check(1e3 * eps)
    terms = pp.decompose_along_split(t, [X, Y], [N1, N2], eps, tol)
    if len(terms) != 2:
        raise InvariantError("split lost a term")
    (mu1, t1), (mu2, t2) = terms
    return Witness(mu1, pp.realize(t1), pp.realize(t2), t1, t2)


def certify_process_extremal(F: ProcessPovm, eps=DEFAULT_EPS, seed=0, tol=1e-8) -> ExtremalityCertificate:
    """Decide extremality of a tester from the purity of its minimal measurement.

    Extremal iff the purity solution space for ``I_K (x) B(H0)`` is the
    line through ``M``. Otherwise a witness decomposition is built and
    attached; UNKNOWN is returned only when no direction yields a
    numerically usable witness.
    """
    t = pp.minimal_representation(F, eps)
    A = ancilla_algebra(t.d_K, t.d_H0)
    space = purity_solution_space(t.M, A, eps)
    if space.dim == 1:
        return ExtremalityCertificate(Verdict.EXTREMAL, 1, minimal=t)
    if space.dim == 0:
        return ExtremalityCertificate(Verdict.UNKNOWN, 0, minimal=t, diagnostics=("empty purity space",))
    rng = rng_from(seed)
    order = rng.permutation(space.dim)
    coeffs = ginibre(rng, space.dim, 1).ravel()
    combo = tuple(sum(c * space.basis[k][i] for k, c in enumerate(coeffs)) for i in range(t.M.n))
    notes = []
    for D in [combo] + [space.basis[k] for k in order]:
        try:
            w = nonextremal_witness(t, D, eps, tol)
        except DegenerateDirectionError as exc:
            notes.append(str(exc))
            continue
        return ExtremalityCertificate(Verdict.NOT_EXTREMAL, space.dim, w, t)
    return ExtremalityCertificate(Verdict.UNKNOWN, space.dim, minimal=t, diagnostics=tuple(notes))
