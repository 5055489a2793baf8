"""Process POVMs (quantum 1-testers) and their representing triples.

A process POVM ``F`` on K (x) H is a list of PSD effects with
``sum_i F_i = I_K (x) sigma`` for a density matrix ``sigma`` on H. A
representing triple ``(H0, input, M)`` implements ``F`` by feeding the
input state on H (x) H0 to the unknown channel and measuring ``M`` on
K (x) H0.

Operators ``T: H -> H0`` are stored as ``(d_H0, d_H)`` arrays; their
extensions ``I_K (x) T`` are formed only where they are used.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import linalg as la
from . import quantum as qo
from .errors import (
    DimensionError,
    InvariantError,
    NotEquivalentError,
    NotMinimalError,
    SplitInconsistencyError,
)
from .linalg import DEFAULT_EPS, dag
from .quantum import Channel, Povm


def lift(A, d_K: int) -> np.ndarray:
    """``I_K (x) A``."""
    return np.kron(np.eye(d_K), np.asarray(A, dtype=complex))


@dataclass(frozen=True)
class ProcessPovm:
    effects: tuple
    d_K: int
    d_H: int

    def __post_init__(self):
        effects = tuple(qo._freeze(F) for F in self.effects)
        if not effects:
            raise DimensionError("a process POVM needs at least one effect")
        d = self.d_K * self.d_H
        for F in effects:
            if F.shape != (d, d):
                raise DimensionError(f"effects must be {d}x{d} for d_K={self.d_K}, d_H={self.d_H}")
        object.__setattr__(self, "effects", effects)

    @property
    def n(self) -> int:
        return len(self.effects)

    def __len__(self):
        return len(self.effects)

    def __getitem__(self, i):
        return self.effects[i]

    def __iter__(self):
        return iter(self.effects)

    @property
    def sigma(self) -> np.ndarray:
        return la.partial_trace(sum(self.effects), (self.d_K, self.d_H), 1) / self.d_K

    def residuals(self) -> dict:
        herm, neg = qo._psd_residuals(self.effects)
        sigma = self.sigma
        norm = float(np.abs(sum(self.effects) - lift(sigma, self.d_K)).max())
        state = qo.state_residuals(sigma)
        return {
            "hermitian": herm,
            "positive": neg,
            "normalization": norm,
            "sigma_positive": state["positive"],
            "sigma_trace": state["trace"],
        }

    def check(self, eps=DEFAULT_EPS) -> "ProcessPovm":
        limits = {
            "hermitian": eps,
            "positive": eps,
            "normalization": self.n * eps,
            "sigma_positive": eps,
            "sigma_trace": self.n * eps,
        }
        qo._raise_on(self.residuals(), limits, "process POVM")
        return self


def tester_distance(F: ProcessPovm, G: ProcessPovm) -> float:
    """Largest entrywise deviation between corresponding effects."""
    if F.n != G.n or (F.d_K, F.d_H) != (G.d_K, G.d_H):
        raise DimensionError("testers have different shapes or outcome counts")
    return qo.max_effect_distance(F, G)


@dataclass(frozen=True)
class RepresentationTriple:
    """Ancilla dimension, input (pure ``T`` or mixed ``rho``) and a POVM on K (x) H0.

    Exactly one of ``T`` (shape ``(d_H0, d_H)``, ``Tr T^dag T = 1``) and
    ``rho`` (a state on H (x) H0) must be given.
    """

    d_H0: int
    M: Povm
    T: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.T is None) == (self.rho is None):
            raise ValueError("give exactly one of T (pure input) or rho (mixed input)")
        if self.M.space_dim % self.d_H0:
            raise DimensionError(f"POVM dimension {self.M.space_dim} is not a multiple of d_H0={self.d_H0}")
        if self.T is not None:
            T = qo._freeze(self.T)
            if T.shape[0] != self.d_H0:
                raise DimensionError(f"T has {T.shape[0]} rows, expected d_H0={self.d_H0}")
            object.__setattr__(self, "T", T)
        else:
            rho = qo._freeze(self.rho)
            if rho.shape[0] % self.d_H0 or rho.shape[0] != rho.shape[1]:
                raise DimensionError(f"state of shape {rho.shape} does not live on H (x) H0")
            object.__setattr__(self, "rho", rho)

    @property
    def is_pure(self) -> bool:
        return self.T is not None

    @property
    def d_K(self) -> int:
        return self.M.space_dim // self.d_H0

    @property
    def d_H(self) -> int:
        return self.T.shape[1] if self.is_pure else self.rho.shape[0] // self.d_H0

    @property
    def n(self) -> int:
        return self.M.n

    def input_state(self) -> np.ndarray:
        if self.is_pure:
            v = qo.vectorize(self.T)
            return np.outer(v, v.conj())
        return np.array(self.rho)

    def check(self, eps=DEFAULT_EPS) -> "RepresentationTriple":
        self.M.check(eps)
        if self.is_pure:
            norm = abs(np.trace(dag(self.T) @ self.T) - 1)
            if norm > eps * 10:
                raise InvariantError("pure input T must satisfy Tr T^dag T = 1", norm)
        else:
            qo.check_state(self.rho, eps)
        return self


def realize(t: RepresentationTriple) -> ProcessPovm:
    """The process POVM implemented by a triple."""
    d_K, d_H, d_H0 = t.d_K, t.d_H, t.d_H0
    if t.is_pure:
        L = lift(t.T, d_K)
        effects = [dag(L) @ M @ L for M in t.M]
    else:
        R = t.rho.reshape(d_H, d_H0, d_H, d_H0)
        effects = []
        for M in t.M:
            Mt = M.reshape(d_K, d_H0, d_K, d_H0)
            # (id_K (x) adjoint state map)(M): block (a,b) -> (Tr_H0[M_ab rho])^t
            F = np.einsum("axbz,qzpx->apbq", Mt, R)
            effects.append(F.reshape(d_K * d_H, d_K * d_H))
    effects = [(F + dag(F)) / 2 for F in effects]
    return ProcessPovm(tuple(effects), d_K, d_H)


def tester_probabilities(F: ProcessPovm, channel: Channel) -> np.ndarray:
    """Outcome distribution ``Tr F_i C(channel)``."""
    if (channel.out_dim, channel.in_dim) != (F.d_K, F.d_H):
        raise DimensionError(
            f"channel {channel.in_dim}->{channel.out_dim} does not match tester on K={F.d_K}, H={F.d_H}"
        )
    C = qo.choi(channel)
    return np.array([np.trace(Fi @ C).real for Fi in F])


def tester_rank(F: ProcessPovm, eps=DEFAULT_EPS) -> int:
    return la.rank(F.sigma, eps)


def minimal_representation(F: ProcessPovm, eps=DEFAULT_EPS) -> RepresentationTriple:
    """Pure-input representation with surjective ``T`` and ``d_H0 = rank(sigma)``.

    The ancilla basis is the eigenbasis of ``sigma`` in order of decreasing
    eigenvalue, ties and phases fixed as in :func:`linalg.support_eig`.
    Degenerate eigenvalues make the result canonical only up to a unitary
    rotation inside each eigenspace.
    """
    sigma = F.sigma
    lam, V = la.support_eig(sigma, eps)
    T = np.sqrt(lam)[:, None] * dag(V)
    C = lift(V / np.sqrt(lam)[None, :], F.d_K)
    effects = [dag(C) @ Fi @ C for Fi in F]
    effects = [(E + dag(E)) / 2 for E in effects]
    return RepresentationTriple(V.shape[1], Povm(tuple(effects)), T=T)


def triples_equivalent(a: RepresentationTriple, b: RepresentationTriple, tol=1e-8) -> bool:
    if a.n != b.n:
        raise DimensionError(f"outcome counts differ ({a.n} vs {b.n})")
    if (a.d_K, a.d_H) != (b.d_K, b.d_H):
        return False
    return tester_distance(realize(a), realize(b)) <= tol


def is_minimal(t: RepresentationTriple, eps=DEFAULT_EPS) -> bool:
    return t.is_pure and la.rank(t.T, eps) == t.d_H0


def connecting_isometry(a: RepresentationTriple, b: RepresentationTriple, eps=DEFAULT_EPS, tol=1e-7) -> np.ndarray:
    """Isometry ``U: H0_a -> H0_b`` with ``U T_a = T_b`` and ``U^dag M_b U = M_a``.

    ``a`` must be minimal and ``b`` must have a pure input. ``U`` is
    unitary exactly when ``b`` is minimal too.
    """
    if not b.is_pure:
        raise ValueError("the second triple must have a pure input")
    if not is_minimal(a, eps):
        raise NotMinimalError("the first triple is not a minimal representation")
    if not triples_equivalent(a, b, tol):
        raise NotEquivalentError("triples realize different process POVMs")
    _, s, _ = la.svd(a.T)
    U = b.T @ np.linalg.pinv(a.T, rcond=eps)
    checks = {
        "isometry": float(np.abs(dag(U) @ U - np.eye(a.d_H0)).max()),
        "input": float(np.abs(U @ a.T - b.T).max()),
    }
    L = lift(U, a.d_K)
    checks["measurement"] = max(float(np.abs(dag(L) @ Mb @ L - Ma).max()) for Ma, Mb in zip(a.M, b.M))
    # the recovered U inherits the conditioning of T_a
    scale = tol * max(1.0, s[0] / s[-1])
    for name, residual in checks.items():
        if residual > scale:
            raise NotEquivalentError(f"connecting isometry failed the {name} check (residual {residual:.3e})")
    return U


def verify_connecting_channel(
    a: RepresentationTriple, b: RepresentationTriple, chi: Channel, tol=1e-8
) -> bool:
    """Check ``(id (x) chi)(rho_a) = rho_b`` and ``M_a = (id (x) chi^*)(M_b)``."""
    if (chi.in_dim, chi.out_dim) != (a.d_H0, b.d_H0):
        raise DimensionError("channel does not map H0_a to H0_b")
    rho_b = qo.apply_on_factor(chi, a.input_state(), (a.d_H, a.d_H0), 2)
    if float(np.abs(rho_b - b.input_state()).max()) > tol:
        return False
    for Ma, Mb in zip(a.M, b.M):
        if float(np.abs(qo.apply_adjoint_on_factor(chi, Mb, (b.d_K, b.d_H0), 2) - Ma).max()) > tol:
            return False
    return True


def _check_weights(weights, tol=1e-9):
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise ValueError("mixing weights must be strictly positive")
    if abs(weights.sum() - 1) > tol * len(weights):
        raise ValueError(f"mixing weights sum to {weights.sum()}, not 1")
    return weights


def mixing_split(terms: Sequence, eps=DEFAULT_EPS):
    """Coefficients of the minimal representation of a convex mixture.

    ``terms`` is a sequence of ``(weight, triple)`` with pure inputs. Returns
    ``(S, Xs)`` where ``S: H -> H_S`` is the input of the mixture and
    ``Xs[i]: H_S -> H0_i`` satisfy ``sum X_i^dag X_i = I`` and
    ``X_i S = sqrt(weight_i) T_i``.
    """
    if not terms:
        raise ValueError("nothing to mix")
    weights = _check_weights([w for w, _ in terms])
    triples = [t for _, t in terms]
    first = triples[0]
    for t in triples:
        if not t.is_pure:
            raise ValueError("mixing needs pure-input triples")
        if (t.d_K, t.d_H, t.n) != (first.d_K, first.d_H, first.n):
            raise DimensionError("all triples must share K, H and the outcome count")
    sigma = sum(w * dag(t.T) @ t.T for w, t in zip(weights, triples))
    lam, V = la.support_eig(sigma, eps)
    S = np.sqrt(lam)[:, None] * dag(V)
    S_inv = V / np.sqrt(lam)[None, :]
    Xs = [np.sqrt(w) * t.T @ S_inv for w, t in zip(weights, triples)]
    gram = sum(dag(X) @ X for X in Xs)
    residual = float(np.abs(gram - np.eye(V.shape[1])).max())
    if residual > 1e3 * eps:
        raise InvariantError("mixing coefficients are not normalized", residual)
    return S, Xs


def mix(terms: Sequence, eps=DEFAULT_EPS) -> RepresentationTriple:
    """Minimal representation of ``sum_i weight_i realize(triple_i)``."""
    S, Xs = mixing_split(terms, eps)
    d_K = terms[0][1].d_K
    n = terms[0][1].n
    effects = []
    for k in range(n):
        N = sum(dag(lift(X, d_K)) @ t.M[k] @ lift(X, d_K) for X, (_, t) in zip(Xs, terms))
        effects.append((N + dag(N)) / 2)
    return RepresentationTriple(S.shape[0], Povm(tuple(effects)), T=S)


def a_convex_sum(Xs, parts, d_K: int):
    """``sum_j (I (x) X_j)^dag M^j (I (x) X_j)`` outcome by outcome."""
    n = parts[0].n
    out = []
    for k in range(n):
        out.append(sum(dag(lift(X, d_K)) @ P[k] @ lift(X, d_K) for X, P in zip(Xs, parts)))
    return out


def decompose_along_split(t: RepresentationTriple, Xs, parts, eps=DEFAULT_EPS, tol=1e-8):
    """Split a tester along a decomposition ``M = sum_j X_j^dag M^j X_j``.

    ``Xs[j]`` maps H0 to the ancilla of ``parts[j]`` (often H0 itself).
    Returns ``[(mu_j, triple_j)]`` for the indices with ``mu_j > eps``;
    the weights sum to one and the weighted testers sum to ``realize(t)``.
    """
    if not t.is_pure:
        raise ValueError("decomposition needs a pure-input triple")
    if len(Xs) != len(parts):
        raise DimensionError("need one POVM per coefficient")
    Xs = [la.as_matrix(X, "coefficient") for X in Xs]
    for X, P in zip(Xs, parts):
        if X.shape[1] != t.d_H0 or P.space_dim != t.d_K * X.shape[0] or P.n != t.n:
            raise DimensionError("coefficient/POVM shapes do not match the triple")
    gram = sum(dag(X) @ X for X in Xs)
    gram_res = float(np.abs(gram - np.eye(t.d_H0)).max())
    if gram_res > tol:
        raise SplitInconsistencyError(f"coefficients do not resolve the identity (residual {gram_res:.3e})")
    combined = a_convex_sum(Xs, parts, t.d_K)
    residual = max(float(np.abs(c - m).max()) for c, m in zip(combined, t.M))
    if residual > tol:
        raise SplitInconsistencyError(f"split does not reproduce the measurement (residual {residual:.3e})")
    out = []
    for X, P in zip(Xs, parts):
        Y = X @ t.T
        mu = float(np.trace(dag(Y) @ Y).real)
        if mu <= eps:
            continue
        out.append((mu, RepresentationTriple(X.shape[0], P, T=Y / np.sqrt(mu))))
    return out


def restrict_to_minimal(t: RepresentationTriple, eps=DEFAULT_EPS) -> RepresentationTriple:
    """Compress the ancilla to the range of ``T``."""
    if not t.is_pure:
        raise ValueError("restriction needs a pure-input triple")
    B = la.range_basis(t.T, eps)
    L = lift(B, t.d_K)
    effects = [dag(L) @ M @ L for M in t.M]
    return RepresentationTriple(B.shape[1], Povm(tuple(effects)), T=dag(B) @ t.T)


def extend_ancilla(t: RepresentationTriple, d_new: int) -> RepresentationTriple:
    """Embed H0 as the first ``d_H0`` coordinates of a larger ancilla."""
    if not t.is_pure:
        raise ValueError("extension needs a pure-input triple")
    if d_new < t.d_H0:
        raise DimensionError(f"cannot shrink the ancilla from {t.d_H0} to {d_new}")
    E = np.eye(d_new, t.d_H0, dtype=complex)
    M = qo.extend_povm(t.M, lift(E, t.d_K))
    return RepresentationTriple(d_new, M, T=E @ t.T)


def purify(t: RepresentationTriple, eps=DEFAULT_EPS) -> RepresentationTriple:
    """Pure-input triple for the same tester: the ancilla grows by the rank of the input state."""
    if t.is_pure:
        return t
    w, V = la.psd_eigh(t.rho, eps)
    keep = w > eps * w[0]
    w, V = w[keep], V[:, keep]
    r = len(w)
    # psi = sum_k sqrt(w_k) v_k (x) e_k on H (x) (H0 (x) R)
    psi = (V * np.sqrt(w)[None, :]).reshape(-1)
    T = qo.devectorize(psi, t.d_H, t.d_H0 * r)
    M = Povm(tuple(np.kron(E, np.eye(r)) for E in t.M))
    return RepresentationTriple(t.d_H0 * r, M, T=T)
