"""States, POVMs, channels and the Choi isomorphism.

Conventions (fixed once, used everywhere):

* Computational basis ``|i>`` in index order for every transpose.
* Choi matrices live on K (x) H (output first): ``C(phi) = (phi (x) id)(psi_H)``
  with the unnormalized ``psi_H = sum_ij |i><j| (x) |i><j|``.
* Bipartite input states live on H (x) H0 (system first, ancilla second),
  and ``|T>> = sum_i |i> (x) T|i>`` for ``T: H -> H0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import linalg as la
from .errors import DimensionError, InvariantError
from .linalg import DEFAULT_EPS, dag


def _freeze(A) -> np.ndarray:
    A = la.as_matrix(A)
    A = A.copy()
    A.setflags(write=False)
    return A


def _psd_residuals(effects):
    herm = max(float(np.abs(E - dag(E)).max()) for E in effects)
    neg = 0.0
    for E in effects:
        w = np.linalg.eigvalsh((E + dag(E)) / 2)
        neg = max(neg, float(-w[0]))
    return herm, neg


def _raise_on(residuals: dict, limits: dict, what: str):
    for key, value in residuals.items():
        if value > limits[key]:
            raise InvariantError(f"{what}: {key} check failed", value)


# -- states --------------------------------------------------------------


def state_residuals(rho) -> dict:
    rho = la.as_matrix(rho, "state")
    herm, neg = _psd_residuals([rho])
    return {"hermitian": herm, "positive": neg, "trace": abs(np.trace(rho) - 1)}


def check_state(rho, eps=DEFAULT_EPS) -> np.ndarray:
    """Validate a density matrix and return it as a complex array."""
    rho = la.as_matrix(rho, "state")
    if rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"state must be square, got {rho.shape}")
    _raise_on(state_residuals(rho), dict.fromkeys(("hermitian", "positive", "trace"), eps), "density matrix")
    return rho


def pure_state(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    return np.outer(v, v.conj())


# -- POVMs ---------------------------------------------------------------


@dataclass(frozen=True)
class Povm:
    """An ordered list of PSD effects summing to the identity.

    Construction only checks shapes; call :meth:`check` to validate the
    operator invariants against a tolerance.
    """

    effects: tuple

    def __post_init__(self):
        effects = tuple(_freeze(E) for E in self.effects)
        if not effects:
            raise DimensionError("a POVM needs at least one effect")
        d = effects[0].shape[0]
        for E in effects:
            if E.shape != (d, d):
                raise DimensionError(f"effects must all be {d}x{d}, got {E.shape}")
        object.__setattr__(self, "effects", effects)

    @property
    def n(self) -> int:
        return len(self.effects)

    @property
    def space_dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self):
        return len(self.effects)

    def __getitem__(self, i):
        return self.effects[i]

    def __iter__(self):
        return iter(self.effects)

    def total(self) -> np.ndarray:
        return sum(self.effects)

    def residuals(self) -> dict:
        herm, neg = _psd_residuals(self.effects)
        norm = float(np.abs(self.total() - np.eye(self.space_dim)).max())
        return {"hermitian": herm, "positive": neg, "normalization": norm}

    def check(self, eps=DEFAULT_EPS) -> "Povm":
        limits = {"hermitian": eps, "positive": eps, "normalization": self.n * eps}
        _raise_on(self.residuals(), limits, "POVM")
        return self

    def is_projective(self, eps=DEFAULT_EPS) -> bool:
        return all(la.is_projection(E, eps) for E in self.effects)

    def allclose(self, other: "Povm", tol) -> bool:
        return self.n == other.n and self.space_dim == other.space_dim and max_effect_distance(self, other) <= tol


def max_effect_distance(a, b) -> float:
    return max(float(np.abs(x - y).max()) for x, y in zip(a, b))


def povm(effects, eps=DEFAULT_EPS) -> Povm:
    """Build and validate a POVM."""
    return Povm(tuple(effects)).check(eps)


def extend_povm(M: Povm, embedding, eps=DEFAULT_EPS) -> Povm:
    """Extend a POVM on a subspace to the whole space.

    ``embedding`` is either an isometry ``V`` (big x small) identifying the
    subspace, or an orthogonal projection of rank ``M.space_dim``; for a
    projection the subspace basis is :func:`linalg.support_basis` of ``P``
    (standard basis vectors stay in order).
    The uniform term ``(I - P)/n`` fills the complement.
    """
    V = la.as_matrix(embedding, "embedding")
    if V.shape[0] == V.shape[1] and V.shape[0] != M.space_dim:
        if not la.is_projection(V, eps):
            raise DimensionError("square embedding must be an orthogonal projection")
        V = la.support_basis(V, eps)
    if V.shape[1] != M.space_dim:
        raise DimensionError(f"embedding has rank {V.shape[1]}, POVM lives in dimension {M.space_dim}")
    if not la.is_isometry(V, eps):
        raise DimensionError("embedding is not an isometry")
    P = V @ dag(V)
    rest = (np.eye(V.shape[0]) - P) / M.n
    return Povm(tuple(V @ E @ dag(V) + rest for E in M.effects))


def measure(M: Povm, rho) -> np.ndarray:
    """Outcome probabilities ``Tr rho M_i``."""
    rho = la.as_matrix(rho, "state")
    if rho.shape != (M.space_dim, M.space_dim):
        raise DimensionError(f"state of shape {rho.shape} does not match POVM dimension {M.space_dim}")
    return np.array([np.trace(rho @ E).real for E in M.effects])


# -- channels ------------------------------------------------------------


@dataclass(frozen=True)
class Channel:
    """A CPTP map given by Kraus operators of shape (out_dim, in_dim)."""

    kraus: tuple

    def __post_init__(self):
        kraus = tuple(_freeze(K) for K in self.kraus)
        if not kraus:
            raise DimensionError("a channel needs at least one Kraus operator")
        shape = kraus[0].shape
        if any(K.shape != shape for K in kraus):
            raise DimensionError("Kraus operators must share one shape")
        object.__setattr__(self, "kraus", kraus)

    @property
    def in_dim(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.kraus[0].shape[0]

    def residuals(self) -> dict:
        s = sum(dag(K) @ K for K in self.kraus)
        return {"trace_preserving": float(np.abs(s - np.eye(self.in_dim)).max())}

    def check(self, eps=DEFAULT_EPS) -> "Channel":
        _raise_on(self.residuals(), {"trace_preserving": eps * 10}, "channel")
        return self

    def __call__(self, rho) -> np.ndarray:
        return apply_channel(self, rho)

    def adjoint(self, B) -> np.ndarray:
        """Heisenberg picture: ``B -> sum_k K^dag B K``."""
        B = np.asarray(B, dtype=complex)
        return sum(dag(K) @ B @ K for K in self.kraus)


def identity_channel(d: int) -> Channel:
    return Channel((np.eye(d),))


def unitary_channel(U) -> Channel:
    return Channel((U,))


def apply_channel(channel: Channel, rho) -> np.ndarray:
    rho = la.as_matrix(rho, "state")
    if rho.shape != (channel.in_dim, channel.in_dim):
        raise DimensionError(f"state of shape {rho.shape} does not match channel input {channel.in_dim}")
    return sum(K @ rho @ dag(K) for K in channel.kraus)


def apply_on_factor(channel: Channel, A, dims, factor: int) -> np.ndarray:
    """Apply ``channel`` to tensor factor ``factor`` (1 or 2) of ``A`` on C^d1 (x) C^d2."""
    d1, d2 = dims
    A = la.as_matrix(A)
    if A.shape != (d1 * d2, d1 * d2):
        raise DimensionError(f"matrix of shape {A.shape} does not act on dims {dims}")
    if factor == 1:
        if channel.in_dim != d1:
            raise DimensionError("channel input does not match factor 1")
        ops = [la.kron(K, np.eye(d2)) for K in channel.kraus]
    elif factor == 2:
        if channel.in_dim != d2:
            raise DimensionError("channel input does not match factor 2")
        ops = [la.kron(np.eye(d1), K) for K in channel.kraus]
    else:
        raise ValueError("factor must be 1 or 2")
    return sum(K @ A @ dag(K) for K in ops)


def apply_adjoint_on_factor(channel: Channel, B, dims, factor: int) -> np.ndarray:
    """Heisenberg-picture counterpart of :func:`apply_on_factor`.

    ``dims`` are the dimensions of the output side (where ``B`` lives).
    """
    d1, d2 = dims
    B = la.as_matrix(B)
    if B.shape != (d1 * d2, d1 * d2):
        raise DimensionError(f"matrix of shape {B.shape} does not act on dims {dims}")
    if factor == 1:
        ops = [la.kron(K, np.eye(d2)) for K in channel.kraus]
    elif factor == 2:
        ops = [la.kron(np.eye(d1), K) for K in channel.kraus]
    else:
        raise ValueError("factor must be 1 or 2")
    return sum(dag(K) @ B @ K for K in ops)


def max_entangled_unnormalized(d: int) -> np.ndarray:
    """``psi_H = sum_ij |i><j| (x) |i><j|`` (trace ``d``)."""
    v = np.eye(d, dtype=complex).ravel()
    return np.outer(v, v)


def choi(channel: Channel) -> np.ndarray:
    """Unnormalized Choi matrix on K (x) H."""
    vecs = [K.ravel() for K in channel.kraus]  # sum_i K|i> (x) |i>
    return sum(np.outer(v, v.conj()) for v in vecs)


def channel_from_choi(C, in_dim: int, out_dim: int, eps=DEFAULT_EPS) -> Channel:
    """Invert :func:`choi`; one Kraus operator per nonzero eigenvalue."""
    C = la.as_matrix(C, "Choi matrix")
    if C.shape != (in_dim * out_dim, in_dim * out_dim):
        raise DimensionError(f"Choi matrix of shape {C.shape} does not match {out_dim}x{in_dim}")
    w, V = la.psd_eigh(C, eps)
    tp = la.partial_trace(C, (out_dim, in_dim), 1)
    residual = float(np.abs(tp - np.eye(in_dim)).max())
    if residual > 10 * eps * max(1.0, w[0]):
        raise InvariantError("Choi matrix is not trace preserving", residual)
    r = la.numerical_rank(w, eps)
    kraus = [np.sqrt(w[k]) * V[:, k].reshape(out_dim, in_dim) for k in range(r)]
    return Channel(tuple(kraus))


# -- vectorization and Schmidt structure ---------------------------------


def vectorize(T) -> np.ndarray:
    """``|T>> = sum_i |i> (x) T|i>`` for ``T`` of shape (d_H0, d_H)."""
    T = la.as_matrix(T)
    return T.T.ravel().copy()


def devectorize(v, d_H: int, d_H0: int) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    if v.size != d_H * d_H0:
        raise DimensionError(f"vector of length {v.size} does not match {d_H}x{d_H0}")
    return v.reshape(d_H, d_H0).T.copy()


def schmidt(v, dims, eps=DEFAULT_EPS):
    """Schmidt decomposition of ``v`` on C^d1 (x) C^d2.

    Returns ``(alphas, left, right)`` with ``v = sum_k alphas[k] left[:, k] (x) right[:, k]``.
    """
    d1, d2 = dims
    v = np.asarray(v, dtype=complex).ravel()
    if v.size != d1 * d2:
        raise DimensionError(f"vector of length {v.size} does not match dims {dims}")
    if not np.any(v):
        raise ValueError("Schmidt decomposition of the zero vector")
    U, s, V = la.svd(v.reshape(d1, d2))
    r = la.numerical_rank(s, eps)
    return s[:r], U[:, :r], V[:, :r].conj()


def schmidt_rank(v, dims, eps=DEFAULT_EPS) -> int:
    return len(schmidt(v, dims, eps)[0])


# -- the input-state maps ------------------------------------------------


def state_map(rho, d_H: int, d_H0: int) -> Callable[[np.ndarray], np.ndarray]:
    """The CP map ``A -> Tr_H[rho (A^t (x) I)]`` from B(H) to B(H0) determined by ``rho``."""
    R = la.as_matrix(rho).reshape(d_H, d_H0, d_H, d_H0)

    def apply(A):
        A = np.asarray(A, dtype=complex)
        # sum_{ik} A_ik rho[(i,x),(k,y)]
        return np.einsum("ik,ixky->xy", A, R)

    return apply


def state_adjoint_map(rho, d_H: int, d_H0: int) -> Callable[[np.ndarray], np.ndarray]:
    """Hilbert-Schmidt adjoint of :func:`state_map`: ``B -> (Tr_H0[(I (x) B) rho])^t``."""
    rho = la.as_matrix(rho)
    if rho.shape != (d_H * d_H0, d_H * d_H0):
        raise DimensionError(f"state of shape {rho.shape} does not act on {d_H}x{d_H0}")
    R = rho.reshape(d_H, d_H0, d_H, d_H0)

    def apply(B):
        B = np.asarray(B, dtype=complex)
        if B.shape != (d_H0, d_H0):
            raise DimensionError(f"operator of shape {B.shape} does not act on the ancilla ({d_H0})")
        # R_ij = sum_{x,z} B_xz rho[(i,z),(j,x)]; return R^t
        return np.einsum("xz,izjx->ji", B, R)

    return apply


def matrix_units(d: int) -> Sequence[np.ndarray]:
    """Matrix units ``|a><b|`` of B(C^d), row-major order."""
    units = []
    for a in range(d):
        for b in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[a, b] = 1
            units.append(E)
    return units
