"""Dense complex linear algebra with explicit, relative tolerances.

Every rank decision in the package goes through this module: a singular
value (or eigenvalue of a PSD matrix) counts as zero when it is at most
``eps`` times the largest one.
"""

from __future__ import annotations

import numpy as np

from .errors import DecompositionError, DimensionError, NegativeEigenvalueError, NotHermitianError

DEFAULT_EPS = 1e-9


def check_eps(eps: float) -> float:
    eps = float(eps)
    if not eps > 0 or not np.isfinite(eps):
        raise ValueError(f"tolerance must be a positive finite number, got {eps}")
    return eps


def as_matrix(A, name="matrix") -> np.ndarray:
    """Return ``A`` as a 2-d complex array, rejecting NaN/Inf entries."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got shape {A.shape}")
    if A.size == 0:
        raise DimensionError(f"{name} must be non-empty")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def dag(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def opnorm(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def svd(A, full_matrices=False):
    """Singular value decomposition ``A = U @ diag(s) @ V.conj().T``.

    Returns ``(U, s, V)`` with ``s`` descending. ``V`` is returned as the
    right factor itself (not its adjoint).
    """
    A = as_matrix(A)
    try:
        U, s, Vh = np.linalg.svd(A, full_matrices=full_matrices)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(A.shape, "svd did not converge") from exc
    return U, s, dag(Vh)


def numerical_rank(s: np.ndarray, eps: float) -> int:
    """Number of entries of the descending array ``s`` above ``eps * s[0]``."""
    if len(s) == 0 or s[0] <= 0:
        return 0
    return int(np.sum(s > eps * s[0]))


def rank(A, eps=DEFAULT_EPS) -> int:
    _, s, _ = svd(A)
    return numerical_rank(s, check_eps(eps))


def null_space(L, eps=DEFAULT_EPS, floor=0.0) -> np.ndarray:
    """Orthonormal basis of ker ``L`` as the columns of the returned array.

    Singular values at most ``max(eps * s_max, floor)`` count as zero. The
    ``floor`` matters when ``L`` is zero up to round-off. The returned
    array has shape ``(L.shape[1], k)``; ``k`` may be zero.
    """
    L = as_matrix(L)
    eps = check_eps(eps)
    U, s, V = svd(L, full_matrices=True)
    cutoff = max(eps * s[0], floor) if len(s) else floor
    r = int(np.sum(s > cutoff)) if len(s) and s[0] > 0 else 0
    return V[:, r:]


def range_basis(A, eps=DEFAULT_EPS) -> np.ndarray:
    """Orthonormal basis of the column space of ``A`` (columns)."""
    U, s, _ = svd(A)
    return U[:, : numerical_rank(s, check_eps(eps))]


def hermitian_part(A, eps=DEFAULT_EPS) -> np.ndarray:
    """Symmetrize ``A`` if it is Hermitian within tolerance, else raise."""
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    residual = float(np.abs(A - dag(A)).max())
    if residual > check_eps(eps) * max(1.0, float(np.abs(A).max())):
        raise NotHermitianError(residual)
    return (A + dag(A)) / 2


def psd_eigh(A, eps=DEFAULT_EPS):
    """Eigendecomposition of a PSD matrix, eigenvalues descending and clipped at 0.

    Raises if ``A`` is not Hermitian or has an eigenvalue below
    ``-eps * max(1, lambda_max)``.
    """
    H = hermitian_part(A, eps)
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(H.shape, "eigh did not converge") from exc
    w, V = w[::-1], V[:, ::-1]
    if w[-1] < -eps * max(1.0, w[0]):
        raise NegativeEigenvalueError(float(w[-1]))
    return np.clip(w, 0, None), V


def _support_cutoff(w, eps):
    return eps * w[0] if w[0] > 0 else np.inf


def psd_sqrt(A, eps=DEFAULT_EPS) -> np.ndarray:
    w, V = psd_eigh(A, eps)
    return (V * np.sqrt(w)) @ dag(V)


def psd_inv_sqrt(A, eps=DEFAULT_EPS) -> np.ndarray:
    """Pseudo-inverse square root: inverse on the support, zero on the kernel."""
    w, V = psd_eigh(A, eps)
    keep = w > _support_cutoff(w, eps)
    inv = np.zeros_like(w)
    inv[keep] = 1 / np.sqrt(w[keep])
    return (V * inv) @ dag(V)


def psd_pinv(A, eps=DEFAULT_EPS) -> np.ndarray:
    w, V = psd_eigh(A, eps)
    keep = w > _support_cutoff(w, eps)
    inv = np.zeros_like(w)
    inv[keep] = 1 / w[keep]
    return (V * inv) @ dag(V)


def support_eig(A, eps=DEFAULT_EPS):
    """Nonzero eigenvalues (descending) and eigenvectors of a PSD matrix, in a canonical order.

    Eigenvalues within ``eps * lambda_max`` of each other count as tied.
    A tied eigenspace gets the basis obtained by Gram-Schmidt on the columns
    of its projector, taken in index order, so ``I`` yields the standard
    basis. Each column's phase makes its first entry of magnitude above
    ``sqrt(eps)`` (the pivot) real and positive.
    """
    w, V = psd_eigh(A, eps)
    keep = w > _support_cutoff(w, eps)
    w, V = w[keep], V[:, keep]
    start = 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[k - 1] - w[k] > eps * w[0]:
            if k - start > 1:
                V[:, start:k] = _projector_basis(V[:, start:k])
            start = k
    return w, fix_phases(V)


def _projector_basis(C):
    """Canonical orthonormal basis of the span of the columns of ``C``."""
    d, m = C.shape
    P = C @ dag(C)
    out = []
    for j in range(d):
        if len(out) == m:
            break
        v = P[:, j].copy()
        for b in out:
            v -= b * (b.conj() @ v)
        # some column keeps at least (m - k) / d of its weight
        if np.vdot(v, v).real > 0.5 * (m - len(out)) / d:
            out.append(v / np.linalg.norm(v))
    return np.stack(out, axis=1)


def support_basis(A, eps=DEFAULT_EPS) -> np.ndarray:
    """Orthonormal eigenbasis of the support of a PSD matrix, ordered as in :func:`support_eig`."""
    return support_eig(A, eps)[1]


def fix_phases(V: np.ndarray) -> np.ndarray:
    V = np.array(V, dtype=complex)
    for k in range(V.shape[1]):
        col = V[:, k]
        big = np.flatnonzero(np.abs(col) > np.sqrt(DEFAULT_EPS))
        if len(big):
            p = col[big[0]]
            V[:, k] = col * (np.abs(p) / p)
    return V


def support_projection(A, eps=DEFAULT_EPS) -> np.ndarray:
    B = support_basis(A, eps)
    return B @ dag(B)


def polar(A, eps=DEFAULT_EPS):
    """Polar decomposition ``A = W @ P`` with ``P = (A^dag A)^(1/2)``.

    Returns ``(W, P, unique)``. ``W`` is unitary for square input (an
    isometry/co-isometry otherwise). When ``A`` is rank deficient, ``W`` is
    an arbitrary completion on ker ``A`` and ``unique`` is False.
    """
    A = as_matrix(A)
    U, s, V = svd(A)
    W = U @ dag(V)
    P = (V * s) @ dag(V)
    unique = numerical_rank(s, check_eps(eps)) == A.shape[1]
    return W, P, unique


def kron(*mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def partial_trace(A, dims, which) -> np.ndarray:
    """Trace out factor ``which`` (1 or 2) of ``A`` acting on C^d1 (x) C^d2."""
    A = as_matrix(A)
    d1, d2 = (int(d) for d in dims)
    if A.shape != (d1 * d2, d1 * d2):
        raise DimensionError(f"matrix of shape {A.shape} does not act on dims {(d1, d2)}")
    T = A.reshape(d1, d2, d1, d2)
    if which == 1:
        return np.einsum("ijik->jk", T)
    if which == 2:
        return np.einsum("ijkj->ik", T)
    raise ValueError(f"factor index must be 1 or 2, got {which}")


def is_projection(P, eps=DEFAULT_EPS) -> bool:
    P = as_matrix(P)
    if P.shape[0] != P.shape[1]:
        return False
    scale = max(1.0, float(np.abs(P).max()))
    return bool(np.abs(P - dag(P)).max() <= eps * scale * 10 and np.abs(P @ P - P).max() <= eps * scale * 10)


def is_unitary(U, eps=DEFAULT_EPS) -> bool:
    U = as_matrix(U)
    return U.shape[0] == U.shape[1] and is_isometry(U, eps)


def is_isometry(V, eps=DEFAULT_EPS) -> bool:
    V = as_matrix(V)
    return bool(np.abs(dag(V) @ V - np.eye(V.shape[1])).max() <= 10 * eps)


def hs_inner(A, B) -> complex:
    """Hilbert-Schmidt inner product Tr(A^dag B)."""
    return complex(np.vdot(np.asarray(A).ravel(), np.asarray(B).ravel()))


def orthonormalize_matrices(mats, eps=DEFAULT_EPS):
    """Hilbert-Schmidt orthonormal basis of span(mats), as a list of matrices.

    The cutoff is relative to the largest singular value of the stacked
    vectorizations.
    """
    mats = [np.asarray(m, dtype=complex) for m in mats]
    if not mats:
        return []
    shape = mats[0].shape
    stack = np.stack([m.ravel() for m in mats], axis=1)
    B = range_basis(stack, eps)
    return [B[:, k].reshape(shape) for k in range(B.shape[1])]
