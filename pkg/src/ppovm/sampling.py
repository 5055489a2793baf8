"""Seeded random instances: states, unitaries, POVMs, channels, testers.

All generators take a ``numpy.random.Generator``; the same seed always
gives the same instance.
"""

from __future__ import annotations

import numpy as np

from . import linalg as la
from .linalg import dag
from .process import RepresentationTriple, lift, realize
from .quantum import Channel, Povm


def rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ginibre(rng, rows, cols=None) -> np.ndarray:
    cols = rows if cols is None else cols
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_unitary(d: int, rng) -> np.ndarray:
    """Haar-random unitary (QR with the phase correction)."""
    Q, R = np.linalg.qr(ginibre(rng, d))
    phases = np.diag(R) / np.abs(np.diag(R))
    return Q * phases


def random_isometry(rows: int, cols: int, rng) -> np.ndarray:
    return random_unitary(rows, rng)[:, :cols]


def random_hermitian(d: int, rng) -> np.ndarray:
    G = ginibre(rng, d)
    return (G + dag(G)) / 2


def random_state(d: int, rng, rank=None) -> np.ndarray:
    G = ginibre(rng, d, d if rank is None else rank)
    rho = G @ dag(G)
    return rho / np.trace(rho).real


def random_pure_state(d: int, rng) -> np.ndarray:
    v = ginibre(rng, d, 1).ravel()
    v /= np.linalg.norm(v)
    return v


def random_povm(d: int, n: int, rng, rank=None) -> Povm:
    """Normalized Wishart effects ``S^-1/2 G_i S^-1/2`` with ``G_i = A_i^dag A_i``."""
    G = []
    for _ in range(n):
        A = ginibre(rng, d if rank is None else rank, d)
        G.append(dag(A) @ A)
    S_inv = la.psd_inv_sqrt(sum(G))
    return Povm(tuple(_herm(S_inv @ g @ S_inv) for g in G))


def random_rank1_povm(d: int, n: int, rng) -> Povm:
    if n < d:
        raise ValueError("a rank-one POVM needs at least d outcomes")
    return random_povm(d, n, rng, rank=1)


def random_pvm(d: int, n: int, rng, ranks=None) -> Povm:
    """Projections onto blocks of a Haar-random basis; ``ranks`` defaults to an even split."""
    if ranks is None:
        if n > d:
            raise ValueError("a PVM with nonzero effects has at most d outcomes")
        ranks = [d // n + (1 if k < d % n else 0) for k in range(n)]
    if sum(ranks) != d or len(ranks) != n:
        raise ValueError("ranks must sum to the dimension")
    U = random_unitary(d, rng)
    effects, start = [], 0
    for r in ranks:
        B = U[:, start : start + r]
        effects.append(B @ dag(B))
        start += r
    return Povm(tuple(effects))


def random_channel(d_in: int, d_out: int, rng, kraus_rank=None) -> Channel:
    """Channel from a random isometry H -> K (x) E cut into Kraus blocks."""
    r = kraus_rank or d_in * d_out
    V = random_isometry(d_out * r, d_in, rng)
    blocks = V.reshape(d_out, r, d_in)
    return Channel(tuple(blocks[:, k, :] for k in range(r)))


def random_input(d_H0: int, d_H: int, rng) -> np.ndarray:
    """Random ``T: H -> H0`` with ``Tr T^dag T = 1`` (surjective when ``d_H0 <= d_H``)."""
    T = ginibre(rng, d_H0, d_H)
    return T / np.linalg.norm(T)


def random_triple(d_K: int, d_H: int, d_H0: int, n: int, rng, mixed=False) -> RepresentationTriple:
    M = random_povm(d_K * d_H0, n, rng)
    if mixed:
        return RepresentationTriple(d_H0, M, rho=random_state(d_H * d_H0, rng))
    return RepresentationTriple(d_H0, M, T=random_input(d_H0, d_H, rng))


def random_tester(d_K: int, d_H: int, n: int, rng, d_H0=None):
    d_H0 = d_H if d_H0 is None else d_H0
    return realize(random_triple(d_K, d_H, d_H0, n, rng))


def random_contraction(d: int, rng, commuting_with=None) -> np.ndarray:
    """Random operator of norm at most 0.9, optionally inside a commutant."""
    if commuting_with is None:
        X = ginibre(rng, d)
    else:
        from .naimark import commutant

        basis = commutant(commuting_with)
        X = sum(ginibre(rng, 1)[0, 0] * B for B in basis)
    return 0.9 * X / la.opnorm(X)


def random_ancilla_unitary(d_K: int, d_H0: int, rng) -> np.ndarray:
    return lift(random_unitary(d_H0, rng), d_K)


def _herm(A):
    return (A + dag(A)) / 2
