"""Independent checks that work on the tester itself, not on its minimal representation.

``perturbation_attempt`` tries to write ``F = (F+ + F-) / 2`` with
``F+- = F +- s G`` two distinct valid testers. ``G`` must live on the
supports of the effects and sum to ``I_K (x) tau`` with ``Tr tau = 0``;
a random Hermitian tuple is projected onto that linear space and the step
``s`` is the largest keeping both sides PSD, halved. An extremal tester
admits no such ``G``, so every attempt must fail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linalg as la
from .errors import PpovmError
from .linalg import DEFAULT_EPS, dag
from .process import ProcessPovm, lift
from .sampling import ginibre


@dataclass(frozen=True)
class Perturbation:
    step: float
    plus: ProcessPovm
    minus: ProcessPovm

    @property
    def gap(self) -> float:
        return max(float(np.abs(a - b).max()) for a, b in zip(self.plus, self.minus))


def direction_space(F: ProcessPovm, eps=DEFAULT_EPS):
    """Support frames and a basis (columns) of the admissible block coordinates."""
    d_K, d_H = F.d_K, F.d_H
    frames = [la.support_basis(E, eps) for E in F]
    G = np.concatenate([np.kron(V, V.conj()) for V in frames if V.shape[1]], axis=1)
    # sum must have the form I_K (x) tau with Tr tau = 0
    units = _traceless_units(d_H)
    if units:
        Q = la.range_basis(np.stack([lift(E, d_K).ravel() for E in units], axis=1))
        L = G - Q @ (dag(Q) @ G)
    else:
        L = G  # d_H = 1: the sum must vanish
    return frames, la.null_space(L, eps, floor=eps)


def _traceless_units(d):
    out = []
    for a in range(d):
        for b in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[a, b] = 1
            if a == b:
                if a == d - 1:
                    continue
                E[d - 1, d - 1] = -1
            out.append(E)
    return out


def _unpack(z, frames):
    out, pos = [], 0
    for V in frames:
        r = V.shape[1]
        out.append(V @ z[pos : pos + r * r].reshape(r, r) @ dag(V))
        pos += r * r
    return out


def _max_step(F, G, eps):
    """Largest ``s`` with ``F_i +- s G_i >= 0`` on every support."""
    bound = np.inf
    for Fi, Gi in zip(F, G):
        V = la.support_basis(Fi, eps)
        if not V.shape[1]:
            continue
        w = np.linalg.eigvalsh(dag(V) @ Fi @ V)
        R = np.diag(1 / np.sqrt(w)) @ dag(V) @ Gi @ V @ np.diag(1 / np.sqrt(w))
        top = float(np.abs(np.linalg.eigvalsh((R + dag(R)) / 2)).max())
        if top > 0:
            bound = min(bound, 1 / top)
    return bound


def perturbation_attempt(F: ProcessPovm, rng, eps=DEFAULT_EPS, min_gap=1e-6, space=None) -> Optional[Perturbation]:
    """One randomized attempt; returns a verified perturbation pair or None."""
    frames, K = space if space is not None else direction_space(F, eps)
    if K.shape[1] == 0:
        return None
    z = K @ ginibre(rng, K.shape[1], 1).ravel()
    G = [(g + dag(g)) / 2 for g in _unpack(z, frames)]
    size = max(float(np.abs(g).max()) for g in G)
    if size <= min_gap:
        return None
    G = [g / size for g in G]
    s = _max_step(F, G, eps) / 2
    if not np.isfinite(s):
        return None
    plus = tuple(Fi + s * Gi for Fi, Gi in zip(F, G))
    minus = tuple(Fi - s * Gi for Fi, Gi in zip(F, G))
    try:
        A = ProcessPovm(plus, F.d_K, F.d_H).check(1e3 * eps)
        B = ProcessPovm(minus, F.d_K, F.d_H).check(1e3 * eps)
    except PpovmError:
        return None
    pert = Perturbation(s, A, B)
    return pert if pert.gap > min_gap else None


def perturbation_search(F: ProcessPovm, attempts: int, rng, eps=DEFAULT_EPS, min_gap=1e-6):
    """Run ``attempts`` independent attempts; returns the list of successes."""
    space = direction_space(F, eps)
    found = []
    for _ in range(attempts):
        p = perturbation_attempt(F, rng, eps, min_gap, space)
        if p is not None:
            found.append(p)
    return found
