"""Reproducible property suites over random instances at dimensions 2 to 4.

Each suite draws its instances from a seed derived from the run seed and
the suite name, so suites are independent and results are sorted by name.
``RunConfig.eps`` loosens comparison thresholds only (each threshold is
``max(default, eps)``); rank decisions keep the library default.
A failing suite writes its first failing instance to a JSON reproduction
file.
"""

from __future__ import annotations

import contextlib
import json
import os
import time
import zlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import extremality as ex
from . import io
from . import linalg as la
from . import naimark as nk
from . import oracles
from . import process as pp
from . import quantum as qo
from . import sampling as sm
from .errors import PpovmError
from .extremality import Equivalence, Verdict
from .linalg import dag


@dataclass(frozen=True)
class RunConfig:
    eps: float = 1e-9
    seed: int = 0
    max_dim: int = 8

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.max_dim < 2:
            raise ValueError("max_dim must be at least 2")

    def tol(self, default: float) -> float:
        return max(default, self.eps)


class SuiteFailure(Exception):
    def __init__(self, message, instance=None):
        super().__init__(message)
        self.instance = instance or {}


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    total: int = 0
    seconds: float = 0.0
    notes: list = field(default_factory=list)
    failure: Optional[str] = None
    repro: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.failure is None and self.passed == self.total


def _scene(obj, **meta):
    return io.scene_from_object(obj, meta).to_json()


def _rng(cfg: RunConfig, name: str) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, zlib.crc32(name.encode())])


def _require(cond, message, **instance):
    if not cond:
        raise SuiteFailure(message, {k: _scene(v) if not isinstance(v, (str, int, float)) else v for k, v in instance.items()})


# -- suites --------------------------------------------------------------


def suite_realization_identity(cfg, rng, res):
    """Outcome probabilities from the tester equal those of channel-then-measure."""
    tol = cfg.tol(1e-9)
    for _ in range(100):
        d_K, d_H, d_H0 = (int(x) for x in rng.integers(2, 4, size=3))
        t = sm.random_triple(d_K, d_H, d_H0, int(rng.integers(2, 5)), rng, mixed=bool(rng.integers(2)))
        chan = sm.random_channel(d_H, d_K, rng)
        lhs = pp.tester_probabilities(pp.realize(t), chan)
        rhs = qo.measure(t.M, qo.apply_on_factor(chan, t.input_state(), (d_H, d_H0), 1))
        res.total += 1
        _require(np.abs(lhs - rhs).max() <= tol, "probabilities differ", triple=t, channel=chan)
        res.passed += 1


def suite_minimal_round_trip(cfg, rng, res):
    tol = cfg.tol(1e-9)
    for _ in range(100):
        d_K, d_H = (int(x) for x in rng.integers(2, 4, size=2))
        d_H0 = int(rng.integers(1, d_H + 2))
        F = sm.random_tester(d_K, d_H, int(rng.integers(2, 5)), rng, d_H0=d_H0)
        t = pp.minimal_representation(F)
        res.total += 1
        _require(t.d_H0 == min(d_H0, d_H), "ancilla dimension is not rank(sigma)", tester=F)
        _require(pp.is_minimal(t), "representation is not minimal", tester=F)
        _require(pp.tester_distance(pp.realize(t), F) <= tol, "round trip changed the tester", tester=F)
        res.passed += 1


def suite_representation_uniqueness(cfg, rng, res):
    """Minimal representation from sigma vs. compression of a purified mixed triple."""
    tol = cfg.tol(1e-8)
    for _ in range(50):
        d_K, d_H, d_H0 = (int(x) for x in rng.integers(2, 4, size=3))
        t = sm.random_triple(d_K, d_H, d_H0, int(rng.integers(2, 4)), rng, mixed=True)
        F = pp.realize(t)
        a = pp.minimal_representation(F)
        b = pp.restrict_to_minimal(pp.purify(t))
        res.total += 1
        try:
            U = pp.connecting_isometry(a, b, tol=tol)
        except PpovmError as exc:
            raise SuiteFailure(f"no connecting unitary: {exc}", {"triple": _scene(t)})
        L = pp.lift(U, d_K)
        residual = max(float(np.abs(dag(L) @ Mb @ L - Ma).max()) for Ma, Mb in zip(a.M, b.M))
        _require(la.is_unitary(U, tol) and residual <= tol, "conjugation residual too large", triple=t)
        res.passed += 1


def bell_tester():
    s = 1 / np.sqrt(2)
    vecs = [[s, 0, 0, s], [s, 0, 0, -s], [0, s, s, 0], [0, s, -s, 0]]
    M = qo.Povm(tuple(np.outer(v, np.conj(v)).astype(complex) for v in vecs))
    return pp.realize(pp.RepresentationTriple(2, M, T=np.eye(2) / np.sqrt(2)))


def reducible_tester():
    M = qo.Povm(tuple(np.diag(np.eye(4)[k]).astype(complex) for k in range(4)))
    return pp.realize(pp.RepresentationTriple(2, M, T=np.eye(2) / np.sqrt(2)))


def random_extremal_candidate(rng):
    d_K, d_H0 = 2, int(rng.integers(2, 4))
    d = d_K * d_H0
    if rng.integers(2):
        M = sm.random_rank1_povm(d, int(rng.integers(d, d + 3)), rng)
    else:
        M = sm.random_pvm(d, d, rng)
    T = sm.random_input(d_H0, d_H0 + int(rng.integers(2)), rng)
    return pp.realize(pp.RepresentationTriple(d_H0, M, T=T))


def suite_extremality(cfg, rng, res):
    tol = cfg.tol(1e-8)
    res.total += 1
    c = ex.certify_process_extremal(bell_tester(), seed=cfg.seed)
    _require(c.verdict is Verdict.EXTREMAL and c.purity_dim == 1, "Bell tester not Extremal")
    res.passed += 1

    res.total += 1
    F = reducible_tester()
    c = ex.certify_process_extremal(F, seed=cfg.seed)
    _require(c.verdict is Verdict.NOT_EXTREMAL and c.witness is not None, "reducible tester not NotExtremal")
    w = c.witness
    recombined = ex._recombine(w)
    _require(pp.tester_distance(recombined, F) <= tol, "witness does not recombine")
    _require(ex.tester_gap(w) > 1e-6, "witness testers coincide")
    for triple, tester in ((w.first_triple, w.first), (w.second_triple, w.second)):
        _require(pp.tester_distance(pp.realize(triple), tester) <= tol, "witness triple does not realize its tester")
    res.passed += 1

    found = 0
    while found < 30:
        F = random_extremal_candidate(rng)
        if ex.certify_process_extremal(F, seed=cfg.seed).verdict is not Verdict.EXTREMAL:
            continue
        found += 1
        res.total += 1
        hits = oracles.perturbation_search(F, 200, rng)
        _require(not hits, "perturbation split an Extremal tester", tester=F)
        res.passed += 1


def random_subalgebra(d, rng):
    pick = int(rng.integers(6))
    if pick == 0:
        return ex.scalars(d)
    if pick == 1:
        return ex.full_algebra(d)
    if pick == 2:
        return ex.rotated(ex.diagonal_algebra(d), sm.random_unitary(d, rng))
    if pick == 3 and d % 2 == 0:
        return ex.rotated(ex.ancilla_algebra(2, d // 2), sm.random_unitary(d, rng))
    # generated by random Hermitians, one of them with a degenerate spectrum
    P = sm.random_pvm(d, 2, rng).effects[0]
    gens = [P] if pick == 4 else [P, sm.random_hermitian(d, rng)]
    return ex.subalgebra_from_basis([np.eye(d)] + gens)


def suite_pvm_subalgebra(cfg, rng, res):
    """PVMs are A-extremal for every A, so A-pure exactly when A-irreducible."""
    irreducible = 0
    for _ in range(50):
        d = int(rng.integers(2, 5))
        P = sm.random_pvm(d, int(rng.integers(2, d + 1)), rng)
        A = random_subalgebra(d, rng)
        irr = ex.is_a_irreducible(P, A)
        dim = ex.purity_solution_space(P, A).dim
        res.total += 1
        _require((dim == 1) == irr, f"purity_dim {dim} but irreducible={irr}", pvm=P, subalgebra=A)
        irreducible += irr
        res.passed += 1
    res.notes.append(f"{irreducible}/50 irreducible")
    count = 0
    while count < 20:
        d_H0 = int(rng.integers(2, 4))
        M = sm.random_pvm(2 * d_H0, int(rng.integers(2, 2 * d_H0 + 1)), rng)
        if not ex.is_a_irreducible(M, ex.ancilla_algebra(2, d_H0)):
            continue
        count += 1
        F = pp.realize(pp.RepresentationTriple(d_H0, M, T=sm.random_input(d_H0, d_H0, rng)))
        res.total += 1
        c = ex.certify_process_extremal(F, seed=cfg.seed)
        _require(c.verdict is not Verdict.NOT_EXTREMAL, "irreducible PVM tester reported NotExtremal", tester=F)
        res.passed += 1


def sample_lm_member(M, rng):
    """Either a contraction from the commutant or a scaled generic operator (full-rank effects only)."""
    d = M.space_dim
    if rng.integers(2):
        return sm.random_contraction(d, rng, commuting_with=list(M))
    G = sm.ginibre(rng, d)
    top = 0.0
    for Mi in M:
        R = la.psd_inv_sqrt(Mi) @ dag(G) @ Mi @ G @ la.psd_inv_sqrt(Mi)
        top = max(top, float(np.linalg.eigvalsh((R + dag(R)) / 2)[-1]))
    return 0.9 * G / np.sqrt(top)


def sample_lm_nonmember(M, rng, margin=0.05):
    d = M.space_dim
    while True:
        X = sm.ginibre(rng, d) * rng.uniform(0.5, 2.0)
        if nk.lm_gap(M, X) > margin:
            return X


def suite_naimark_lm(cfg, rng, res):
    tol = cfg.tol(1e-9)
    for _ in range(100):
        d, n = (int(x) for x in rng.integers(2, 5, size=2))
        M = sm.random_povm(d, n, rng, rank=int(rng.integers(-(-d // n), d + 1)))
        dil = nk.minimal_naimark(M)
        res.total += 1
        worst = max(dil.residuals(M).values())
        _require(worst <= tol and dil.is_minimal(), f"dilation residual {worst:.3e}", povm=M)
        res.passed += 1
    ctol = cfg.tol(1e-8)
    for _ in range(50):
        d, n = (int(x) for x in rng.integers(2, 4, size=2))
        M = sm.random_povm(d, n, rng)
        X = sample_lm_member(M, rng)
        res.total += 1
        cert = nk.lift_to_dilation(M, X, tol=ctol)
        _require(cert is not None, "no dilation certificate for an L_M member", povm=M)
        # converse: the constructed C certifies X^dag M X <= M
        dil = nk.minimal_naimark(M)
        JX = cert.C @ dil.J
        for Ek, Mk in zip(dil.E, M):
            D = Mk - dag(JX) @ Ek @ JX
            _require(np.linalg.eigvalsh((D + dag(D)) / 2)[0] >= -ctol, "certificate does not imply membership", povm=M)
        res.passed += 1
    for _ in range(50):
        d, n = (int(x) for x in rng.integers(2, 4, size=2))
        M = sm.random_povm(d, n, rng) if rng.integers(2) else sm.random_pvm(d, min(n, d), rng)
        X = sample_lm_nonmember(M, rng)
        res.total += 1
        _require(not nk.lm_membership(M, X, cfg.tol(1e-9)), "non-member accepted", povm=M)
        res.passed += 1


def block_pvm(d_K, d_H0, rng):
    """PVM on K (x) H0 with a nontrivial commutant inside I_K (x) B(H0)."""
    W = pp.lift(sm.random_unitary(d_H0, rng), d_K)
    blocks = [sm.random_pvm(d_K, d_K, rng) for _ in range(d_H0)]
    effects = []
    for i in range(d_K):
        E = sum(np.kron(blocks[k][i], np.diag(np.eye(d_H0)[k])) for k in range(d_H0))
        effects.append(W @ E @ dag(W))
    return qo.Povm(tuple(effects))


def ancilla_commutant(M, d_K, d_H0):
    """Operators x on H0 with I (x) x commuting with M."""
    return [la.partial_trace(B, (d_K, d_H0), 1) / d_K for B in ex.commutant_in(M, ex.ancilla_algebra(d_K, d_H0))]


def face_samples(M, T, d_K, rng, k=3):
    d_H0 = T.shape[0]
    basis = ancilla_commutant(M, d_K, d_H0)
    out = []
    for j in range(k):
        x = sum(sm.ginibre(rng, 1)[0, 0] * B for B in basis)
        if j == k - 1 and rng.integers(2):
            # a rank-deficient element: a spectral projection of x^dag x
            w, V = np.linalg.eigh(dag(x) @ x)
            x = V[:, -1:] @ dag(V[:, -1:])
        else:
            x = 0.9 * x / la.opnorm(x)
        out.append(x)
    return out


def suite_face(cfg, rng, res):
    tol = cfg.tol(1e-8)
    unknown = 0
    for _ in range(20):
        d_K, d_H0 = 2, int(rng.integers(2, 4))
        M = block_pvm(d_K, d_H0, rng)
        T = sm.random_input(d_H0, d_H0 + int(rng.integers(2)), rng)
        res.total += 1
        xs = face_samples(M, T, d_K, rng)
        weights = rng.dirichlet(np.ones(len(xs)))
        parts = [nk.face_sample(T, M, x) for x in xs]
        mus = [float(np.trace(dag(x @ T) @ x @ T).real) for x in xs]
        # the combination is again a face element, with input Z T
        Z = la.psd_sqrt(sum(w / mu * dag(x) @ x for w, mu, x in zip(weights, mus, xs)))
        S = Z @ T
        G = pp.realize(pp.RepresentationTriple(d_H0, M, T=S))
        check = nk.extremal_povm_decomposition_check(M, S, list(zip(weights, parts)), tol=tol, seed=cfg.seed)
        _require(check.verdict is not Equivalence.NO, "face element not implemented by M", tester=G)
        # M is reducible, so the combination is not extremal; its witness must stay in the face
        cert = ex.certify_process_extremal(G, seed=cfg.seed)
        _require(cert.verdict is Verdict.NOT_EXTREMAL, f"combination certified {cert.verdict.value}", tester=G)
        w = cert.witness
        split = nk.extremal_povm_decomposition_check(M, S, [(w.weight, w.first), (1 - w.weight, w.second)], tol=tol, seed=cfg.seed)
        _require(split.verdict is not Equivalence.NO, "witness left the face", tester=G)
        if Equivalence.UNKNOWN in (check.verdict, split.verdict):
            unknown += 1
        for member, part in zip(check.members, parts):
            if member.verdict is not Equivalence.YES:
                continue
            # the equivalence yields an mface certificate: Q U^dag N U Q = Q M = M Q
            t = pp.minimal_representation(part)
            V = dag(member.unitary)
            Q = dag(V) @ V
            N = qo.Povm(tuple(dag(V) @ Ni @ V + (np.eye(len(Q)) - Q) @ Mi @ (np.eye(len(Q)) - Q) for Ni, Mi in zip(t.M, M)))
            U = sm.random_ancilla_unitary(d_K, d_H0, rng)
            N = qo.Povm(tuple(U @ Ni @ dag(U) for Ni in N))
            _require(nk.mface_certificate_check(N, Q, U, M, tol), "mface certificate failed", tester=part)
        res.passed += 1
    res.notes.append(f"{unknown}/20 Unknown")
    _require(unknown < 2, f"too many Unknown verdicts ({unknown}/20)")


def suite_mix_decompose(cfg, rng, res):
    tol = cfg.tol(1e-8)
    for _ in range(50):
        d_K, d_H = (int(x) for x in rng.integers(2, 4, size=2))
        n, k = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        weights = rng.dirichlet(np.ones(k))
        terms = [(w, sm.random_triple(d_K, d_H, int(rng.integers(1, 4)), n, rng)) for w in weights]
        S, Xs = pp.mixing_split(terms)
        t = pp.mix(terms)
        res.total += 1
        target = sum(w * np.stack(pp.realize(tt).effects) for w, tt in terms)
        _require(np.abs(np.stack(pp.realize(t).effects) - target).max() <= tol, "mix does not realize the mixture")
        back = pp.decompose_along_split(t, Xs, [tt.M for _, tt in terms], tol=tol)
        _require(len(back) == k, "decomposition lost a term")
        for (mu, tb), (w, ta) in zip(back, terms):
            _require(abs(mu - w) <= tol, f"weight {mu} != {w}")
            _require(pp.tester_distance(pp.realize(tb), pp.realize(ta)) <= tol, "decomposed tester differs")
        res.passed += 1


SUITES: dict = {
    "extremality": suite_extremality,
    "face": suite_face,
    "minimal_round_trip": suite_minimal_round_trip,
    "mix_decompose": suite_mix_decompose,
    "naimark_lm": suite_naimark_lm,
    "pvm_subalgebra": suite_pvm_subalgebra,
    "realization_identity": suite_realization_identity,
    "representation_uniqueness": suite_representation_uniqueness,
}


# -- mutation hook ---------------------------------------------------------


@contextlib.contextmanager
def _patched(module, name, value):
    old = getattr(module, name)
    setattr(module, name, value)
    try:
        yield
    finally:
        setattr(module, name, old)


def _mutation(name):
    """Deliberately corrupt one internal constant, to check that the suites notice."""
    if name is None:
        return contextlib.nullcontext()
    if name == "realize-scale":
        real = pp.realize

        def scaled(t):
            F = real(t)
            return pp.ProcessPovm(tuple((1 + 1e-6) * E for E in F), F.d_K, F.d_H)

        return _patched(pp, "realize", scaled)
    if name == "naimark-root":
        real = la.psd_sqrt
        return _patched(la, "psd_sqrt", lambda A, eps=la.DEFAULT_EPS: 1.001 * real(A, eps))
    raise ValueError(f"unknown mutation {name!r}; choose from {', '.join(MUTATIONS)}")


MUTATIONS = ("realize-scale", "naimark-root")


def run(cfg: RunConfig, only=None, mutate=None, repro_dir=".", log: Callable[[str], None] = print) -> list:
    names = sorted(only or SUITES)
    unknown = set(names) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suites: {', '.join(sorted(unknown))}")
    results = []
    with _mutation(mutate):
        for name in names:
            res = SuiteResult(name)
            start = time.perf_counter()
            try:
                SUITES[name](cfg, _rng(cfg, name), res)
            except (SuiteFailure, PpovmError, ValueError, np.linalg.LinAlgError) as exc:
                res.failure = f"{type(exc).__name__}: {exc}"
                res.repro = _write_repro(cfg, name, res, getattr(exc, "instance", {}), repro_dir, mutate)
            res.seconds = time.perf_counter() - start
            results.append(res)
            status = "PASS" if res.ok else "FAIL"
            extra = f" ({'; '.join(res.notes)})" if res.notes else ""
            log(f"{status} {name}: {res.passed}/{res.total} in {res.seconds:.1f}s{extra}")
            if res.failure:
                log(f"  {res.failure}")
                log(f"  reproduction written to {res.repro}")
    return results


def _write_repro(cfg, name, res, instance, repro_dir, mutate):
    path = os.path.join(repro_dir, f"ppovm-repro-{name}.json")
    doc = {
        "suite": name,
        "seed": cfg.seed,
        "eps": cfg.eps,
        "instance_index": res.total - 1,
        "mutation": mutate or "",
        "error": res.failure,
        "instance": instance,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    return path
