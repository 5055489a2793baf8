import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppovm import extremality as ex
from ppovm import linalg as la
from ppovm import oracles
from ppovm import process as pp
from ppovm import quantum as qo
from ppovm import sampling as sm
from ppovm.errors import DegenerateDirectionError, DimensionError, InvariantError
from ppovm.selftest import bell_tester, reducible_tester

seeds = st.integers(min_value=0, max_value=2**32 - 1)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def trine():
    vecs = [np.array([np.cos(a), np.sin(a)]) for a in (0, 2 * np.pi / 3, 4 * np.pi / 3)]
    return qo.Povm(tuple(2 / 3 * np.outer(v, v).astype(complex) for v in vecs))


@pytest.mark.parametrize(
    "gens, dim",
    [([np.eye(2)], 1), ([SZ], 2), ([np.eye(2), SZ], 2), ([SX, SZ], 4), ([np.diag([1.0, 0, 0])], 2), ([np.kron(np.eye(2), SX)], 2)],
)
def test_generated_subalgebra_dims(gens, dim):
    A = ex.subalgebra_from_basis(gens).check()
    assert A.dim == dim
    for g in gens:
        assert A.contains(g)


def test_standard_subalgebras():
    assert ex.scalars(3).check().dim == 1
    assert ex.full_algebra(3).check().dim == 9
    assert ex.diagonal_algebra(3).check().dim == 3
    A = ex.ancilla_algebra(2, 3).check()
    assert A.dim == 9
    assert A.contains(np.kron(np.eye(2), sm.ginibre(np.random.default_rng(0), 3)))
    assert not A.contains(np.kron(SZ, np.eye(3)))
    U = sm.random_unitary(3, np.random.default_rng(1))
    R = ex.rotated(ex.diagonal_algebra(3), U).check()
    assert R.contains(U @ np.diag([1.0, 2, 3]) @ la.dag(U))


def test_non_algebra_fails_check():
    with pytest.raises(InvariantError):
        ex.Subalgebra(2, (np.eye(2) / np.sqrt(2), SX / np.sqrt(2), SZ / np.sqrt(2))).check()


def test_a_convex_combine_scalar_weights(rng):
    N1, N2 = sm.random_povm(2, 3, rng), sm.random_povm(2, 3, rng)
    M, proper = ex.a_convex_combine([np.sqrt(0.3) * np.eye(2), np.sqrt(0.7) * np.eye(2)], [N1, N2], ex.scalars(2))
    assert proper
    for m, a, b in zip(M, N1, N2):
        assert np.abs(m - (0.3 * a + 0.7 * b)).max() < 1e-15


def test_a_convex_combine_improper_and_invalid(rng):
    N1, N2 = sm.random_povm(2, 2, rng), sm.random_povm(2, 2, rng)
    P0, P1 = np.diag([1.0, 0]), np.diag([0, 1.0])
    M, proper = ex.a_convex_combine([P0, P1], [N1, N2], ex.diagonal_algebra(2))
    assert not proper
    M.check()
    with pytest.raises(ValueError):
        ex.a_convex_combine([P0, P1], [N1, N2], ex.scalars(2))
    with pytest.raises(InvariantError):
        ex.a_convex_combine([0.5 * np.eye(2), 0.5 * np.eye(2)], [N1, N2], ex.scalars(2))


def test_combine_tail_symmetric_three_terms(rng):
    parts = [sm.random_povm(2, 2, rng) for _ in range(3)]
    X = np.eye(2) / np.sqrt(3)
    Xk, Mk, Y, N = ex.combine_tail([X, X, X], parts, keep=0)
    assert np.abs(la.dag(Y) @ Y - 2 / 3 * np.eye(2)).max() < 1e-15
    N.check()
    for i in range(2):
        expected = (parts[1][i] + parts[2][i]) / 2
        assert np.abs(N[i] - expected).max() < 1e-14
        total = la.dag(Xk) @ Mk[i] @ Xk + la.dag(Y) @ N[i] @ Y
        assert np.abs(total - sum(P[i] for P in parts) / 3).max() < 1e-14


def test_combine_tail_with_rank_deficient_tail(rng):
    parts = [sm.random_povm(2, 2, rng) for _ in range(2)]
    X1, X2 = np.diag([1.0, 0.6]), np.diag([0.0, 0.8])
    Xk, Mk, Y, N = ex.combine_tail([X1, X2], parts, keep=0)
    N.check()
    for i in range(2):
        total = la.dag(Xk) @ Mk[i] @ Xk + la.dag(Y) @ N[i] @ Y
        assert np.abs(total - (la.dag(X1) @ parts[0][i] @ X1 + la.dag(X2) @ parts[1][i] @ X2)).max() < 1e-14


@pytest.mark.parametrize(
    "M, A, dim",
    [
        (qo.Povm((np.diag([1.0, 0]), np.diag([0, 1.0]))), ex.scalars(2), 1),
        (qo.Povm((np.eye(2) / 2, np.eye(2) / 2)), ex.scalars(2), 5),
        (qo.Povm((np.eye(2) / 2, np.eye(2) / 2)), ex.full_algebra(2), 8),
        (qo.Povm((np.diag([1.0, 0]), np.diag([0, 1.0]))), ex.full_algebra(2), 2),
        (trine(), ex.scalars(2), 1),
        (trine(), ex.full_algebra(2), 3),
        (qo.Povm((np.diag([1.0, 0, 0]), np.diag([0, 1.0, 1.0]))), ex.diagonal_algebra(3), 3),
    ],
)
def test_purity_solution_dims(M, A, dim):
    assert ex.purity_solution_space(M, A).dim == dim


def test_purity_dimension_mismatch():
    with pytest.raises(DimensionError):
        ex.purity_solution_space(trine(), ex.scalars(3))


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 4), st.integers(2, 5))
def test_purity_dim_is_monotone_in_the_algebra(seed, d, n):
    rng = np.random.default_rng(seed)
    M = sm.random_povm(d, n, rng, rank=int(rng.integers(1, d + 1)))
    dims = [ex.purity_solution_space(M, A).dim for A in (ex.scalars(d), ex.diagonal_algebra(d), ex.full_algebra(d))]
    assert dims[0] <= dims[1] <= dims[2]
    assert dims[2] == sum(la.rank(E) ** 2 for E in M)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 4))
def test_pure_implies_classically_extremal(seed, d):
    rng = np.random.default_rng(seed)
    M = sm.random_rank1_povm(d, int(rng.integers(d, d * d + 2)), rng)
    A = [ex.scalars(d), ex.diagonal_algebra(d)][int(rng.integers(2))]
    if ex.is_a_pure(M, A):
        assert ex.is_classical_extremal(M)


@pytest.mark.parametrize(
    "M, expected",
    [
        (qo.Povm((np.diag([1.0, 0]), np.diag([0, 1.0]))), True),
        (qo.Povm((np.eye(2) / 2, np.eye(2) / 2)), False),
        (trine(), True),
        (qo.Povm((np.eye(2),)), True),
    ],
)
def test_is_classical_extremal(M, expected):
    assert ex.is_classical_extremal(M) is expected


def test_irreducibility_examples():
    assert ex.is_a_irreducible(pp.minimal_representation(bell_tester()).M, ex.ancilla_algebra(2, 2))
    assert not ex.is_a_irreducible(pp.minimal_representation(reducible_tester()).M, ex.ancilla_algebra(2, 2))
    assert len(ex.commutant_in(trine(), ex.full_algebra(2))) == 1
    pvm = qo.Povm((np.diag([1.0, 0]), np.diag([0, 1.0])))
    assert len(ex.commutant_in(pvm, ex.full_algebra(2))) == 2


def test_a_equivalent_yes_and_no(rng):
    A = ex.ancilla_algebra(2, 2)
    M = sm.random_povm(4, 3, rng)
    U = pp.lift(sm.random_unitary(2, rng), 2)
    N = qo.Povm(tuple(la.dag(U) @ E @ U for E in M))
    res = ex.a_equivalent(M, N, A)
    assert res.verdict is ex.Equivalence.YES and res
    assert la.is_unitary(res.unitary) and A.contains(res.unitary)
    assert max(np.abs(la.dag(res.unitary) @ a @ res.unitary - b).max() for a, b in zip(M, N)) < 1e-8
    other = ex.a_equivalent(M, sm.random_povm(4, 3, rng), A)
    assert other.verdict is ex.Equivalence.NO and not other
    # same spectra, but the rotation is outside I (x) B(H0)
    W = np.kron(sm.random_unitary(2, rng), np.eye(2))
    far = qo.Povm(tuple(la.dag(W) @ E @ W for E in M))
    assert ex.a_equivalent(M, far, A).verdict is ex.Equivalence.NO


def test_certify_bell_and_reducible():
    c = ex.certify_process_extremal(bell_tester())
    assert c.verdict is ex.Verdict.EXTREMAL and c.purity_dim == 1 and c.witness is None
    F = reducible_tester()
    c = ex.certify_process_extremal(F)
    assert c.verdict is ex.Verdict.NOT_EXTREMAL and c.purity_dim == 2
    w = c.witness
    assert 0 < w.weight < 1 and ex.tester_gap(w) > 1e-6
    assert pp.tester_distance(ex._recombine(w), F) < 1e-8
    w.first.check()
    w.second.check()


def test_certify_single_outcome_pure_sigma():
    T = np.array([[0.6, 0.8j]])
    F = pp.realize(pp.RepresentationTriple(1, qo.Povm((np.eye(2),)), T=T))
    c = ex.certify_process_extremal(F)
    assert c.verdict is ex.Verdict.EXTREMAL and c.minimal.d_H0 == 1


def test_witness_for_trivial_ancilla():
    t = pp.RepresentationTriple(1, qo.Povm((np.eye(2) / 2, np.eye(2) / 2)), T=np.array([[1.0, 0]]))
    space = ex.purity_solution_space(t.M, ex.ancilla_algebra(2, 1))
    assert space.dim == 5
    c = ex.certify_process_extremal(pp.realize(t))
    assert c.verdict is ex.Verdict.NOT_EXTREMAL
    assert pp.tester_distance(ex._recombine(c.witness), pp.realize(t)) < 1e-8


def test_witness_rejects_direction_along_measurement():
    t = pp.minimal_representation(reducible_tester())
    with pytest.raises(DegenerateDirectionError):
        ex.nonextremal_witness(t, tuple(2.5j * E for E in t.M))


@pytest.mark.parametrize("seed", range(6))
def test_extremal_verdicts_resist_perturbation(seed):
    rng = np.random.default_rng(seed)
    d_H0 = 2
    M = sm.random_rank1_povm(2 * d_H0, 4, rng)
    F = pp.realize(pp.RepresentationTriple(d_H0, M, T=sm.random_input(d_H0, 2, rng)))
    c = ex.certify_process_extremal(F)
    hits = oracles.perturbation_search(F, 50, rng)
    if c.verdict is ex.Verdict.EXTREMAL:
        assert not hits
    else:
        assert c.verdict is ex.Verdict.NOT_EXTREMAL


def test_perturbation_oracle_splits_a_non_extremal_tester(rng):
    F = reducible_tester()
    hits = oracles.perturbation_search(F, 5, rng)
    assert hits
    for p in hits:
        mid = [(a + b) / 2 for a, b in zip(p.plus, p.minus)]
        assert max(np.abs(m - f).max() for m, f in zip(mid, F)) < 1e-12


def test_perturbation_oracle_with_one_dimensional_input(rng):
    pvm = pp.ProcessPovm((np.diag([1.0, 0]).astype(complex), np.diag([0, 1.0]).astype(complex)), 2, 1)
    assert not oracles.perturbation_search(pvm, 20, rng)
    coin = pp.ProcessPovm((np.eye(2) / 2, np.eye(2) / 2), 2, 1)
    assert oracles.perturbation_search(coin, 5, rng)


def e_family():
    return qo.Povm((np.kron(np.diag([1.0, 0]), np.eye(2)).astype(complex), np.kron(np.diag([0, 1.0]), np.eye(2)).astype(complex)))


def test_e_family_is_neither_pure_nor_irreducible():
    E, A = e_family(), ex.ancilla_algebra(2, 2)
    space = ex.purity_solution_space(E, A)
    assert space.dim == 4 and not ex.is_a_pure(E, A)
    assert not ex.is_a_irreducible(E, A)
    assert ex.is_a_irreducible(E, ex.scalars(4))
    # every solution has the form D_i = E_i (I (x) B)
    for D in space.basis:
        B = la.partial_trace(D[0] + D[1], (2, 2), 1) / 2
        for Di, Ei in zip(D, E):
            assert np.abs(Di - Ei @ np.kron(np.eye(2), B)).max() < 1e-12


def test_e_family_tester_and_sigma_z_witness():
    E = e_family()
    t = pp.RepresentationTriple(2, E, T=np.eye(2) / np.sqrt(2))
    F = pp.realize(t)
    c = ex.certify_process_extremal(F)
    assert c.verdict is ex.Verdict.NOT_EXTREMAL
    assert pp.tester_distance(ex._recombine(c.witness), F) < 1e-8
    D = tuple(Ei @ np.kron(np.eye(2), SZ) for Ei in E)
    w = ex.nonextremal_witness(pp.minimal_representation(F), D)
    assert ex.tester_gap(w) > 1e-6
    assert pp.tester_distance(ex._recombine(w), F) < 1e-8


def test_a_convex_combine_trivial_cases(rng):
    M = sm.random_povm(2, 3, rng)
    out, proper = ex.a_convex_combine([np.eye(2)], [M], ex.scalars(2))
    assert proper and out.allclose(M, 1e-15)
    out, _ = ex.a_convex_combine([np.eye(2) / np.sqrt(2)] * 2, [M, M], ex.scalars(2))
    assert out.allclose(M, 1e-15)


def test_a_convex_combine_random_proper(rng):
    A = ex.ancilla_algebra(2, 2)
    W = sm.random_unitary(2, rng)
    c = np.sqrt(rng.uniform(0.2, 0.8, size=2))
    X1 = pp.lift(W @ np.diag(c) @ la.dag(W), 2)
    X2 = pp.lift(W @ np.diag(np.sqrt(1 - c**2)) @ la.dag(W), 2)
    parts = [sm.random_povm(4, 3, rng), sm.random_povm(4, 3, rng)]
    M, proper = ex.a_convex_combine([X1, X2], parts, A)
    assert proper
    M.check(1e-12)
    for k in range(3):
        direct = la.dag(X1) @ parts[0][k] @ X1 + la.dag(X2) @ parts[1][k] @ X2
        assert np.abs(M[k] - direct).max() < 1e-15


def test_a_equivalent_with_itself(rng):
    M = sm.random_povm(4, 2, rng)
    res = ex.a_equivalent(M, M, ex.ancilla_algebra(2, 2))
    assert res.verdict is ex.Equivalence.YES
    assert max(np.abs(la.dag(res.unitary) @ E @ res.unitary - E).max() for E in M) < 1e-8


def test_combine_tail_two_terms_and_zero_keep(rng):
    parts = [sm.random_povm(2, 2, rng) for _ in range(2)]
    X1, X2 = np.sqrt(0.3) * np.eye(2), np.sqrt(0.7) * np.eye(2)
    Xk, Mk, Y, N = ex.combine_tail([X1, X2], parts, keep=0)
    assert np.abs(Y - X2).max() < 1e-15 and N.allclose(parts[1], 1e-14)
    Xk, Mk, Y, N = ex.combine_tail([np.zeros((2, 2)), np.eye(2)], parts, keep=0)
    assert la.is_unitary(Y) and N.allclose(parts[1], 1e-14)
