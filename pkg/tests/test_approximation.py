"""Tests for the decomposition step and the full approximation pipeline."""
import numpy as np
import pytest

from qloc import (
    ChainError,
    GenSpec,
    LpOperator,
    NotQuasiLocalError,
    RDecomposition,
    approximate_finite_propagation,
    block_cutdown,
    build_grid_space,
    commut_upper_bound,
    decompose_step,
    gen,
    grid_chain,
    indicator,
    make_term,
    op_norm,
    propagation,
)
from qloc.cutdown import CutdownFamily


def path(n):
    return build_grid_space([n])


def step_inputs(n, L):
    """Whole-space term scaffold plus the grid decomposition at 4/L + 4."""
    sp = path(n)
    X = sp.all_points()
    R = 4.0 / L + 4.0
    chain = grid_chain(sp, [R])
    dec = chain.steps[0][X]
    return sp, X, dec


class TestBlockDiagonalTerm:
    def test_rejects_non_block_diagonal(self):
        sp = path(6)
        rng = np.random.default_rng(0)
        m = rng.standard_normal((6, 6)).astype(complex)
        a = LpOperator(space=sp, p=2.0, fiber_dim=1, matrix=m)
        with pytest.raises(ValueError):
            make_term(a, [{0, 1, 2}], [{0, 1, 2}])

    def test_accepts_cutdown_operator(self):
        sp = path(6)
        rng = np.random.default_rng(1)
        m = rng.standard_normal((6, 6)).astype(complex)
        a = LpOperator(space=sp, p=2.0, fiber_dim=1, matrix=m)
        fam = CutdownFamily.from_functions(
            sp, [indicator(sp, {0, 1}), indicator(sp, {4, 5})])
        cut = block_cutdown(a, fam)
        term = make_term(cut, [{0, 1}, {4, 5}], [{0, 1, 2}, {3, 4, 5}])
        assert term.supports == (frozenset({0, 1}), frozenset({4, 5}))

    def test_rejects_support_outside_parent(self):
        sp = path(6)
        a = LpOperator(space=sp, p=2.0, fiber_dim=1,
                       matrix=np.eye(6, dtype=complex))
        with pytest.raises(ValueError):
            make_term(a, [frozenset(range(6))], [{0, 1}])


class TestDecomposeStep:
    def test_zero_operator_gives_no_terms(self):
        sp, X, dec = step_inputs(16, L=1.0)
        a = LpOperator(space=sp, p=2.0, fiber_dim=1,
                       matrix=np.zeros((16, 16), dtype=complex))
        term = make_term(a, [X], [X])
        out, report = decompose_step(term, 1.0, 0.5, {X: dec})
        assert out == []
        assert report["step_error"].hi == 0.0

    def test_block_respecting_input_is_exact(self):
        sp, X, dec = step_inputs(16, L=1.0)
        rng = np.random.default_rng(3)
        m = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        a = LpOperator(space=sp, p=2.0, fiber_dim=1, matrix=m)
        fam = CutdownFamily.from_functions(
            sp, [indicator(sp, s) for s in dec.all_pieces()])
        cut = block_cutdown(a, fam)
        term = make_term(cut, list(dec.all_pieces()), list(dec.all_pieces()))
        # parents are the pieces themselves in this synthetic setup, so remap
        term = make_term(cut, list(dec.all_pieces()), [X] * len(dec.all_pieces()))
        eps = commut_upper_bound(cut, 1.0).bound + 1e-9
        out, report = decompose_step(term, 1.0, eps, {X: dec})
        merged = np.sum([t.op.matrix for t in out], axis=0)
        assert np.max(np.abs(merged - cut.matrix)) <= 1e-12
        assert report["step_error"].lo <= 1e-9

    def test_full_numeric_run_meets_budget(self):
        sp = path(32)
        b = gen(GenSpec(kind="exp_decay", space=sp, p=2.0,
                        params={"lam": 0.5, "seed": 0}))
        from qloc import find_lipschitz_scale

        L, cert = find_lipschitz_scale(b, 1.0)
        _, X, dec = step_inputs(32, L)
        term = make_term(b, [sp.all_points()], [sp.all_points()])
        out, report = decompose_step(term, L, 1.0, {sp.all_points(): dec})
        assert report["step_error"].lo <= 8.0 * 1.0 + 1e-9
        assert 1 <= len(out) <= 4
        # every output stays block diagonal and inside fattened pieces
        for t in out:
            assert propagation(t.op) <= sp.diameter()

    def test_rejects_small_radius(self):
        sp, X, dec = step_inputs(16, L=1.0)
        shrunk = RDecomposition.of(sp, X, dec.colors[0], dec.colors[1], R=7.0)
        a = LpOperator(space=sp, p=2.0, fiber_dim=1,
                       matrix=np.eye(16, dtype=complex))
        term = make_term(a, [X], [X])
        with pytest.raises(ChainError):
            decompose_step(term, 1.0, 0.5, {X: shrunk})


class TestPipeline:
    def test_pinned_exp_decay_instance(self):
        sp = path(32)
        b = gen(GenSpec(kind="exp_decay", space=sp, p=2.0,
                        params={"lam": 0.5, "seed": 0}))
        b_prime, cert = approximate_finite_propagation(b, 16.0)
        assert not cert.degenerate
        assert cert.total_error.lo <= 16.0
        assert cert.final_propagation < 31.0
        assert cert.term_count <= 4
        assert propagation(b_prime) == cert.final_propagation
        # the certificate error is the measured norm of the difference
        direct = op_norm(b.with_matrix(b.matrix - b_prime.matrix))
        assert direct.lo == pytest.approx(cert.total_error.lo, rel=1e-9)

    def test_exact_on_banded_input(self):
        sp = path(32)
        for R0 in (0, 1):
            b = gen(GenSpec(kind="finite_prop", space=sp, p=2.0,
                            params={"R": R0, "seed": 3}))
            b_prime, cert = approximate_finite_propagation(b, 16.0)
            assert np.max(np.abs(b.matrix - b_prime.matrix)) == 0.0
            assert cert.total_error.hi == 0.0

    def test_schedule_arithmetic(self):
        sp = path(32)
        b = gen(GenSpec(kind="exp_decay", space=sp, p=2.0,
                        params={"lam": 0.5, "seed": 0}))
        _, cert = approximate_finite_propagation(b, 16.0)
        row = cert.schedule[0]
        assert row["eps_n"] == 16.0 / (2 * 8)
        assert row["R_n"] == 4.0 * (1.0 / row["L_n"] + 1.0)
        assert row["commut_bound"] <= row["eps_n"]

    def test_refuses_averaging_operator(self):
        sp = path(32)
        T = gen(GenSpec(kind="averaging", space=sp, p=1.0))
        with pytest.raises(NotQuasiLocalError) as exc:
            approximate_finite_propagation(T, 0.1)
        assert exc.value.profile is not None

    def test_two_axis_grid_runs_degenerate_schedule_honestly(self):
        # on a small 2-D grid the schedule radii exceed the axes, so the
        # chain cannot cut; a banded operator still passes through exactly
        sp = build_grid_space([4, 4])
        b = gen(GenSpec(kind="finite_prop", space=sp, p=2.0,
                        params={"R": 1, "seed": 7}))
        b_prime, cert = approximate_finite_propagation(b, 8.0)
        assert np.max(np.abs(b.matrix - b_prime.matrix)) == 0.0
        assert cert.final_propagation <= propagation(b)

    def test_user_chain_radius_check(self):
        sp = path(32)
        b = gen(GenSpec(kind="exp_decay", space=sp, p=2.0,
                        params={"lam": 0.5, "seed": 0}))
        small = grid_chain(sp, [3.0])  # far below the scheduled R_1
        with pytest.raises(ChainError):
            approximate_finite_propagation(b, 16.0, chain_strategy="user",
                                           chain=small)

    def test_rejects_nonpositive_eps(self):
        sp = path(8)
        b = gen(GenSpec(kind="exp_decay", space=sp, p=2.0, params={"lam": 0.5}))
        with pytest.raises(ValueError):
            approximate_finite_propagation(b, 0.0)
