from dataclasses import replace

import numpy as np
import pytest

import crowdbp as cb
from crowdbp.bp import (bp_compute_beliefs, bp_init, bp_update_task_messages,
                        bp_update_worker_messages)
from crowdbp.priors import FactorTable
from tests.conftest import random_atom_prior, random_bipartite_tree, random_prior


def star_graph(n_workers: int) -> cb.AssignmentGraph:
    return cb.AssignmentGraph(1, n_workers, np.array([[0, u] for u in range(n_workers)]))


class TestSweepPieces:
    def test_init_is_uninformative(self):
        g = star_graph(3)
        state = bp_init(g)
        assert (state.msg_task_to_worker == 0.5).all()
        assert (state.msg_worker_to_task == 0.5).all()
        assert (state.beliefs == 0.5).all()

    def test_task_message_is_normalized_product_of_others(self):
        g = star_graph(3)
        state = bp_init(g)
        w2t = np.array([[0.7, 0.3], [0.6, 0.4], [0.5, 0.5]])
        state = replace(state, msg_worker_to_task=w2t)
        out = bp_update_task_messages(state, g, np.ones(3, dtype=int))
        # message to worker 2 multiplies the pairs from workers 0 and 1
        np.testing.assert_allclose(out.msg_task_to_worker[2], [7 / 9, 2 / 9], rtol=1e-12)

    def test_beliefs_multiply_all_incoming_pairs(self):
        g = star_graph(2)
        state = bp_init(g)
        state = replace(state, msg_worker_to_task=np.array([[0.7, 0.3], [0.7, 0.3]]))
        state = bp_compute_beliefs(state, g)
        np.testing.assert_allclose(state.beliefs[0], [0.49 / 0.58, 0.09 / 0.58], rtol=1e-12)

    def test_worker_kernels_agree_on_random_states(self, rng):
        for _ in range(100):
            r = int(rng.integers(1, 9))
            g = cb.AssignmentGraph(r, 1, np.array([[t, 0] for t in range(r)]))
            a = rng.choice([-1, 1], size=r)
            prior = random_prior(rng)
            table = FactorTable.build(prior, r)
            t2w = rng.uniform(0.01, 1.0, size=(r, 2))
            t2w /= t2w.sum(axis=1, keepdims=True)
            state = replace(bp_init(g), msg_task_to_worker=t2w)
            fast = bp_update_worker_messages(state, g, a, table, kernel="magnetization")
            slow = bp_update_worker_messages(state, g, a, table, kernel="naive")
            np.testing.assert_allclose(fast.msg_worker_to_task,
                                       slow.msg_worker_to_task, atol=1e-13)

    def test_naive_kernel_guards_large_degrees(self):
        g = cb.AssignmentGraph(15, 1, np.array([[t, 0] for t in range(15)]))
        table = FactorTable.build(cb.spammer_hammer(), 15)
        with pytest.raises(cb.SizeError):
            bp_update_worker_messages(bp_init(g), g, np.ones(15, dtype=int), table,
                                      kernel="naive")

    def test_unknown_kernel_rejected(self):
        g = star_graph(1)
        table = FactorTable.build(cb.spammer_hammer(), 1)
        with pytest.raises(cb.ParameterError):
            bp_update_worker_messages(bp_init(g), g, np.ones(1, dtype=int), table,
                                      kernel="bogus")


class TestRun:
    def test_star_margin_under_spammer_hammer(self):
        report = cb.bp_run(star_graph(5), np.array([1, 1, 1, -1, -1]),
                           cb.spammer_hammer(), k_max=1)
        assert report.margins[0] == pytest.approx(0.4, abs=1e-12)
        assert report.labels[0] == 1

    def test_matches_brute_force_on_random_trees(self, rng):
        worst = 0.0
        for _ in range(60):
            g = random_bipartite_tree(rng)
            a = rng.choice([-1, 1], size=g.n_edges)
            prior = random_prior(rng)
            report = cb.bp_run(g, a, prior, k_max=g.n_tasks + g.n_workers + 2, tol=0.0)
            pairs = cb.brute_force_marginals(g, a, prior)
            worst = max(worst, float(np.abs((pairs[:, 0] - pairs[:, 1]) - report.margins).max()))
        assert worst < 1e-10

    def test_single_iteration_with_unit_worker_degree_is_majority_vote(self, rng):
        # Includes even task degrees, so exact ties must decode identically.
        checked = 0
        while checked < 50:
            n = int(rng.integers(2, 12))
            l = int(rng.integers(1, 7))
            prior = random_prior(rng)
            if prior.moments()[0] <= 0:
                continue
            g = cb.generate_regular_bipartite(n, l, 1, seed=int(rng.integers(2**32)))
            a = rng.choice([-1, 1], size=g.n_edges)
            bp = cb.bp_run(g, a, prior, k_max=1)
            mv = cb.majority_vote(g, a)
            np.testing.assert_array_equal(bp.labels, mv.labels)
            checked += 1

    def test_label_flip_negates_margins_bitwise(self, rng):
        g = cb.generate_regular_bipartite(30, 4, 4, seed=3)
        a = rng.choice([-1, 1], size=g.n_edges)
        for prior in (cb.spammer_hammer(), cb.ReliabilityPrior.from_beta(2, 1)):
            pos = cb.bp_run(g, a, prior, k_max=20)
            neg = cb.bp_run(g, -a, prior, k_max=20)
            np.testing.assert_array_equal(pos.margins, -neg.margins)

    def test_reports_are_bit_deterministic(self, rng):
        g = cb.generate_regular_bipartite(40, 5, 5, seed=9)
        a = rng.choice([-1, 1], size=g.n_edges)
        first = cb.bp_run(g, a, cb.spammer_hammer())
        second = cb.bp_run(g, a, cb.spammer_hammer())
        np.testing.assert_array_equal(first.margins, second.margins)
        assert first.iterations_run == second.iterations_run
        assert first.converged == second.converged

    def test_exact_fixed_point_counts_as_converged_at_tol_zero(self):
        g = star_graph(1)
        report = cb.bp_run(g, np.array([1]), cb.spammer_hammer(), k_max=50, tol=0.0)
        assert report.converged
        assert report.iterations_run < 50
        assert report.max_delta == 0.0

    def test_k_max_is_respected_without_convergence(self, rng):
        g = cb.generate_regular_bipartite(20, 4, 4, seed=1)
        a = rng.choice([-1, 1], size=g.n_edges)
        report = cb.bp_run(g, a, cb.spammer_hammer(), k_max=3, tol=1e-12)
        assert report.iterations_run == 3

    def test_parameter_validation(self):
        g = star_graph(1)
        with pytest.raises(cb.ParameterError):
            cb.bp_run(g, np.array([1]), cb.spammer_hammer(), k_max=0)
        with pytest.raises(cb.ParameterError):
            cb.bp_run(g, np.array([1]), cb.spammer_hammer(), tol=-1.0)
        with pytest.raises(cb.ParameterError):
            cb.bp_run(g, np.array([1, 1]), cb.spammer_hammer())
        small_table = FactorTable.build(cb.spammer_hammer(), 1)
        g2 = cb.AssignmentGraph(2, 1, np.array([[0, 0], [1, 0]]))
        with pytest.raises(cb.ParameterError):
            cb.bp_run(g2, np.array([1, 1]), cb.spammer_hammer(), factors=small_table)

    def test_prebuilt_factor_table_gives_identical_output(self, rng):
        g = cb.generate_regular_bipartite(20, 3, 4, seed=2)
        a = rng.choice([-1, 1], size=g.n_edges)
        table = FactorTable.build(cb.spammer_hammer(), 4)
        direct = cb.bp_run(g, a, cb.spammer_hammer())
        shared = cb.bp_run(g, a, cb.spammer_hammer(), factors=table)
        np.testing.assert_array_equal(direct.margins, shared.margins)


class TestClamping:
    def test_clamped_tasks_report_their_labels(self):
        g = cb.AssignmentGraph(2, 1, np.array([[0, 0], [1, 0]]))
        report = cb.bp_run(g, np.array([1, 1]), cb.spammer_hammer(),
                           clamp_tasks=np.array([0]), clamp_labels=np.array([-1]))
        assert report.margins[0] == -1.0
        assert report.labels[0] == -1

    def test_revealed_neighbor_propagates_through_a_shared_worker(self):
        # One worker answered +1 on both tasks; task 0's label is revealed
        # as +1, which vouches for the worker and pulls task 1 up.
        g = cb.AssignmentGraph(2, 1, np.array([[0, 0], [1, 0]]))
        clamped = cb.bp_run(g, np.array([1, 1]), cb.adversary_spammer_hammer(),
                            clamp_tasks=np.array([0]), clamp_labels=np.array([1]))
        free = cb.bp_run(g, np.array([1, 1]), cb.adversary_spammer_hammer())
        assert clamped.margins[1] > free.margins[1]

    def test_clamp_shape_mismatch_rejected(self):
        g = star_graph(1)
        with pytest.raises(cb.ParameterError):
            cb.bp_run(g, np.array([1]), cb.spammer_hammer(),
                      clamp_tasks=np.array([0]), clamp_labels=np.array([1, 1]))


class TestDegeneracy:
    def test_contradicted_perfect_workers_name_the_task(self):
        # Four perfect single-answer workers split 2-2 leave no label with
        # positive mass once the pair floor underflows.
        perfect = cb.ReliabilityPrior.from_atoms([1.0], [1.0])
        g = star_graph(4)
        with pytest.raises(cb.NumericDegeneracyError, match="task 0"):
            cb.bp_run(g, np.array([1, 1, -1, -1]), perfect, k_max=1)

    def test_clamp_contradicting_a_perfect_worker_names_the_edge(self):
        perfect = cb.ReliabilityPrior.from_atoms([1.0], [1.0])
        g = cb.AssignmentGraph(2, 1, np.array([[0, 0], [1, 0]]))
        with pytest.raises(cb.NumericDegeneracyError, match="edge"):
            cb.bp_run(g, np.array([1, 1]), perfect,
                      clamp_tasks=np.array([0]), clamp_labels=np.array([-1]))


class TestReportShape:
    def test_decode_ties_to_plus_one(self):
        np.testing.assert_array_equal(cb.decode_labels(np.array([0.0, -0.2, 0.3])),
                                      [1, -1, 1])

    def test_labels_match_margin_signs(self, rng):
        g = cb.generate_regular_bipartite(30, 3, 3, seed=5)
        a = rng.choice([-1, 1], size=g.n_edges)
        report = cb.bp_run(g, a, cb.spammer_hammer())
        np.testing.assert_array_equal(report.labels, cb.decode_labels(report.margins))
        assert report.margins.min() >= -1.0 and report.margins.max() <= 1.0


class TestTheoryIterations:
    @pytest.mark.parametrize("n,expected", [(1, 1), (2, 1), (3, 1), (20, 2),
                                            (1000, 2), (10**6, 3)])
    def test_values(self, n, expected):
        assert cb.theory_iterations(n) == expected

    def test_rejects_non_positive(self):
        with pytest.raises(cb.ParameterError):
            cb.theory_iterations(0)
