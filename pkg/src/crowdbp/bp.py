"""Sum-product message passing on the task-worker factor graph.

Messages are normalized probability pairs (component 0 for label +1,
component 1 for label -1), one pair per edge and direction, updated in
synchronous sweeps: all task-to-worker messages from the previous
worker-to-task messages, then all worker-to-task messages from the fresh
task-to-worker ones.  Every produced pair is clamped to >= 1e-300 before
normalizing; a pair that is exactly (0, 0) aborts with a degeneracy error
naming the edge.  Log space is used only inside factor evaluation.

The worker update integrates the reliability prior over its support atoms:
with incoming magnetizations x_j = m(+1) - m(-1) and mu = 2p - 1,

    m[u->i](s) ∝ E[ (1 + A_iu * mu * s) / 2 * prod_j (1 + A_ju * mu * x_j) / 2 ]

which reproduces the literal sum over neighbor label configurations
weighted by f(c, r) exactly; the ``naive`` kernel computes that sum
directly and exists as the independent cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericDegeneracyError, ParameterError, SizeError
from .graph import AnswerMatrix, AssignmentGraph, answer_values
from .priors import FactorTable, ReliabilityPrior
from .segments import expand, segment_loo_prod, segment_prod

PAIR_FLOOR = 1e-300
DIVISION_GUARD = 1e-12
_NAIVE_DEGREE_GUARD = 14


@dataclass(frozen=True)
class BeliefState:
    """Message pairs per edge in both directions plus current task beliefs."""

    msg_task_to_worker: np.ndarray  # (m, 2)
    msg_worker_to_task: np.ndarray  # (m, 2)
    beliefs: np.ndarray             # (n_tasks, 2)
    iteration: int


@dataclass(frozen=True)
class EstimateReport:
    """Decoded labels with margins in [-1, 1] and run diagnostics.

    ``labels[i] == +1`` exactly when ``margins[i] >= 0``; ties decode to +1.
    """

    labels: np.ndarray
    margins: np.ndarray
    iterations_run: int
    converged: bool
    max_delta: float


def decode_labels(margins: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(margins) >= 0.0, 1, -1).astype(np.int64)


def make_report(margins: np.ndarray, iterations_run: int, converged: bool,
                max_delta: float) -> EstimateReport:
    margins = np.asarray(margins, dtype=np.float64)
    return EstimateReport(decode_labels(margins), margins, iterations_run,
                          converged, float(max_delta))


def bp_init(graph: AssignmentGraph) -> BeliefState:
    """Uninformative start: every message and belief is (1/2, 1/2)."""
    m = graph.n_edges
    return BeliefState(
        msg_task_to_worker=np.full((m, 2), 0.5),
        msg_worker_to_task=np.full((m, 2), 0.5),
        beliefs=np.full((graph.n_tasks, 2), 0.5),
        iteration=0,
    )


def _normalize_pairs(pairs: np.ndarray, graph: AssignmentGraph, what: str,
                     per_task: bool = False) -> np.ndarray:
    zero = (pairs[:, 0] == 0.0) & (pairs[:, 1] == 0.0)
    if zero.any():
        idx = int(np.flatnonzero(zero)[0])
        if per_task:
            raise NumericDegeneracyError(f"{what} for task {idx} has zero mass")
        task, worker = graph.edges[idx]
        raise NumericDegeneracyError(
            f"{what} on edge {idx} (task {task}, worker {worker}) has zero mass"
        )
    pairs = np.maximum(pairs, PAIR_FLOOR)
    return pairs / pairs.sum(axis=1, keepdims=True)


def bp_update_task_messages(state: BeliefState, graph: AssignmentGraph,
                            answers: AnswerMatrix | np.ndarray) -> BeliefState:
    """Each task tells each worker the product of its other workers' messages.

    Answers do not enter this half-sweep; the argument is kept for signature
    symmetry with the worker half-sweep.
    """
    del answers
    loo = segment_loo_prod(state.msg_worker_to_task, graph.by_task)
    new = _normalize_pairs(loo, graph, "task message")
    return replace(state, msg_task_to_worker=new)


def _worker_pairs_magnetization(t2w: np.ndarray, graph: AssignmentGraph,
                                a: np.ndarray, factors: FactorTable) -> np.ndarray:
    grouping = graph.by_worker
    x = t2w[:, 0] - t2w[:, 1]
    ax = a * x
    plus = np.zeros(graph.n_edges)
    minus = np.zeros(graph.n_edges)
    for weight, mu in zip(factors.atom_w, factors.atom_mu):
        t = 0.5 * (1.0 + mu * ax)
        full = expand(segment_prod(t, grouping), grouping)
        small = t < DIVISION_GUARD
        with np.errstate(divide="ignore", invalid="ignore"):
            loo = full / t
        if small.any():
            # Division is unreliable past the guard: redo those workers exactly.
            affected = np.unique(graph.edges[small, 1])
            for u in affected:
                lo, hi = grouping.offsets[u], grouping.offsets[u + 1]
                eids = grouping.order[lo:hi]
                loo[eids] = segment_loo_prod(
                    t[eids], _singleton_grouping(eids.size)
                )
        # Both lanes spell out the same expression so that flipping an answer
        # swaps the pair bitwise; deriving one lane as 1 - other rounds
        # differently and leaves sign noise on exact ties.
        plus += weight * (0.5 * (1.0 + mu * a)) * loo
        minus += weight * (0.5 * (1.0 - mu * a)) * loo
    return np.column_stack((plus, minus))


def _singleton_grouping(size: int):
    from .segments import build_grouping

    return build_grouping(np.zeros(size, dtype=np.int64), 1)


def _worker_pairs_naive(t2w: np.ndarray, graph: AssignmentGraph,
                        a: np.ndarray, factors: FactorTable) -> np.ndarray:
    degrees = graph.worker_degrees
    if degrees.size and degrees.max() > _NAIVE_DEGREE_GUARD:
        raise SizeError(
            f"naive kernel enumerates 2^(r-1) configurations; worker degree "
            f"{int(degrees.max())} exceeds the guard {_NAIVE_DEGREE_GUARD}"
        )
    grouping = graph.by_worker
    pairs = np.empty((graph.n_edges, 2))
    for u in range(graph.n_workers):
        lo, hi = grouping.offsets[u], grouping.offsets[u + 1]
        eids = grouping.order[lo:hi]
        r = eids.size
        for pos, e in enumerate(eids):
            others = np.delete(eids, pos)
            k = r - 1
            configs = _pm_configs(k)
            probs = np.where(configs == 1, t2w[others, 0], t2w[others, 1])
            prod_m = probs.prod(axis=1) if k else np.ones(1)
            base_c = (configs == a[others]).sum(axis=1) if k else np.zeros(1, dtype=int)
            for col, s in ((0, 1), (1, -1)):
                c = base_c + (a[e] == s)
                pairs[e, col] = float(np.exp(factors.log_values[r, c]) @ prod_m)
    return pairs


def _pm_configs(k: int) -> np.ndarray:
    bits = (np.arange(2**k)[:, None] >> np.arange(k)[None, :]) & 1
    return (2 * bits - 1).astype(np.int64)


def bp_update_worker_messages(state: BeliefState, graph: AssignmentGraph,
                              answers: AnswerMatrix | np.ndarray, factors: FactorTable,
                              kernel: str = "magnetization") -> BeliefState:
    """Each worker tells each task how its other answers weigh the label."""
    a = answer_values(answers).astype(np.float64)
    if a.shape[0] != graph.n_edges:
        raise ParameterError("answers length does not match graph")
    if kernel == "magnetization":
        pairs = _worker_pairs_magnetization(state.msg_task_to_worker, graph, a, factors)
    elif kernel == "naive":
        pairs = _worker_pairs_naive(state.msg_task_to_worker, graph, a, factors)
    else:
        raise ParameterError(f"unknown kernel {kernel!r}")
    new = _normalize_pairs(pairs, graph, "worker message")
    return replace(state, msg_worker_to_task=new)


def bp_compute_beliefs(state: BeliefState, graph: AssignmentGraph) -> BeliefState:
    prod = segment_prod(state.msg_worker_to_task, graph.by_task)
    beliefs = _normalize_pairs(prod, graph, "belief", per_task=True)
    return replace(state, beliefs=beliefs)


def _clamp_rows(graph: AssignmentGraph, clamp_tasks: np.ndarray,
                clamp_labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Edge ids of clamped tasks and their fixed point-mass outgoing pairs."""
    grouping = graph.by_task
    edge_ids, pair_rows = [], []
    for task, label in zip(clamp_tasks, clamp_labels):
        lo, hi = grouping.offsets[task], grouping.offsets[task + 1]
        eids = grouping.order[lo:hi]
        edge_ids.append(eids)
        point = [1.0, 0.0] if label == 1 else [0.0, 1.0]
        pair_rows.append(np.tile(point, (eids.size, 1)))
    if not edge_ids:
        return np.empty(0, dtype=np.int64), np.empty((0, 2))
    return np.concatenate(edge_ids), np.concatenate(pair_rows)


def bp_run(graph: AssignmentGraph, answers: AnswerMatrix | np.ndarray,
           prior: ReliabilityPrior, k_max: int = 100, tol: float = 1e-5,
           *, kernel: str = "magnetization",
           clamp_tasks: np.ndarray | None = None,
           clamp_labels: np.ndarray | None = None,
           factors: FactorTable | None = None) -> EstimateReport:
    """Run synchronous sweeps and decode the sign of each task's belief margin.

    Stops early once the largest absolute message change falls below
    ``tol`` (an exact fixed point always counts as converged, so ``tol=0``
    runs the full ``k_max`` sweeps unless the messages stop moving
    entirely).  ``clamp_tasks``/``clamp_labels`` pin the outgoing messages
    and beliefs of the given tasks to point masses on the given labels,
    which conditions the run on those labels being known.
    """
    if k_max < 1:
        raise ParameterError("k_max must be at least 1")
    if tol < 0:
        raise ParameterError("tol must be non-negative")
    r_max = int(graph.worker_degrees.max()) if graph.n_edges else 0
    if factors is None:
        factors = FactorTable.build(prior, r_max)
    elif factors.r_max < r_max:
        raise ParameterError(f"factor table covers r <= {factors.r_max}, graph needs {r_max}")
    state = bp_init(graph)

    clamped = clamp_tasks is not None and len(clamp_tasks) > 0
    if clamped:
        clamp_tasks = np.asarray(clamp_tasks, dtype=np.int64)
        clamp_labels = np.asarray(clamp_labels, dtype=np.int64)
        if clamp_labels.shape != clamp_tasks.shape:
            raise ParameterError("clamp labels must match clamp tasks")
        clamp_edges, clamp_pairs = _clamp_rows(graph, clamp_tasks, clamp_labels)
        t2w = state.msg_task_to_worker.copy()
        t2w[clamp_edges] = clamp_pairs
        state = replace(state, msg_task_to_worker=t2w)

    converged = False
    delta = math.inf
    iterations = 0
    for iteration in range(1, k_max + 1):
        prev_t2w = state.msg_task_to_worker
        prev_w2t = state.msg_worker_to_task
        state = bp_update_task_messages(state, graph, answers)
        if clamped:
            t2w = state.msg_task_to_worker
            t2w[clamp_edges] = clamp_pairs
        state = bp_update_worker_messages(state, graph, answers, factors, kernel=kernel)
        state = replace(state, iteration=iteration)
        iterations = iteration
        delta = max(
            float(np.abs(state.msg_task_to_worker - prev_t2w).max(initial=0.0)),
            float(np.abs(state.msg_worker_to_task - prev_w2t).max(initial=0.0)),
        )
        if delta < tol or delta == 0.0:
            converged = True
            break

    state = bp_compute_beliefs(state, graph)
    margins = state.beliefs[:, 0] - state.beliefs[:, 1]
    if clamped:
        margins[clamp_tasks] = clamp_labels.astype(np.float64)
    return make_report(margins, iterations, converged, delta)


def theory_iterations(n_tasks: int) -> int:
    """The doubly-logarithmic sweep count used by the asymptotic analysis."""
    if n_tasks < 1:
        raise ParameterError("n_tasks must be positive")
    if n_tasks <= math.e:
        return 1
    return max(1, math.ceil(math.log(math.log(n_tasks))))
