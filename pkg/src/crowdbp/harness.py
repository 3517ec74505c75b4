"""Experiment harness: error metrics, theoretical bounds, dataset files,
degree subsampling, and seeded benchmark sweeps with CSV output.

Benchmark results are deterministic for a given config and master seed:
every (sweep point, trial, stage) derives its own child seed and results
are aggregated positionally, so thread count never changes the output.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .bp import EstimateReport
from .errors import CrowdBPError, DataFormatError, ParameterError
from .estimators import EstimatorSpec
from .graph import AnswerMatrix, AssignmentGraph, GroundTruth, \
    generate_regular_bipartite, sample_answers, sample_ground_truth
from .priors import ReliabilityPrior, empirical_prior, parse_prior_spec
from .seeding import child_seed, rng_from

CSV_COLUMNS = ("estimator", "l", "r", "mean_error", "std_error", "trials",
               "mean_iterations", "wall_time_ms", "failures")


def error_rate(estimate: EstimateReport | np.ndarray, truth_labels: np.ndarray) -> float:
    """Fraction of decoded labels disagreeing with the truth."""
    labels = estimate.labels if isinstance(estimate, EstimateReport) else np.asarray(estimate)
    truth_labels = np.asarray(truth_labels)
    if labels.shape != truth_labels.shape:
        raise ParameterError("label vectors have mismatched lengths")
    if labels.size == 0:
        raise ParameterError("cannot score an empty label vector")
    return float(np.mean(labels != truth_labels))


def theoretical_bounds(l: int, r: int, mu: float, q: float) -> tuple[float, float | None]:
    """Upper bounds on majority vote and on agreement-weighted message passing.

    The second bound only exists above the spectral barrier
    q^2 (l-1)(r-1) > 1 and is ``None`` below it.
    """
    if l < 1 or r < 1:
        raise ParameterError("degrees must be positive")
    if not -1.0 <= mu <= 1.0 or not 0.0 <= q <= 1.0:
        raise ParameterError("need mu in [-1, 1] and q in [0, 1]")
    mv_bound = math.exp(-l * mu * mu / 2.0)
    barrier = q * q * (l - 1) * (r - 1)
    if barrier <= 1.0:
        return mv_bound, None
    kos_bound = math.exp(-(l * q / 2.0) * (barrier - 1.0) / (3.0 * barrier + q * (l - 1)))
    return mv_bound, kos_bound


def tree_probability_bound(n_tasks: int, l: int, r: int, k: int) -> float:
    """Upper bound on the chance that a root's 2k-hop neighborhood is not a tree."""
    if n_tasks < 1 or l < 1 or r < 1 or k < 0:
        raise ParameterError("n_tasks, l, r must be positive and k non-negative")
    value = 3.0 * l * r / n_tasks * float((l - 1) * (r - 1)) ** (2 * k)
    return min(1.0, value)


# ---------------------------------------------------------------------------
# dataset files

@dataclass(frozen=True)
class Dataset:
    """An assignment graph with answers and optional truth metadata.

    ``task_names``/``worker_names`` map compact integer ids back to the
    identifiers used in the source file.
    """

    graph: AssignmentGraph
    answers: AnswerMatrix
    truth_labels: np.ndarray | None = None
    reliabilities: np.ndarray | None = None
    task_names: tuple[str, ...] = ()
    worker_names: tuple[str, ...] = ()


_ALPHABETS = {
    "pm1": {"+1": 1, "1": 1, "-1": -1},
    "01": {"1": 1, "0": -1},
}


def _parse_label(token: str, alphabet: str, line_no: int, what: str) -> int:
    try:
        return _ALPHABETS[alphabet][token.strip()]
    except KeyError:
        raise DataFormatError(
            f"line {line_no}: bad {what} {token!r} for alphabet {alphabet!r}"
        ) from None


def load_dataset(path: str, fmt: str = "edge-csv") -> Dataset:
    """Read an edge-list CSV: ``task,worker,answer[,truth[,reliability]]``.

    Comment lines start with ``#``; a ``# alphabet=pm1`` or ``# alphabet=01``
    directive selects the answer encoding (0 maps to -1).  The optional
    fourth column carries the task's true label and the fifth the worker's
    reliability; repeated values must agree.  Ids are arbitrary strings and
    are compacted in order of first appearance.
    """
    if fmt != "edge-csv":
        raise ParameterError(f"unknown dataset format {fmt!r}")
    alphabet = "pm1"
    task_ids: dict[str, int] = {}
    worker_ids: dict[str, int] = {}
    edges: list[tuple[int, int]] = []
    answers: list[int] = []
    truths: dict[int, int] = {}
    rels: dict[int, float] = {}
    n_cols: int | None = None
    seen: set[tuple[int, int]] = set()

    with open(path, newline="") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("alphabet="):
                    alphabet = body[len("alphabet="):].strip()
                    if alphabet not in _ALPHABETS:
                        raise DataFormatError(f"line {line_no}: unknown alphabet {alphabet!r}")
                continue
            row = next(csv.reader([line]))
            if n_cols is None:
                n_cols = len(row)
                if n_cols not in (3, 4, 5):
                    raise DataFormatError(
                        f"line {line_no}: expected 3-5 columns, got {len(row)}")
            elif len(row) != n_cols:
                raise DataFormatError(
                    f"line {line_no}: expected {n_cols} columns, got {len(row)}")
            t_name, w_name = row[0].strip(), row[1].strip()
            t = task_ids.setdefault(t_name, len(task_ids))
            w = worker_ids.setdefault(w_name, len(worker_ids))
            if (t, w) in seen:
                raise DataFormatError(
                    f"line {line_no}: duplicate answer for task {t_name!r}, "
                    f"worker {w_name!r}")
            seen.add((t, w))
            edges.append((t, w))
            answers.append(_parse_label(row[2], alphabet, line_no, "answer"))
            if n_cols >= 4:
                truth = _parse_label(row[3], alphabet, line_no, "truth label")
                if truths.setdefault(t, truth) != truth:
                    raise DataFormatError(
                        f"line {line_no}: conflicting truth for task {t_name!r}")
            if n_cols == 5:
                try:
                    rel = float(row[4])
                except ValueError:
                    raise DataFormatError(
                        f"line {line_no}: bad reliability {row[4]!r}") from None
                if not 0.0 <= rel <= 1.0:
                    raise DataFormatError(
                        f"line {line_no}: reliability {rel} outside [0, 1]")
                if rels.setdefault(w, rel) != rel:
                    raise DataFormatError(
                        f"line {line_no}: conflicting reliability for worker {w_name!r}")

    if not edges:
        raise DataFormatError(f"{path}: no answer rows found")
    graph = AssignmentGraph(len(task_ids), len(worker_ids), np.asarray(edges))
    truth_labels = None
    if n_cols >= 4:
        truth_labels = np.array([truths[t] for t in range(len(task_ids))])
    reliabilities = None
    if n_cols == 5:
        reliabilities = np.array([rels[w] for w in range(len(worker_ids))])
    return Dataset(
        graph=graph,
        answers=AnswerMatrix(np.asarray(answers)),
        truth_labels=truth_labels,
        reliabilities=reliabilities,
        task_names=tuple(task_ids),
        worker_names=tuple(worker_ids),
    )


def save_dataset(dataset: Dataset, path: str) -> None:
    """Write the edge-list CSV; truth/reliability columns when present."""
    names_t = dataset.task_names or tuple(str(i) for i in range(dataset.graph.n_tasks))
    names_w = dataset.worker_names or tuple(str(u) for u in range(dataset.graph.n_workers))
    a = dataset.answers.answers
    with open(path, "w", newline="") as handle:
        handle.write("# alphabet=pm1\n")
        writer = csv.writer(handle, lineterminator="\n")
        for e, (t, w) in enumerate(dataset.graph.edges):
            row = [names_t[t], names_w[w], f"{a[e]:+d}"]
            if dataset.truth_labels is not None:
                row.append(f"{dataset.truth_labels[t]:+d}")
                if dataset.reliabilities is not None:
                    row.append(repr(float(dataset.reliabilities[w])))
            writer.writerow(row)


def subsample_assignments(dataset: Dataset, l_target: int, seed: int) -> Dataset:
    """Keep at most ``l_target`` uniformly chosen answers per task.

    Tasks are processed in ascending id order with a single generator, so
    the result is a pure function of (dataset, l_target, seed).  Workers
    left without answers are dropped and worker ids compacted; task ids and
    truth columns are untouched.
    """
    if l_target < 1:
        raise ParameterError("l_target must be at least 1")
    graph = dataset.graph
    rng = rng_from(seed)
    keep = np.zeros(graph.n_edges, dtype=bool)
    grouping = graph.by_task
    for t in range(graph.n_tasks):
        eids = grouping.order[grouping.offsets[t]:grouping.offsets[t + 1]]
        if eids.size <= l_target:
            keep[eids] = True
        else:
            keep[eids[rng.choice(eids.size, size=l_target, replace=False)]] = True

    kept_edges = graph.edges[keep]
    kept_workers = np.unique(kept_edges[:, 1])
    remap = np.full(graph.n_workers, -1, dtype=np.int64)
    remap[kept_workers] = np.arange(kept_workers.size)
    new_edges = np.column_stack((kept_edges[:, 0], remap[kept_edges[:, 1]]))
    names_w = dataset.worker_names or tuple(str(u) for u in range(graph.n_workers))
    return Dataset(
        graph=AssignmentGraph(graph.n_tasks, kept_workers.size, new_edges),
        answers=AnswerMatrix(dataset.answers.answers[keep]),
        truth_labels=dataset.truth_labels,
        reliabilities=(dataset.reliabilities[kept_workers]
                       if dataset.reliabilities is not None else None),
        task_names=dataset.task_names,
        worker_names=tuple(names_w[u] for u in kept_workers),
    )


def run_inference(dataset: Dataset, estimator: str, prior_spec: str | None = None,
                  k_max: int = 100, tol: float = 1e-5, seed: int = 0) -> EstimateReport:
    """Run one estimator on a dataset, resolving its required inputs.

    A prior comes from ``prior_spec`` when given, otherwise from the
    dataset's reliability column (as an empirical atom prior).  Estimators
    needing truth or reliabilities fail with a parameter error when the
    dataset lacks them.
    """
    spec = EstimatorSpec.parse(estimator, k_max=k_max, tol=tol)
    prior: ReliabilityPrior | None = None
    if spec.needs_prior():
        if prior_spec:
            prior = parse_prior_spec(prior_spec)
        elif dataset.reliabilities is not None:
            prior = empirical_prior(dataset.reliabilities)
        else:
            raise ParameterError(
                f"estimator {estimator!r} needs --prior or a dataset reliability column")
    truth = None
    if spec.needs_truth():
        if dataset.truth_labels is None:
            raise ParameterError(f"estimator {estimator!r} needs truth labels in the dataset")
        rel = dataset.reliabilities
        if rel is None:
            rel = np.full(dataset.graph.n_workers, 0.5)
        truth = GroundTruth(dataset.truth_labels, rel)
    reliabilities = None
    if spec.needs_reliabilities():
        if dataset.reliabilities is None:
            raise ParameterError(
                f"estimator {estimator!r} needs a dataset reliability column")
        reliabilities = dataset.reliabilities
    return spec.run(dataset.graph, dataset.answers, prior=prior, truth=truth,
                    reliabilities=reliabilities, seed=seed)


# ---------------------------------------------------------------------------
# benchmark sweeps

@dataclass(frozen=True)
class ExperimentConfig:
    """A degree sweep over freshly simulated instances.

    ``sweep`` picks which degree varies ("l" or "r"); the other stays at
    ``fixed_degree``.  ``adjust_n`` permits nudging ``n_tasks`` per point to
    the nearest value admitting a regular assignment (tie toward larger).
    ``timing=False`` zeroes the wall-time column so reruns are
    byte-identical.
    """

    n_tasks: int
    sweep_values: tuple[int, ...]
    fixed_degree: int
    prior: str
    estimators: tuple[str, ...]
    sweep: str = "l"
    trials: int = 100
    k_max: int = 100
    tol: float = 1e-5
    seed: int = 0
    threads: int = 1
    timing: bool = True
    adjust_n: bool = False
    out: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sweep_values", tuple(int(v) for v in self.sweep_values))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.sweep not in ("l", "r"):
            raise ParameterError(f"sweep must be 'l' or 'r', got {self.sweep!r}")
        if self.n_tasks < 1 or self.fixed_degree < 1 or not self.sweep_values:
            raise ParameterError("n_tasks, fixed_degree and sweep_values must be positive")
        if min(self.sweep_values) < 1:
            raise ParameterError("sweep values must be positive")
        if self.trials < 1 or self.k_max < 1 or self.threads < 1:
            raise ParameterError("trials, k_max and threads must be at least 1")
        if self.tol < 0:
            raise ParameterError("tol must be non-negative")
        parse_prior_spec(self.prior)
        for name in self.estimators:
            EstimatorSpec.parse(name)
        if not self.estimators:
            raise ParameterError("at least one estimator is required")


_CONFIG_LIST_KEYS = {"sweep_values", "estimators"}
_CONFIG_BOOL_KEYS = {"timing", "adjust_n"}


def load_experiment_config(path: str) -> ExperimentConfig:
    """Read a config file: JSON object or flat ``key = value`` lines."""
    with open(path) as handle:
        text = handle.read()
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{path}: bad JSON config: {exc}") from exc
    else:
        raw = {}
        for line_no, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{line_no}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            raw[key] = value
    return _config_from_dict(raw, path)


def _config_from_dict(raw: dict, source: str) -> ExperimentConfig:
    known = {f.name: f for f in fields(ExperimentConfig)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ParameterError(f"{source}: unknown config key {key!r}")
        if key in _CONFIG_LIST_KEYS:
            if isinstance(value, str):
                value = tuple(item.strip() for item in value.split(",") if item.strip())
            value = tuple(value)
            if key == "sweep_values":
                try:
                    value = tuple(int(v) for v in value)
                except ValueError as exc:
                    raise ParameterError(f"{source}: bad {key}: {exc}") from exc
        elif key in _CONFIG_BOOL_KEYS:
            if isinstance(value, str):
                if value.lower() not in ("true", "false"):
                    raise ParameterError(f"{source}: {key} must be true or false")
                value = value.lower() == "true"
            value = bool(value)
        elif key in ("tol",):
            value = float(value)
        elif key in ("n_tasks", "fixed_degree", "trials", "k_max", "seed", "threads"):
            try:
                value = int(value)
            except ValueError as exc:
                raise ParameterError(f"{source}: bad {key}: {exc}") from exc
        kwargs[key] = value
    missing = {"n_tasks", "sweep_values", "fixed_degree", "prior", "estimators"} - set(kwargs)
    if missing:
        raise ParameterError(f"{source}: missing config keys {sorted(missing)}")
    return ExperimentConfig(**kwargs)


@dataclass(frozen=True)
class MetricsRow:
    estimator: str
    l: int
    r: int
    mean_error: float | None
    std_error: float | None
    trials: int
    mean_iterations: float
    wall_time_ms: float
    failures: int

    def as_csv(self) -> list[str]:
        def num(x):
            return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))

        return [self.estimator, str(self.l), str(self.r), num(self.mean_error),
                num(self.std_error), str(self.trials), num(self.mean_iterations),
                num(self.wall_time_ms), str(self.failures)]


def nearest_feasible_n(n_tasks: int, l: int, r: int) -> int:
    """Smallest adjustment of n_tasks so that n*l is divisible by r."""
    for delta in range(r + 1):
        for candidate in (n_tasks + delta, n_tasks - delta):
            if candidate >= 1 and (candidate * l) % r == 0:
                return candidate
    raise ParameterError(f"no feasible task count near {n_tasks} for l={l}, r={r}")


def _run_trial(config: ExperimentConfig, specs: list[EstimatorSpec], prior: ReliabilityPrior,
               n: int, l: int, r: int, point: int, trial: int) -> list[tuple]:
    graph = generate_regular_bipartite(n, l, r, child_seed(config.seed, "graph", point, trial))
    truth = sample_ground_truth(graph, prior, child_seed(config.seed, "truth", point, trial))
    answers = sample_answers(graph, truth, child_seed(config.seed, "answers", point, trial))
    results = []
    for spec in specs:
        start = time.perf_counter()
        try:
            report = spec.run(graph, answers, prior=prior, truth=truth,
                              reliabilities=truth.reliabilities,
                              seed=child_seed(config.seed, "estimator", point, trial, spec.name))
            err = error_rate(report, truth.labels)
            results.append((err, report.iterations_run, time.perf_counter() - start, None))
        except CrowdBPError as exc:
            results.append((np.nan, 0, time.perf_counter() - start,
                            f"{spec.name}/trial{trial}: {exc}"))
    return results


def run_experiment(config: ExperimentConfig) -> list[MetricsRow]:
    """Run the configured sweep and return one row per (estimator, point)
    plus companion rows for the analytic bounds and the tree diagnostic."""
    prior = parse_prior_spec(config.prior)
    mu, q = prior.moments()
    specs = [EstimatorSpec.parse(name, k_max=config.k_max, tol=config.tol)
             for name in config.estimators]
    from .bp import theory_iterations

    rows: list[MetricsRow] = []
    for point, value in enumerate(config.sweep_values):
        l, r = (value, config.fixed_degree) if config.sweep == "l" else (config.fixed_degree, value)
        n = config.n_tasks
        if (n * l) % r != 0:
            if not config.adjust_n:
                raise ParameterError(
                    f"sweep point l={l}, r={r}: n_tasks*l not divisible by r "
                    "(set adjust_n = true to nudge n per point)")
            n = nearest_feasible_n(n, l, r)

        per_trial = [None] * config.trials

        def job(t: int, _n=n, _l=l, _r=r, _pt=point):
            per_trial[t] = _run_trial(config, specs, prior, _n, _l, _r, _pt, t)

        if config.threads == 1:
            for t in range(config.trials):
                job(t)
        else:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                list(pool.map(job, range(config.trials)))

        for idx, spec in enumerate(specs):
            errs = np.array([per_trial[t][idx][0] for t in range(config.trials)])
            iters = np.array([per_trial[t][idx][1] for t in range(config.trials)], dtype=float)
            wall = sum(per_trial[t][idx][2] for t in range(config.trials))
            ok = ~np.isnan(errs)
            failures = int(config.trials - ok.sum())
            mean_err = float(errs[ok].mean()) if ok.any() else None
            std_err = (float(errs[ok].std(ddof=1) / math.sqrt(ok.sum()))
                       if ok.sum() > 1 else (0.0 if ok.any() else None))
            rows.append(MetricsRow(
                estimator=spec.name, l=l, r=r, mean_error=mean_err, std_error=std_err,
                trials=config.trials,
                mean_iterations=float(iters[ok].mean()) if ok.any() else 0.0,
                wall_time_ms=wall * 1e3 if config.timing else 0.0,
                failures=failures,
            ))

        mv_bound, kos_bound = theoretical_bounds(l, r, mu, q)
        rows.append(MetricsRow("bound:mv", l, r, mv_bound, 0.0, 0, 0.0, 0.0, 0))
        rows.append(MetricsRow("bound:kos", l, r, kos_bound, 0.0, 0, 0.0, 0.0, 0))
        rows.append(MetricsRow(
            "diag:tree", l, r,
            tree_probability_bound(n, l, r, theory_iterations(n)),
            0.0, 0, 0.0, 0.0, 0))
    return rows


def write_metrics_csv(rows: list[MetricsRow], destination) -> None:
    """Write rows in the fixed column order; RFC-4180 (CRLF, headers first)."""
    if isinstance(destination, (str,)):
        with open(destination, "w", newline="") as handle:
            _write_rows(rows, handle)
    else:
        _write_rows(rows, destination)


def _write_rows(rows: list[MetricsRow], handle) -> None:
    writer = csv.writer(handle)
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.as_csv())


def metrics_csv_text(rows: list[MetricsRow]) -> str:
    buffer = io.StringIO(newline="")
    _write_rows(rows, buffer)
    return buffer.getvalue()
