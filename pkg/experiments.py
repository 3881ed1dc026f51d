"""
Experiment harness: the width survey, the solution-quality grid, evaluation
statistics and one-shot solving of a network file.

Every instance draws its randomness from (master seed, instance index, ...)
so results do not depend on the number of workers or on scheduling.
"""
import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import pandas as pd

from bayes_net import Assignment
from circuit import ElimTrace, IndicatorSetting, build_trace
from config import (
    BIAS_GRID, DEFAULT_BUDGET, DESK_INSTANCES, MAX_MAP_VARS, MIN_MAP_ROOTS,
    QUALITY_METHODS, SOLVED_RTOL, WIDTH_CAP, WORKERS,
)
from elim_order import induced_width, min_fill_order, moral_graph, order_width, width_stats
from errors import AssignmentError, ConfigError, WidthCapExceeded, ZeroProbabilityEvidence
from inference import exact_map
from local_search import SearchConfig, run_search
from netgen import (
    GenConfig, derive_seed, gen_structure, instance_rng, quantify,
    sample_evidence, select_map_vars,
)
from network_io import load_instance

# Configure logging for this module
logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "experiment", "seed", "generator", "n", "param", "bias", "method", "instance",
    "exact_log_score", "approx_log_score", "solved",
    "evaluations_used", "evaluations_to_best", "peaks_found", "peaks_before_best", "first_peak_evaluation",
]

WIDTH_COLUMNS = [
    "experiment", "seed", "generator", "n", "param", "instances",
    "unconstrained_min", "unconstrained_max", "unconstrained_average", "unconstrained_weighted_average",
    "constrained_min", "constrained_max", "constrained_average", "constrained_weighted_average",
]

# Regeneration attempts per instance before the width survey gives up.
MAX_REGENERATIONS = 1000

_INITS = ("rand", "ml", "mpe", "seq")
_SEARCHES = ("hill", "taboo")


def parse_method(name):
    """'Seq-Taboo' -> ('seq', 'taboo'); a bare 'MPE' -> ('mpe', 'none')."""
    head, sep, tail = name.strip().lower().partition("-")
    init, search = head, tail if sep else "none"
    if init not in _INITS or (sep and search not in _SEARCHES):
        raise ConfigError(f"unknown method {name!r}")
    return init, search


def is_solved(exact_log, approx_log, rtol=SOLVED_RTOL):
    """Approximate score equals the exact one within `rtol` relative."""
    if exact_log == -math.inf:
        return approx_log == -math.inf
    return approx_log >= exact_log + math.log1p(-rtol)


# ========== Records ==========

@dataclass(frozen=True)
class WidthRecord:
    generator: str
    n: int
    # None for the bucket pooling every parameter value.
    param: float
    instances: int
    unconstrained: object
    constrained: object


@dataclass(frozen=True)
class WidthSample:
    instance: int
    param: float
    unconstrained: int
    constrained: int
    attempts: int


@dataclass(frozen=True)
class InstanceResult:
    experiment: str
    seed: int
    generator: str
    n: int
    param: float
    bias: float
    method: str
    instance: int
    exact_log_score: float
    approx_log_score: float
    solved: bool
    evaluations_used: int
    evaluations_to_best: int
    peaks_found: int
    peaks_before_best: int
    first_peak_evaluation: int = None


@dataclass(frozen=True)
class QualityRecord:
    method: str
    bias: float
    instances: int
    solved_correctly: int

    @property
    def fraction(self):
        return self.solved_correctly / self.instances if self.instances else 0.0


@dataclass(frozen=True)
class EvalStatsRecord:
    method: str
    instances: int
    mean: float
    stdev: float
    max: int
    mean_peaks_before_best: float
    # Share of peak-finding runs whose best came no later than their first peak.
    first_peak_fraction: float = None


@dataclass
class ExperimentReport:
    records: list
    rows: list
    requested: int
    skipped: int = 0
    skipped_instances: list = field(default_factory=list)


# ========== Configs ==========

@dataclass(frozen=True)
class WidthExperimentConfig:
    instances: int = DESK_INSTANCES
    generator: str = "connectivity"
    n: int = 100
    # Instance i uses params[i % len(params)] (c for connectivity, p for edge_prob).
    params: tuple = tuple(range(1, 21))
    min_roots: int = MIN_MAP_ROOTS
    max_map_vars: int = MAX_MAP_VARS
    seed: int = 0
    workers: int = WORKERS

    def __post_init__(self):
        if self.instances < 1:
            raise ConfigError("instances must be at least 1")
        if not self.params:
            raise ConfigError("the width survey needs at least one generator parameter")
        if self.min_roots > self.n:
            raise ConfigError(f"cannot demand {self.min_roots} roots from {self.n} variables")
        for param in self.params:
            self.gen_config(param)

    def gen_config(self, param):
        if self.generator == "connectivity":
            return GenConfig("connectivity", self.n, c=param, max_map_vars=self.max_map_vars)
        return GenConfig(self.generator, self.n, p=param, max_map_vars=self.max_map_vars)


@dataclass(frozen=True)
class QualityExperimentConfig:
    instances: int = DESK_INSTANCES
    generator: str = "edge_prob"
    n: int = 50
    param: float = 0.05
    biases: tuple = BIAS_GRID
    methods: tuple = QUALITY_METHODS
    budget: int = DEFAULT_BUDGET
    width_cap: int = WIDTH_CAP
    max_map_vars: int = MAX_MAP_VARS
    seed: int = 0
    workers: int = WORKERS

    def __post_init__(self):
        if self.instances < 1:
            raise ConfigError("instances must be at least 1")
        if not self.biases:
            raise ConfigError("the bias grid is empty")
        if not self.methods:
            raise ConfigError("no methods selected")
        if self.budget < 0:
            raise ConfigError("budget must be non-negative")
        for bias in self.biases:
            self.gen_config(bias)
        for name in self.methods:
            parse_method(name)

    def gen_config(self, bias=0.5):
        if self.generator == "connectivity":
            return GenConfig("connectivity", self.n, c=self.param, bias=bias, max_map_vars=self.max_map_vars)
        return GenConfig(self.generator, self.n, p=self.param, bias=bias, max_map_vars=self.max_map_vars)


# ========== Worker pool ==========

def _map_instances(worker, tasks, workers):
    """Runs `worker` over `tasks`, in-process or on a process pool; results keep task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    logger.info(f"Dispatching {len(tasks)} instances to {workers} worker processes.")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, tasks, chunksize=max(1, len(tasks) // (workers * 4))))


def _log_progress(done, total, label):
    step = max(1, total // 10)
    if done % step == 0 or done == total:
        logger.info(f"{label}: {done}/{total} instances")


# ========== Width survey ==========

def _width_instance(task):
    config, idx = task
    param = config.params[idx % len(config.params)]
    gen = config.gen_config(param)
    for attempt in range(MAX_REGENERATIONS):
        rng = instance_rng(config.seed, idx, attempt + 1)
        dag = gen_structure(gen, rng)
        roots = sum(1 for v in dag.nodes if dag.in_degree(v) == 0)
        if roots >= config.min_roots:
            break
    else:
        raise ConfigError(
            f"instance {idx}: no structure with {config.min_roots} roots after {MAX_REGENERATIONS} attempts"
        )
    S = select_map_vars(dag, config.max_map_vars, rng)
    graph = moral_graph(dag)
    unconstrained = order_width(graph, min_fill_order(graph))
    constrained = order_width(graph, min_fill_order(graph, S))
    return WidthSample(idx, param, unconstrained, constrained, attempt + 1)


def run_width_experiment(config, out=None):
    """
    Unconstrained vs. MAP-constrained min-fill widths of generated structures.

    Returns:
        ExperimentReport: one WidthRecord per parameter value, then a pooled
        record (param None); `rows` holds the per-instance WidthSamples.
    """
    logger.info(f"Width survey: {config.instances} instances, {config.generator}, N={config.n}, seed {config.seed}")
    tasks = [(config, idx) for idx in range(config.instances)]
    samples = sorted(_map_instances(_width_instance, tasks, config.workers), key=lambda s: s.instance)

    records = []
    buckets = [(param, [s for s in samples if s.param == param]) for param in config.params]
    buckets.append((None, samples))
    for param, group in buckets:
        if not group:
            continue
        records.append(WidthRecord(
            generator=config.generator,
            n=config.n,
            param=param,
            instances=len(group),
            unconstrained=width_stats([s.unconstrained for s in group]),
            constrained=width_stats([s.constrained for s in group]),
        ))
    report = ExperimentReport(records, samples, config.instances)
    if out:
        write_width_csv(report, config, out)
    return report


def width_frame(records, config=None):
    rows = []
    for r in records:
        row = {
            "experiment": "widths",
            "seed": config.seed if config else None,
            "generator": r.generator,
            "n": r.n,
            "param": "all" if r.param is None else r.param,
            "instances": r.instances,
        }
        for kind, stats in (("unconstrained", r.unconstrained), ("constrained", r.constrained)):
            for key, value in asdict(stats).items():
                row[f"{kind}_{key}"] = value
        rows.append(row)
    return pd.DataFrame(rows, columns=WIDTH_COLUMNS)


def write_width_csv(report, config, path):
    width_frame(report.records, config).to_csv(path, index=False)
    logger.info(f"Width survey written to '{path}'.")


# ========== Solution quality ==========

def _quality_instance(task):
    config, idx, experiment = task
    rng = instance_rng(config.seed, idx)
    gen = config.gen_config()
    dag = gen_structure(gen, rng)
    S = select_map_vars(dag, config.max_map_vars, rng)
    graph = moral_graph(dag)
    constrained = min_fill_order(graph, S)
    width = order_width(graph, constrained)
    if width > config.width_cap:
        logger.warning(f"Skipping instance {idx}: constrained width {width} exceeds cap {config.width_cap}")
        return idx, None
    unconstrained = min_fill_order(graph)

    rows = []
    for bi, bias in enumerate(config.biases):
        qrng = instance_rng(config.seed, idx, bi, 1)
        net = quantify(dag, bias, qrng)
        e = Assignment({v: x for v, x in sample_evidence(net, qrng).items() if v not in S})
        exact = exact_map(net, S, e, constrained)
        trace = ElimTrace(net, unconstrained)
        for mi, name in enumerate(config.methods):
            init, method = parse_method(name)
            search = SearchConfig(method, init, config.budget, rng_seed=derive_seed(config.seed, idx, bi, mi + 2))
            result = run_search(net, S, e, search, trace)
            approx = result.best.log_score
            if approx > exact.log_score - math.log1p(-SOLVED_RTOL):
                logger.error(f"Instance {idx}, bias {bias}, {name}: approximate {approx} beats exact {exact.log_score}")
            rows.append(InstanceResult(
                experiment=experiment,
                seed=config.seed,
                generator=config.generator,
                n=config.n,
                param=config.param,
                bias=bias,
                method=name,
                instance=idx,
                exact_log_score=exact.log_score,
                approx_log_score=approx,
                solved=is_solved(exact.log_score, approx),
                evaluations_used=result.evaluations_used,
                evaluations_to_best=result.evaluations_to_best,
                peaks_found=result.peaks_found,
                peaks_before_best=result.peaks_before_best,
                first_peak_evaluation=result.first_peak_evaluation,
            ))
        logger.debug(f"Instance {idx} bias {bias}: exact log score {exact.log_score:.6f}")
    return idx, rows


def _run_grid(config, experiment):
    logger.info(
        f"{experiment}: {config.instances} instances x {len(config.biases)} biases x "
        f"{len(config.methods)} methods, budget {config.budget}, seed {config.seed}"
    )
    tasks = [(config, idx, experiment) for idx in range(config.instances)]
    results = []
    if config.workers <= 1:
        for done, task in enumerate(tasks, 1):
            results.append(_quality_instance(task))
            _log_progress(done, len(tasks), experiment)
    else:
        results = _map_instances(_quality_instance, tasks, config.workers)

    rows, skipped = [], []
    for idx, instance_rows in sorted(results, key=lambda r: r[0]):
        if instance_rows is None:
            skipped.append(idx)
        else:
            rows.extend(instance_rows)
    if skipped:
        logger.warning(f"{experiment}: skipped {len(skipped)} of {config.instances} instances over the width cap")
    return rows, skipped


def results_frame(rows):
    return pd.DataFrame([asdict(r) for r in rows], columns=CSV_COLUMNS)


def write_results_csv(rows, path):
    frame = results_frame(rows)
    frame["first_peak_evaluation"] = frame["first_peak_evaluation"].astype("Int64")
    frame.to_csv(path, index=False)
    logger.info(f"{len(rows)} result rows written to '{path}'.")


def summarize_quality(rows, methods, biases):
    """Solved counts per (method, bias), in the given method and bias order."""
    records = []
    for name in methods:
        for bias in biases:
            group = [r for r in rows if r.method == name and r.bias == bias]
            records.append(QualityRecord(name, bias, len(group), sum(1 for r in group if r.solved)))
    return records


def run_quality_experiment(config, out=None):
    """
    Exact MAP vs. every selected approximation on each (instance, bias).

    Returns:
        ExperimentReport: QualityRecords in method-major order, per-instance
        InstanceResults and the skip count.
    """
    rows, skipped = _run_grid(config, "quality")
    report = ExperimentReport(
        summarize_quality(rows, config.methods, config.biases),
        rows,
        config.instances,
        len(skipped),
        skipped,
    )
    if out:
        write_results_csv(rows, out)
    return report


def quality_table(records):
    """Methods as rows, biases as columns, solved counts as cells."""
    frame = pd.DataFrame([asdict(r) for r in records])
    table = frame.pivot(index="method", columns="bias", values="solved_correctly")
    methods = list(dict.fromkeys(r.method for r in records))
    return table.reindex(methods)


# ========== Evaluation statistics ==========

def summarize_eval_stats(rows, methods):
    frame = results_frame(rows)
    records = []
    for name in methods:
        group = frame[frame["method"] == name]
        if group.empty:
            continue
        evals = group["evaluations_to_best"].astype(float)
        peaked = group[group["first_peak_evaluation"].notna()]
        fraction = None
        if not peaked.empty:
            fraction = float((peaked["evaluations_to_best"] <= peaked["first_peak_evaluation"].astype(float)).mean())
        records.append(EvalStatsRecord(
            method=name,
            instances=len(group),
            mean=float(evals.mean()),
            stdev=float(evals.std(ddof=0)),
            max=int(evals.max()),
            mean_peaks_before_best=float(group["peaks_before_best"].astype(float).mean()),
            first_peak_fraction=fraction,
        ))
    return records


def run_eval_stats(config, bias=0.5, out=None):
    """
    Mean, population stdev and max of evaluations_to_best per method at one bias,
    initialisation evaluations included.
    """
    config = replace(config, biases=(bias,))
    rows, skipped = _run_grid(config, "evalstats")
    report = ExperimentReport(summarize_eval_stats(rows, config.methods), rows, config.instances, len(skipped), skipped)
    if out:
        write_results_csv(rows, out)
    return report


def eval_stats_table(records):
    frame = pd.DataFrame([asdict(r) for r in records])
    return frame.set_index("method")


# ========== One-shot solving ==========

@dataclass
class SolveReport:
    net: object
    map_vars: tuple
    evidence: Assignment
    method: str
    solution: object
    search: object = None

    def lines(self):
        net = self.net
        out = [f"method: {self.method}"]
        out.append("assignment: " + ", ".join(f"{k}={v}" for k, v in net.describe(self.solution.assignment).items()))
        out.append(f"score: {self.solution.score:.12g}")
        out.append(f"log_score: {self.solution.log_score:.12g}")
        if self.search is not None:
            out.append(f"evaluations_used: {self.search.evaluations_used}")
            out.append(f"evaluations_to_best: {self.search.evaluations_to_best}")
            out.append(f"peaks_found: {self.search.peaks_found}")
        return out


def _resolve_variable(net, key):
    if isinstance(key, int) or (isinstance(key, str) and key.isdigit() and key not in net.names):
        var = int(key)
        if not 0 <= var < net.n:
            raise AssignmentError(f"unknown variable id {var}")
        return var
    return net.index_of(key)


def solve(path, map_vars=None, evidence=None, method="Seq-Taboo", budget=DEFAULT_BUDGET, seed=0, width_cap=WIDTH_CAP):
    """
    Solves one MAP query over a network or instance file.

    Args:
        path (str): Network or instance document.
        map_vars (list): Variable names (or ids); defaults to the instance metadata.
        evidence (dict): name -> value index; defaults to the instance metadata.
        method (str): "exact" or an approximation such as "Seq-Taboo" or "MPE".

    Raises:
        WidthCapExceeded: exact mode over a constrained width above `width_cap`.
        ZeroProbabilityEvidence: Pr(e) = 0.
    """
    net, metadata = load_instance(path)
    names = map_vars if map_vars is not None else metadata.get("map_variables")
    if names is None:
        raise ConfigError("no MAP variables given and the file does not name any")
    S = tuple(sorted({_resolve_variable(net, v) for v in names}))
    spec = evidence if evidence is not None else metadata.get("evidence", {})
    e = Assignment({_resolve_variable(net, k): int(v) for k, v in spec.items()})
    net.validate_assignment(e)
    if any(var in e for var in S):
        raise AssignmentError("MAP variables and evidence overlap")

    if method.lower() == "exact":
        order, width = induced_width(net, S)
        if width > width_cap:
            raise WidthCapExceeded(f"constrained width {width} exceeds cap {width_cap}")
        solution = exact_map(net, S, e, order)
        logger.info(f"Exact MAP over {len(S)} variables (constrained width {width}).")
        return SolveReport(net, S, e, "exact", solution)

    init, search = parse_method(method)
    trace = build_trace(net)
    if trace.value(trace.forward(IndicatorSetting.from_assignment(net, e))).mantissa <= 0.0:
        raise ZeroProbabilityEvidence("evidence has probability zero; no MAP exists")
    result = run_search(net, S, e, SearchConfig(search, init, budget, rng_seed=seed), trace)
    logger.info(f"{method}: log score {result.best.log_score:.6f} after {result.evaluations_used} evaluations.")
    return SolveReport(net, S, e, method, result.best, result)
