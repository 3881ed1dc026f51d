import math

import pandas as pd
import pytest

from bayes_net import Assignment
from errors import AssignmentError, ConfigError, WidthCapExceeded, ZeroProbabilityEvidence
from experiments import (
    CSV_COLUMNS, QualityExperimentConfig, WidthExperimentConfig, eval_stats_table, is_solved,
    parse_method, quality_table, run_eval_stats, run_quality_experiment, run_width_experiment,
    solve, width_frame,
)
from network_io import save_instance, save_network
from tests.helpers import build_network

SMALL = dict(instances=4, n=20, param=0.1, budget=30, seed=1)


# --- Method names ---

@pytest.mark.parametrize("name, expected", [
    ("Rand-Hill", ("rand", "hill")),
    ("Seq-Taboo", ("seq", "taboo")),
    ("MPE", ("mpe", "none")),
    ("ml-hill", ("ml", "hill")),
])
def test_parse_method(name, expected):
    assert parse_method(name) == expected


@pytest.mark.parametrize("name", ["Greedy", "MPE-Anneal", "Seq-"])
def test_parse_method_rejects_unknown(name):
    with pytest.raises(ConfigError):
        parse_method(name)


def test_is_solved_uses_relative_tolerance():
    exact = math.log(0.2)
    assert is_solved(exact, exact + math.log1p(-1e-12))
    assert not is_solved(exact, exact + math.log1p(-1e-6))
    assert is_solved(-math.inf, -math.inf)


def test_invalid_experiment_configs():
    with pytest.raises(ConfigError):
        QualityExperimentConfig(methods=("Seq-Dance",))
    with pytest.raises(ConfigError):
        QualityExperimentConfig(biases=(0.7,))
    with pytest.raises(ConfigError):
        QualityExperimentConfig(instances=0)
    with pytest.raises(ConfigError):
        WidthExperimentConfig(generator="edge_prob", params=(2.0,))


# --- Solution quality ---

def test_quality_smoke(tmp_path):
    config = QualityExperimentConfig(biases=(0.0, 0.5), methods=("MPE", "Seq-Taboo", "Rand-Hill"), **SMALL)
    out = tmp_path / "quality.csv"
    report = run_quality_experiment(config, out)

    reported = config.instances - report.skipped
    assert len(report.rows) == reported * 2 * 3
    assert [(r.method, r.bias) for r in report.records] == [
        ("MPE", 0.0), ("MPE", 0.5), ("Seq-Taboo", 0.0), ("Seq-Taboo", 0.5), ("Rand-Hill", 0.0), ("Rand-Hill", 0.5),
    ]
    for record in report.records:
        assert record.instances == reported
        assert 0 <= record.solved_correctly <= record.instances
    for row in report.rows:
        assert row.approx_log_score <= row.exact_log_score + 1e-9
        assert row.evaluations_used <= config.budget
        if row.method == "MPE":
            assert (row.evaluations_used, row.evaluations_to_best) == (1, 1)

    frame = pd.read_csv(out)
    assert list(frame.columns) == CSV_COLUMNS
    assert len(frame) == len(report.rows)
    assert list(quality_table(report.records).index) == ["MPE", "Seq-Taboo", "Rand-Hill"]


def test_quality_is_deterministic(tmp_path):
    config = QualityExperimentConfig(biases=(0.25,), methods=("ML-Hill", "Rand-Taboo"), **SMALL)
    run_quality_experiment(config, tmp_path / "a.csv")
    run_quality_experiment(config, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_worker_pool_matches_serial_run():
    config = QualityExperimentConfig(biases=(0.5,), methods=("Seq-Hill",), **SMALL)
    serial = run_quality_experiment(config)
    pooled = run_quality_experiment(QualityExperimentConfig(
        biases=(0.5,), methods=("Seq-Hill",), workers=2, **SMALL))
    assert pooled.rows == serial.rows


def test_width_cap_skips_and_counts():
    config = QualityExperimentConfig(biases=(0.5,), methods=("MPE",), width_cap=0, instances=3, n=20, param=0.3)
    report = run_quality_experiment(config)
    assert report.skipped == 3
    assert report.skipped_instances == [0, 1, 2]
    assert report.rows == []
    assert report.records[0].instances == 0


def test_budget_zero_random_init_never_searches():
    config = QualityExperimentConfig(biases=(0.5,), methods=("Rand-Hill",), instances=3, n=15, param=0.1, budget=0)
    report = run_quality_experiment(config)
    assert all(row.evaluations_used == 0 and row.peaks_found == 0 for row in report.rows)


# --- Width survey ---

def test_width_survey_buckets(tmp_path):
    config = WidthExperimentConfig(instances=6, n=30, params=(1.0, 4.0), min_roots=5, seed=3)
    out = tmp_path / "widths.csv"
    report = run_width_experiment(config, out)
    assert [r.param for r in report.records] == [1.0, 4.0, None]
    assert [r.instances for r in report.records] == [3, 3, 6]
    for record in report.records:
        assert record.unconstrained.min <= record.unconstrained.max
        assert record.constrained.weighted_average <= record.constrained.max + 1e-9
    assert len(pd.read_csv(out)) == 3
    assert width_frame(report.records)["param"].tolist()[-1] == "all"


def test_edgeless_width_survey():
    config = WidthExperimentConfig(instances=1, generator="edge_prob", n=5, params=(0.0,), min_roots=1)
    pooled = run_width_experiment(config).records[-1]
    assert pooled.unconstrained.max == 0 and pooled.constrained.max == 0


def test_width_survey_demands_enough_roots():
    with pytest.raises(ConfigError):
        WidthExperimentConfig(n=5, min_roots=10)


def _width_gap(report):
    pooled = report.records[-1]
    return pooled.constrained.weighted_average - pooled.unconstrained.weighted_average


def test_constraining_map_roots_widens_orders():
    report = run_width_experiment(WidthExperimentConfig(instances=4, params=(6.0, 10.0), seed=0))
    for sample in report.rows:
        assert sample.unconstrained == sample.param
        assert sample.constrained >= sample.unconstrained
    assert _width_gap(report) >= 5


@pytest.mark.slow
def test_width_gap_at_desk_scale():
    report = run_width_experiment(WidthExperimentConfig(instances=100, seed=0))
    assert _width_gap(report) >= 5


# --- Evaluation statistics ---

def test_eval_stats_of_bare_initialisations():
    config = QualityExperimentConfig(methods=("MPE", "ML", "Seq", "Rand-Hill"), **SMALL)
    report = run_eval_stats(config, bias=0.5)
    stats = {r.method: r for r in report.records}
    for name in ("MPE", "ML"):
        assert (stats[name].mean, stats[name].stdev, stats[name].max) == (1.0, 0.0, 1)
    assert stats["Seq"].first_peak_fraction is None
    assert stats["MPE"].mean_peaks_before_best == 0.0
    assert 0.0 <= stats["Rand-Hill"].mean_peaks_before_best
    for row in report.rows:
        assert 0 <= row.peaks_before_best <= row.peaks_found
    assert stats["Rand-Hill"].max <= config.budget
    assert {row.bias for row in report.rows} == {0.5}
    assert list(eval_stats_table(report.records).index) == ["MPE", "ML", "Seq", "Rand-Hill"]


# --- One-shot solving ---

@pytest.fixture
def chain_file(tmp_path, chain):
    path = tmp_path / "chain.json"
    save_network(path, chain)
    return path


def test_solve_exact(chain_file):
    report = solve(chain_file, ["A"], {"B": 1}, method="exact")
    assert report.solution.assignment == Assignment({0: 1})
    assert report.solution.score == pytest.approx(0.54)
    assert "assignment: A=1" in report.lines()


def test_solve_by_search_is_replayable(chain_file):
    a = solve(chain_file, ["A"], {"B": 1}, method="Rand-Taboo", budget=10, seed=4)
    b = solve(chain_file, ["A"], {"B": 1}, method="Rand-Taboo", budget=10, seed=4)
    assert a.lines() == b.lines()
    assert a.solution.score == pytest.approx(0.54)


def test_solve_uses_instance_metadata(tmp_path, chain):
    path = tmp_path / "instance.json"
    save_instance(path, chain, {"map_variables": ["A"], "evidence": {"B": 1}})
    report = solve(path, method="Seq-Hill")
    assert report.map_vars == (0,)
    assert report.evidence == Assignment({1: 1})


def test_solve_errors(tmp_path, chain_file, fork):
    with pytest.raises(AssignmentError):
        solve(chain_file, ["A", "B"], {"B": 1})
    with pytest.raises(ConfigError):
        solve(chain_file)
    fork_file = tmp_path / "fork.json"
    save_network(fork_file, fork)
    with pytest.raises(WidthCapExceeded):
        solve(fork_file, ["B", "C"], {}, method="exact", width_cap=1)
    impossible = build_network([("A", 2), ("B", 2)], [(0, (), [1.0, 0.0]), (1, (0,), [[1.0, 0.0], [0.0, 1.0]])])
    impossible_file = tmp_path / "impossible.json"
    save_network(impossible_file, impossible)
    with pytest.raises(ZeroProbabilityEvidence):
        solve(impossible_file, ["A"], {"B": 1}, method="Rand-Hill")


# --- Desk-scale trends ---

@pytest.fixture(scope="module")
def desk_quality():
    return run_quality_experiment(QualityExperimentConfig(instances=100, n=50, param=0.05, seed=0))


def _fractions(report):
    return {(r.method, r.bias): r.fraction for r in report.records}


@pytest.mark.slow
def test_seq_taboo_is_reliable(desk_quality):
    fractions = _fractions(desk_quality)
    assert all(fractions[("Seq-Taboo", b)] >= 0.85 for b in (0.0, 0.125, 0.25, 0.375, 0.5))


@pytest.mark.slow
def test_mpe_degrades_with_bias(desk_quality):
    fractions = _fractions(desk_quality)
    assert fractions[("MPE", 0.0)] - fractions[("MPE", 0.5)] >= 0.3


@pytest.mark.slow
def test_taboo_keeps_up_with_hill(desk_quality):
    frame = pd.DataFrame([{"method": r.method, "solved": r.solved_correctly} for r in desk_quality.records])
    totals = frame.groupby("method")["solved"].sum()
    instances = sum(r.instances for r in desk_quality.records if r.method == "Seq-Taboo")
    for init in ("Rand", "ML", "MPE", "Seq"):
        assert totals[f"{init}-Taboo"] >= totals[f"{init}-Hill"] - 0.05 * instances


@pytest.mark.slow
def test_search_beats_bare_initialisation(desk_quality):
    fractions = _fractions(desk_quality)
    for init in ("ML", "MPE", "Seq"):
        for search in ("Hill", "Taboo"):
            assert fractions[(f"{init}-{search}", 0.5)] >= fractions[(init, 0.5)] + 0.05


@pytest.mark.slow
def test_evaluation_statistics_at_desk_scale():
    report = run_eval_stats(QualityExperimentConfig(instances=100, n=50, param=0.05, seed=0), bias=0.5)
    stats = {r.method: r for r in report.records}
    for name in ("MPE", "ML"):
        assert (stats[name].mean, stats[name].stdev, stats[name].max) == (1.0, 0.0, 1)
    assert stats["Rand-Hill"].mean <= 30 and stats["Rand-Hill"].max <= 150
    assert stats["Rand-Hill"].first_peak_fraction >= 0.95

    frame = pd.DataFrame([vars(row) for row in report.rows])
    m = frame[frame["method"] == "Seq"].set_index("instance")["evaluations_to_best"]
    for name in ("Seq-Hill", "Seq-Taboo"):
        extra = frame[frame["method"] == name].set_index("instance")["evaluations_to_best"] - m
        assert 0 <= extra.mean() <= 3
