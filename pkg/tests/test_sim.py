import csv
import json
import math

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from wfdr import ConfigurationError, GroupSpec, MixtureModel, WeightScheme, generate_batch
from wfdr.sim import (
    CSV_COLUMNS,
    ExperimentConfig,
    ReplicationError,
    Sweep,
    builtin_configs,
    get_builtin,
    load_config,
    replication_seeds,
    run_experiment,
    run_replication,
    write_outputs,
)


def small_config(**kw):
    base = dict(name="small", model=MixtureModel.single(300, 0.2, 2.5), procedures=("dd", "az", "bh95"),
                reps=4, master_seed=3, sweep=Sweep("model.groups.*.non_null.mean", (2.0, 3.0)))
    base.update(kw)
    return ExperimentConfig(**base)


class TestRunExperiment:
    def test_single_row(self):
        cfg = small_config(reps=1, procedures=("dd",), sweep=None)
        summary = run_experiment(cfg, threads=1)
        assert len(summary.rows) == 1
        assert summary.rows[0].metrics.reps == 1

    def test_one_row_per_pair(self):
        summary = run_experiment(small_config(), threads=1)
        keys = [(r.sweep_value, r.procedure) for r in summary.rows]
        assert len(keys) == len(set(keys)) == 6

    def test_deterministic(self):
        cfg = small_config()
        a = run_experiment(cfg, threads=1).to_records()
        assert a == run_experiment(cfg, threads=1).to_records()

    def test_worker_processes_match_serial(self):
        cfg = small_config()
        assert run_experiment(cfg, threads=2).to_records() == run_experiment(cfg, threads=1).to_records()

    def test_seed_changes_results(self):
        a = run_experiment(small_config(), threads=1).to_records()
        b = run_experiment(small_config(master_seed=4), threads=1).to_records()
        assert a != b

    def test_paired_batches(self):
        cfg = small_config(sweep=None, reps=1)
        out = run_replication(cfg, 0, 0)
        batch_seed, _ = replication_seeds(cfg.master_seed, 0, 0)
        batch = generate_batch(cfg.model, cfg.weights, batch_seed)
        total_non_null = int(batch.theta.sum())
        for metrics, _ in out.values():
            assert metrics.true_positives <= total_non_null
        # unit weights make dd and az identical, which only holds if both saw the same batch
        assert out["dd"][0].rejects == out["az"][0].rejects

    def test_estimation_failure_carries_context(self):
        model = MixtureModel((GroupSpec(300, 0.2), GroupSpec(10, 0.2)))
        cfg = small_config(model=model, sweep=Sweep("alpha", (0.1, 0.2)))
        with pytest.raises(ReplicationError) as info:
            run_experiment(cfg, threads=1)
        assert info.value.sweep_value == 0.1
        assert info.value.rep == 0
        assert "alpha=0.1" in str(info.value)

    def test_top_k_columns(self):
        cfg = small_config(top_k=(10, 50), weights=WeightScheme("covariate-power", {"exponent": 0.5}))
        recs = run_experiment(cfg, threads=1).to_records()
        assert all(0 <= r["top10_tp"] <= 10 and 0 <= r["top50_tp"] <= 50 for r in recs)


class TestConfig:
    def test_round_trip(self):
        for cfg in builtin_configs():
            assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    def test_load_json(self, tmp_path):
        cfg = small_config()
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert load_config(path) == cfg

    @pytest.mark.parametrize("text", ["{", "[]", '{"model": {"groups": []}}'])
    def test_load_bad(self, tmp_path, text):
        path = tmp_path / "c.json"
        path.write_text(text)
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "none.json")

    @pytest.mark.parametrize("kw", [
        {"procedures": ("dd", "magic")},
        {"procedures": ()},
        {"reps": 0},
        {"lfdr_source": "guess"},
        {"lfdr_source": "oracle", "weights": WeightScheme("covariate-power", {"exponent": 0.5})},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            small_config(**kw)

    def test_sweep_wildcard(self):
        cfg = get_builtin("study2").at(2.3)
        assert [g.non_null.mean for g in cfg.model.groups] == [2.3, 2.3]
        assert cfg.sweep is None

    def test_sweep_single_index(self):
        cfg = get_builtin("study4").at(-2.5)
        assert [g.non_null.mean for g in cfg.model.groups] == [-2.5, 2.0]

    def test_bad_sweep_path(self):
        cfg = small_config(sweep=Sweep("model.nothing.here", (1,)))
        with pytest.raises(ConfigurationError):
            cfg.at(1)


class TestBuiltins:
    def test_names_and_reps(self):
        names = [c.name for c in builtin_configs()]
        for n in ("study1", "study2", "study3-mu", "study3-p", "study3-alpha", "study4",
                  "e3-definitions", "e5-informative", "e5-moderate", "e5-anti", "appendixA-demo"):
            assert n in names
        assert all(c.reps == 200 for c in builtin_configs())

    def test_study1(self):
        cfg = get_builtin("study1")
        assert cfg.sweep.values == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
        assert [g.size for g in cfg.model.groups] == [3000, 1500]
        assert cfg.weights.params["ratios"][0] == 3.0

    def test_study2(self):
        cfg = get_builtin("study2")
        assert cfg.weights.params["ratios"] == [3.0, 0.33]
        assert cfg.sweep.values[0] == 1.75 and cfg.sweep.values[-1] == 2.5

    def test_study3_unit_sd(self):
        for name in ("study3-mu", "study3-p", "study3-alpha"):
            cfg = get_builtin(name)
            assert cfg.model.m == 3000
            assert all(g.non_null.sd == 1.0 for g in cfg.model.groups)
            assert cfg.weights.params["location"] == pytest.approx(math.log(3))

    def test_study4(self):
        cfg = get_builtin("study4")
        assert cfg.model.groups[1].non_null.mean == 2.0
        assert [g.p for g in cfg.model.groups] == [0.2, 0.1]
        assert cfg.weights.params["a"] == [1.0, 3.0]
        assert min(cfg.sweep.values) == -3.75 and max(cfg.sweep.values) == -2.0

    def test_e5_exponents(self):
        assert [get_builtin(f"e5-{k}").weights.params["exponent"] for k in ("informative", "moderate", "anti")] \
            == [0.5, 0.125, -0.125]

    def test_demo(self):
        cfg = get_builtin("appendixA-demo")
        assert cfg.lfdr_source == "oracle" and cfg.procedures == ("wpo", "dd") and cfg.model.m == 1000

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            get_builtin("study9")


class TestOutputs:
    def test_csv_and_manifest(self, tmp_path):
        summary = run_experiment(small_config(), threads=1)
        csv_path, man_path = write_outputs(summary, tmp_path, threads=1)
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0])[:len(CSV_COLUMNS)] == list(CSV_COLUMNS)
        assert len(rows) == 6
        assert {r["sweep_param"] for r in rows} == {"model.groups.*.non_null.mean"}
        manifest = json.loads(open(man_path).read())
        assert manifest["master_seed"] == 3
        assert ExperimentConfig.from_dict(manifest["config"]) == summary.config
        assert manifest["version"].startswith("wfdr ")


def test_replication_seeds_independent():
    a, _ = replication_seeds(1, 0, 0)
    b, _ = replication_seeds(1, 0, 1)
    c, _ = replication_seeds(1, 1, 0)
    draws = [np.random.default_rng(s).random(4) for s in (a, b, c)]
    assert not np.array_equal(draws[0], draws[1]) and not np.array_equal(draws[0], draws[2])
    assert_array_equal(np.random.default_rng(replication_seeds(1, 0, 0)[0]).random(4), draws[0])
