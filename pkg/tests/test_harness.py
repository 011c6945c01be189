"""Study harness: config, replications, summaries, emission, determinism."""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np
import pytest
import scipy.special
import scipy.stats

from burgerslab.harness import (
    ConfigError,
    ExperimentConfig,
    FailureBudgetExceeded,
    ModelSettings,
    ObservationSettings,
    OutputSettings,
    StudySettings,
    config_template,
    emit_results,
    kolmogorov_survival,
    ks_normality,
    read_records_csv,
    run_replication,
    run_study,
    summarize,
)
from burgerslab.noise import NoisePlan, normal_block


def tiny_config(**study_kw) -> ExperimentConfig:
    study = dict(replications=6, base_seed=7, confidence_levels=(0.9, 0.95),
                 parallelism=1, diagnostics=True)
    study.update(study_kw)
    return ExperimentConfig(
        model=ModelSettings(
            theta_true=1.0, horizon=0.05, n_modes=16, n_grid=24, dt=1e-3,
            transport_coefficient=0.5, f_family="none",
        ),
        observation=ObservationSettings(x0=0.5, kernel="bump", deltas=(0.2, 0.1), dt_obs=1e-3),
        study=StudySettings(**study),
        outputs=OutputSettings(out_dir="unused", format="csv"),
    )


def test_kolmogorov_survival_against_scipy():
    for lam in (0.2, 0.5, 1.0, 1.5, 2.5):
        assert kolmogorov_survival(lam) == pytest.approx(
            float(scipy.special.kolmogorov(lam)), abs=1e-12
        )
    assert kolmogorov_survival(0.0) == 1.0


def test_ks_statistic_matches_scipy():
    plan = NoisePlan(seed=55, replication_id=0, n_modes=1, n_steps=500, dt=1.0)
    values = normal_block(plan)[:, 0]
    stat, pval = ks_normality(values)
    ref = scipy.stats.kstest(values, "norm", mode="asymp")
    assert stat == pytest.approx(ref.statistic, abs=1e-12)
    assert pval == pytest.approx(ref.pvalue, abs=1e-8)


def test_ks_constant_sample():
    stat, pval = ks_normality(np.zeros(50))
    assert stat >= 0.5
    assert pval < 1e-6


def test_ks_shifted_sample_separation():
    # the limiting statistic for a shift of 3 is 1 - 2 Phi(-3/2) ~ 0.866
    plan = NoisePlan(seed=56, replication_id=0, n_modes=1, n_steps=10_000, dt=1.0)
    values = normal_block(plan)[:, 0] + 3.0
    stat, pval = ks_normality(values)
    assert stat == pytest.approx(0.8664, abs=0.02)
    assert pval < 1e-10


def test_ks_level_meta_test():
    rejections = 0
    for trial in range(100):
        plan = NoisePlan(seed=900, replication_id=trial, n_modes=1, n_steps=10_000, dt=1.0)
        _, pval = ks_normality(normal_block(plan)[:, 0])
        if pval < 0.01:
            rejections += 1
    assert rejections <= 5


def test_ks_needs_enough_values():
    with pytest.raises(ValueError):
        ks_normality(np.zeros(10))


def test_config_template_round_trip(tmp_path):
    path = tmp_path / "experiment.ini"
    path.write_text(config_template())
    cfg = ExperimentConfig.from_file(path)
    assert cfg == ExperimentConfig()
    assert cfg.hash() == ExperimentConfig().hash()


def test_config_validation_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[observation]\ndeltas = 0.9\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(bad)  # bump support cannot fit delta = 0.9
    bad.write_text("[model]\ndt = nope\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "missing.ini")
    cfg = dataclasses.replace(
        tiny_config(), observation=ObservationSettings(deltas=(0.2,), dt_obs=1.5e-3)
    )
    with pytest.raises(ConfigError):
        cfg.validate()


def test_config_hash_changes_with_content():
    a = tiny_config()
    b = dataclasses.replace(a, model=dataclasses.replace(a.model, theta_true=2.0))
    assert a.hash() != b.hash()
    assert a.hash() == tiny_config().hash()


def test_run_replication_deterministic_and_linear_diagnostics():
    cfg = tiny_config()
    first = run_replication(cfg, 0.2, 3)
    second = run_replication(cfg, 0.2, 3)
    assert first == second
    linear = dataclasses.replace(
        cfg, model=dataclasses.replace(cfg.model, transport_coefficient=0.0)
    )
    rec = run_replication(linear, 0.2, 0)
    assert rec.drift_bias == 0.0


def test_run_study_sorted_and_consistent_with_single_runs():
    cfg = tiny_config(replications=4)
    summary, records = run_study(cfg)
    keys = [(r.delta, r.replication_id) for r in records]
    assert keys == sorted(keys)
    assert len(records) == 8
    lone = run_replication(cfg, 0.1, 2)
    match = next(r for r in records if r.delta == 0.1 and r.replication_id == 2)
    assert lone == match
    assert summary.failure_fraction == 0.0
    assert set(summary.per_delta) == {0.2, 0.1}


def test_run_study_scheduling_invariance():
    cfg = tiny_config(replications=4)
    s1, r1 = run_study(cfg, parallelism=1)
    s2, r2 = run_study(cfg, parallelism=2)
    assert r1 == r2
    assert json.dumps(s1.canonical_dict(), sort_keys=True) == json.dumps(
        s2.canonical_dict(), sort_keys=True
    )


def test_run_study_resumability(tmp_path):
    cfg = tiny_config(replications=5)
    summary, records = run_study(cfg)
    paths = emit_results(summary, records, cfg, out_dir=tmp_path)
    loaded = read_records_csv(paths["records"], cfg)
    partial = [r for r in loaded if r.replication_id < 2]
    resumed_summary, resumed = run_study(cfg, existing_records=partial)
    assert resumed == records
    assert json.dumps(resumed_summary.canonical_dict()) == json.dumps(summary.canonical_dict())
    # fully complete input: nothing recomputed, identical output
    full_summary, full = run_study(cfg, existing_records=loaded)
    assert full == records
    assert json.dumps(full_summary.canonical_dict()) == json.dumps(summary.canonical_dict())


def test_emit_round_trip_reproduces_statistics(tmp_path):
    cfg = tiny_config(replications=6)
    summary, records = run_study(cfg)
    paths = emit_results(summary, records, cfg, out_dir=tmp_path)
    loaded = read_records_csv(paths["records"], cfg)
    recomputed = summarize(loaded, cfg, wall_time_s=0.0)
    for delta, entry in summary.per_delta.items():
        again = recomputed.per_delta[delta]
        for field_name in (
            "mean_theta_hat", "bias", "rmse", "err_variance", "variance_ratio",
            "ks_stat", "ks_pvalue", "mean_fisher_info",
        ):
            a = getattr(entry, field_name)
            b = getattr(again, field_name)
            if isinstance(a, float) and math.isnan(a):
                assert math.isnan(b)
            else:
                assert b == pytest.approx(a, abs=1e-9)
        assert again.coverage == entry.coverage
    # summary json written with the config hash
    payload = json.loads(paths["summary"].read_text())
    assert payload["config_hash"] == cfg.hash()
    # plot data files are present and well formed
    rate_lines = paths["rate"].read_text().strip().splitlines()
    assert rate_lines[0] == "delta,rmse"
    assert len(rate_lines) == 3
    hist_lines = paths["histogram"].read_text().strip().splitlines()
    assert hist_lines[0] == "delta,bin_lo,bin_hi,count,density,normal_density"


def test_emit_empty_records_warns(tmp_path):
    cfg = tiny_config(replications=1)
    summary = summarize([], cfg, wall_time_s=0.0)
    with pytest.warns(UserWarning):
        paths = emit_results(summary, [], cfg, out_dir=tmp_path)
    assert paths["records"].read_text().startswith("replication_id,")


def test_emit_json_records(tmp_path):
    cfg = dataclasses.replace(
        tiny_config(replications=2), outputs=OutputSettings(out_dir="x", format="json")
    )
    summary, records = run_study(cfg)
    paths = emit_results(summary, records, cfg, out_dir=tmp_path)
    payload = json.loads(paths["records"].read_text())
    assert len(payload) == 4
    assert {"replication_id", "delta", "theta_hat"} <= set(payload[0])


def test_failure_budget_exceeded():
    cfg = tiny_config(replications=3)
    doomed = dataclasses.replace(
        cfg, model=dataclasses.replace(cfg.model, magnitude_cap=1e-12)
    )
    with pytest.raises(FailureBudgetExceeded) as info:
        run_study(doomed)
    assert info.value.summary.failure_fraction == 1.0
    assert all(r.blow_up for r in info.value.records)


def test_blow_up_recorded_not_fatal():
    # a single blown replication among many stays under the budget
    cfg = tiny_config(replications=3)
    summary, records = run_study(cfg)
    assert summary.per_delta[0.2].blow_ups == 0
