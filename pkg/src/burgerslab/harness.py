"""Monte Carlo study harness: config ingestion, parallel replication runs,
statistical summaries, and CSV/JSON emission.

Replications are deterministic in (base seed, replication id, delta) through
counter-based noise streams, and aggregation is sorted, so summaries are
bit-identical for any parallelism degree. One trajectory per replication is
simulated and observed at every requested resolution (the resolution enters
only through the observation kernel).
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import gaussian
from .dynamics import NonlinearitySpec, SolverConfig, Trajectory, simulate
from .estimation import (
    DegenerateObservationError,
    EstimateResult,
    asymptotic_variance,
    confidence_interval,
    error_decomposition,
    estimate,
)
from .observation import KernelSpec, bump_kernel, kernel_coefficients, observe
from .spectral import SpectralField

__all__ = [
    "ConfigError",
    "FailureBudgetExceeded",
    "ModelSettings",
    "ObservationSettings",
    "StudySettings",
    "OutputSettings",
    "ExperimentConfig",
    "ReplicationRecord",
    "DeltaSummary",
    "McSummary",
    "run_replication",
    "run_study",
    "ks_normality",
    "kolmogorov_survival",
    "emit_results",
    "read_records_csv",
    "config_template",
]

RECORD_COLUMNS = (
    "replication_id",
    "delta",
    "theta_hat",
    "fisher_info",
    "ci_lo",
    "ci_hi",
    "normalized_error",
    "blow_up",
    "drift_bias",
    "martingale_part",
    "fisher_info_linear",
)

_KERNELS = {"bump": bump_kernel}
_FAILURE_BUDGET = 0.20


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class FailureBudgetExceeded(RuntimeError):
    """More than the tolerated fraction of replications failed."""

    def __init__(self, message: str, summary: "McSummary", records: list):
        super().__init__(message)
        self.summary = summary
        self.records = records


@dataclass(frozen=True)
class ModelSettings:
    theta_true: float = 1.0
    horizon: float = 1.0
    n_modes: int = 512
    n_grid: int = 1024
    dt: float = 2e-5
    transport_coefficient: float = 0.5
    f_family: str = "none"  # none | nemytskii
    nemytskii_eta: float = 1.0
    nemytskii_scale: float = 1.0
    noise_on: bool = True
    dealias: bool = True
    magnitude_cap: float = 1e8
    initial_condition: tuple[float, ...] = ()

    def nonlinearity(self) -> NonlinearitySpec:
        if self.f_family == "none":
            return NonlinearitySpec(a=self.transport_coefficient, family=None)
        if self.f_family == "nemytskii":
            return NonlinearitySpec.nemytskii_power(
                a=self.transport_coefficient,
                eta=self.nemytskii_eta,
                c0=self.nemytskii_scale,
            )
        raise ConfigError(f"unknown f_family {self.f_family!r}")

    def solver_config(self) -> SolverConfig:
        ic = None
        if self.initial_condition:
            coeffs = np.zeros(self.n_modes)
            coeffs[: len(self.initial_condition)] = self.initial_condition
            ic = SpectralField(coeffs)
        return SolverConfig(
            theta_true=self.theta_true,
            horizon=self.horizon,
            n_modes=self.n_modes,
            n_grid=self.n_grid,
            dt=self.dt,
            nonlinearity=self.nonlinearity(),
            initial_condition=ic,
            noise_on=self.noise_on,
            dealias=self.dealias,
            magnitude_cap=self.magnitude_cap,
        )


@dataclass(frozen=True)
class ObservationSettings:
    x0: float = 0.5
    kernel: str = "bump"
    deltas: tuple[float, ...] = (0.1, 0.05, 0.02)
    dt_obs: float = 2e-5

    def kernel_spec(self) -> KernelSpec:
        try:
            factory = _KERNELS[self.kernel]
        except KeyError:
            raise ConfigError(f"unknown kernel {self.kernel!r}") from None
        return factory(self.x0)


@dataclass(frozen=True)
class StudySettings:
    replications: int = 500
    base_seed: int = 1
    confidence_levels: tuple[float, ...] = (0.9, 0.95)
    parallelism: int = 2
    diagnostics: bool = False


@dataclass(frozen=True)
class OutputSettings:
    out_dir: str = "results"
    format: str = "csv"  # records format: csv | json


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSettings = field(default_factory=ModelSettings)
    observation: ObservationSettings = field(default_factory=ObservationSettings)
    study: StudySettings = field(default_factory=StudySettings)
    outputs: OutputSettings = field(default_factory=OutputSettings)

    def validate(self) -> None:
        if self.study.replications < 1:
            raise ConfigError("need at least one replication")
        if not self.observation.deltas:
            raise ConfigError("need at least one resolution delta")
        kernel = self.observation.kernel_spec()
        for delta in self.observation.deltas:
            if not 0.0 < delta <= 1.0:
                raise ConfigError(f"delta {delta} outside (0, 1]")
            if not kernel.fits(delta):
                raise ConfigError(
                    f"delta {delta} fails the kernel support check "
                    f"(max admissible scale {kernel.max_scale:.4f})"
                )
        for level in self.study.confidence_levels:
            if not 0.0 < level < 1.0:
                raise ConfigError(f"confidence level {level} outside (0, 1)")
        ratio = self.observation.dt_obs / self.model.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ConfigError("dt_obs must be an integer multiple of the solver dt")
        self.model.solver_config()  # surfaces model-level inconsistencies

    def as_dict(self) -> dict:
        return {
            "model": asdict(self.model),
            "observation": asdict(self.observation),
            "study": asdict(self.study),
            "outputs": asdict(self.outputs),
        }

    def hash(self) -> str:
        payload = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")

        def floats(section, key, fallback):
            raw = parser.get(section, key, fallback=None)
            if raw is None:
                return fallback
            return tuple(float(tok) for tok in raw.replace(",", " ").split())

        try:
            model = ModelSettings(
                theta_true=parser.getfloat("model", "theta_true", fallback=1.0),
                horizon=parser.getfloat("model", "horizon", fallback=1.0),
                n_modes=parser.getint("model", "n_modes", fallback=512),
                n_grid=parser.getint("model", "n_grid", fallback=1024),
                dt=parser.getfloat("model", "dt", fallback=2e-5),
                transport_coefficient=parser.getfloat(
                    "model", "transport_coefficient", fallback=0.5
                ),
                f_family=parser.get("model", "f_family", fallback="none"),
                nemytskii_eta=parser.getfloat("model", "nemytskii_eta", fallback=1.0),
                nemytskii_scale=parser.getfloat("model", "nemytskii_scale", fallback=1.0),
                noise_on=parser.getboolean("model", "noise", fallback=True),
                dealias=parser.getboolean("model", "dealias", fallback=True),
                magnitude_cap=parser.getfloat("model", "magnitude_cap", fallback=1e8),
                initial_condition=floats("model", "initial_condition", ()),
            )
            observation = ObservationSettings(
                x0=parser.getfloat("observation", "x0", fallback=0.5),
                kernel=parser.get("observation", "kernel", fallback="bump"),
                deltas=floats("observation", "deltas", (0.1, 0.05, 0.02)),
                dt_obs=parser.getfloat("observation", "dt_obs", fallback=model.dt),
            )
            study = StudySettings(
                replications=parser.getint("study", "replications", fallback=500),
                base_seed=parser.getint("study", "base_seed", fallback=1),
                confidence_levels=floats("study", "confidence_levels", (0.9, 0.95)),
                parallelism=parser.getint("study", "parallelism", fallback=2),
                diagnostics=parser.getboolean("study", "diagnostics", fallback=False),
            )
            outputs = OutputSettings(
                out_dir=parser.get("outputs", "out_dir", fallback="results"),
                format=parser.get("outputs", "format", fallback="csv"),
            )
        except (ValueError, configparser.Error) as exc:
            raise ConfigError(f"bad config value: {exc}") from exc
        cfg = cls(model=model, observation=observation, study=study, outputs=outputs)
        cfg.validate()
        return cfg


def config_template() -> str:
    """Config file template with every default explicit."""
    return """# Monte Carlo study configuration (all defaults written out).

[model]
theta_true = 1.0
horizon = 1.0
n_modes = 512
n_grid = 1024
dt = 2e-5
# coefficient of the quadratic transport term a * d/dx(u^2); 0 disables it
transport_coefficient = 0.5
# reaction family: none | nemytskii  (nemytskii: f(x) = -scale * x|x|^eta * g(|x|^(1-eta)))
f_family = none
nemytskii_eta = 1.0
nemytskii_scale = 1.0
noise = true
dealias = true
magnitude_cap = 1e8
# leading sine coefficients of the initial state; empty = zero field
initial_condition =

[observation]
x0 = 0.5
kernel = bump
deltas = 0.1, 0.05, 0.02
dt_obs = 2e-5

[study]
replications = 500
base_seed = 1
confidence_levels = 0.90, 0.95
parallelism = 2
# per-replication error decomposition diagnostics (costs a co-evolved linear path)
diagnostics = false

[outputs]
out_dir = results
format = csv
"""


@dataclass(frozen=True)
class ReplicationRecord:
    """One (delta, replication) outcome; failed rows keep NaN estimates."""

    replication_id: int
    delta: float
    theta_hat: float
    fisher_info: float
    ci: dict[float, tuple[float, float]]
    normalized_error: float
    blow_up: bool
    failed: bool
    drift_bias: float | None = None
    martingale_part: float | None = None
    fisher_info_linear: float | None = None

    def primary_ci(self, levels: tuple[float, ...]) -> tuple[float, float]:
        if not self.ci:
            return (float("nan"), float("nan"))
        return self.ci[float(levels[0])]


def _failed_record(rep: int, delta: float, blow_up: bool) -> ReplicationRecord:
    nan = float("nan")
    return ReplicationRecord(
        replication_id=rep,
        delta=float(delta),
        theta_hat=nan,
        fisher_info=nan,
        ci={},
        normalized_error=nan,
        blow_up=blow_up,
        failed=True,
    )


def _estimate_one(
    traj: Trajectory,
    cfg: ExperimentConfig,
    kernel: KernelSpec,
    delta: float,
    coeffs: np.ndarray,
    rep: int,
    sigma_sq: float,
    drift_series: np.ndarray | None,
) -> ReplicationRecord:
    if traj.blow_up:
        return _failed_record(rep, delta, blow_up=True)
    obs = observe(traj, kernel, delta, cfg.observation.dt_obs, coefficients=coeffs)
    try:
        result: EstimateResult = estimate(obs, kernel, cfg.study.confidence_levels)
    except DegenerateObservationError:
        return _failed_record(rep, delta, blow_up=False)
    theta_true = cfg.model.theta_true
    normalized = (result.theta_hat - theta_true) / (delta * np.sqrt(sigma_sq))
    diag = None
    if cfg.study.diagnostics:
        diag = error_decomposition(traj, obs, kernel, drift_series=drift_series)
    return ReplicationRecord(
        replication_id=rep,
        delta=float(delta),
        theta_hat=result.theta_hat,
        fisher_info=result.fisher_info,
        ci=result.ci,
        normalized_error=float(normalized),
        blow_up=False,
        failed=False,
        drift_bias=None if diag is None else diag.drift_bias,
        martingale_part=None if diag is None else diag.martingale_part,
        fisher_info_linear=None if diag is None else diag.fisher_info_linear,
    )


def _run_one_replication(
    cfg: ExperimentConfig,
    rep: int,
    kernel: KernelSpec,
    coeff_rows: dict[float, np.ndarray],
) -> list[ReplicationRecord]:
    solver = cfg.model.solver_config()
    plan = solver.plan(cfg.study.base_seed, rep)
    deltas = cfg.observation.deltas
    probes = None
    if cfg.study.diagnostics:
        probes = np.stack([coeff_rows[d] for d in deltas])
    traj = simulate(
        solver,
        plan,
        with_linear_part=cfg.study.diagnostics,
        drift_probes=probes,
    )
    sigma_sq = asymptotic_variance(cfg.model.theta_true, kernel, cfg.model.horizon)
    records = []
    for i, delta in enumerate(deltas):
        series = None
        if traj.drift_projections is not None:
            stride = int(round(cfg.observation.dt_obs / cfg.model.dt))
            series = traj.drift_projections[i][::stride]
        records.append(
            _estimate_one(traj, cfg, kernel, delta, coeff_rows[delta], rep, sigma_sq, series)
        )
    return records


def run_replication(cfg: ExperimentConfig, delta: float, replication_id: int) -> ReplicationRecord:
    """Simulate, observe and estimate one replication at one resolution.

    Deterministic in (base seed, replication id, delta): running it twice
    produces identical records bit for bit.
    """
    kernel = cfg.observation.kernel_spec()
    coeffs = kernel_coefficients(kernel, delta, cfg.model.n_modes)
    sub = ExperimentConfig(
        model=cfg.model,
        observation=ObservationSettings(
            x0=cfg.observation.x0,
            kernel=cfg.observation.kernel,
            deltas=(float(delta),),
            dt_obs=cfg.observation.dt_obs,
        ),
        study=cfg.study,
        outputs=cfg.outputs,
    )
    return _run_one_replication(sub, replication_id, kernel, {float(delta): coeffs})[0]


def _worker(payload) -> list[ReplicationRecord]:
    cfg, rep, coeff_rows = payload
    kernel = cfg.observation.kernel_spec()
    return _run_one_replication(cfg, rep, kernel, coeff_rows)


def kolmogorov_survival(lam: float) -> float:
    """Asymptotic Kolmogorov distribution tail Q(lam) = 2 sum (-1)^(k-1) exp(-2 k^2 lam^2)."""
    if lam <= 0.0:
        return 1.0
    k = np.arange(1, 101, dtype=float)
    total = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k**2 * lam**2))
    return float(min(1.0, max(0.0, total)))


def ks_normality(values) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov statistic and p-value against N(0, 1)."""
    values = np.sort(np.asarray(values, dtype=float))
    n = values.size
    if n < 20:
        raise ValueError("KS normality check needs at least 20 values")
    u = gaussian.cdf(values)
    grid = np.arange(1, n + 1, dtype=float) / n
    d_plus = np.max(grid - u)
    d_minus = np.max(u - (grid - 1.0 / n))
    stat = float(max(d_plus, d_minus))
    return stat, kolmogorov_survival(np.sqrt(n) * stat)


@dataclass(frozen=True)
class DeltaSummary:
    delta: float
    n_ok: int
    blow_ups: int
    failures: int
    mean_theta_hat: float
    bias: float
    rmse: float
    err_variance: float
    target_variance: float
    variance_ratio: float
    ks_stat: float
    ks_pvalue: float
    coverage: dict[float, float]
    mean_fisher_info: float
    mean_abs_normalized_drift_bias: float | None


@dataclass(frozen=True)
class McSummary:
    theta_true: float
    n_replications: int
    base_seed: int
    config_hash: str
    per_delta: dict[float, DeltaSummary]
    failure_fraction: float
    wall_time_s: float

    def canonical_dict(self) -> dict:
        """Deterministic content for bit-identity checks (volatile timing excluded)."""
        out = {
            "theta_true": self.theta_true,
            "n_replications": self.n_replications,
            "base_seed": self.base_seed,
            "config_hash": self.config_hash,
            "failure_fraction": self.failure_fraction,
            "per_delta": {},
        }
        for delta in sorted(self.per_delta):
            entry = asdict(self.per_delta[delta])
            entry["coverage"] = {format(k, ".6g"): v for k, v in sorted(entry["coverage"].items())}
            out["per_delta"][format(delta, ".17g")] = entry
        return out


def _summarize_delta(
    delta: float, records: list[ReplicationRecord], cfg: ExperimentConfig, sigma_sq: float
) -> DeltaSummary:
    ok = [r for r in records if not r.failed]
    blow_ups = sum(1 for r in records if r.blow_up)
    failures = sum(1 for r in records if r.failed)
    theta_true = cfg.model.theta_true
    nan = float("nan")
    if not ok:
        return DeltaSummary(
            delta=delta, n_ok=0, blow_ups=blow_ups, failures=failures,
            mean_theta_hat=nan, bias=nan, rmse=nan, err_variance=nan,
            target_variance=sigma_sq, variance_ratio=nan, ks_stat=nan,
            ks_pvalue=nan, coverage={float(l): nan for l in cfg.study.confidence_levels},
            mean_fisher_info=nan, mean_abs_normalized_drift_bias=None,
        )
    th = np.array([r.theta_hat for r in ok])
    errors = (th - theta_true) / delta
    mean_theta = float(np.mean(th))
    bias = mean_theta - theta_true
    rmse = float(np.sqrt(np.mean((th - theta_true) ** 2)))
    err_variance = float(np.var(errors, ddof=1)) if th.size >= 2 else nan
    ratio = err_variance / sigma_sq if th.size >= 2 else nan
    if th.size >= 20:
        ks_stat, ks_p = ks_normality(errors / np.sqrt(sigma_sq))
    else:
        ks_stat, ks_p = nan, nan
    coverage = {}
    for level in cfg.study.confidence_levels:
        hits = [
            1.0 if r.ci[float(level)][0] <= theta_true <= r.ci[float(level)][1] else 0.0
            for r in ok
        ]
        coverage[float(level)] = float(np.mean(hits))
    drift_norm = None
    if cfg.study.diagnostics:
        vals = [
            abs(r.drift_bias / r.fisher_info) / delta
            for r in ok
            if r.drift_bias is not None and r.fisher_info > 0
        ]
        drift_norm = float(np.mean(vals)) if vals else None
    return DeltaSummary(
        delta=delta,
        n_ok=len(ok),
        blow_ups=blow_ups,
        failures=failures,
        mean_theta_hat=mean_theta,
        bias=float(bias),
        rmse=rmse,
        err_variance=err_variance,
        target_variance=sigma_sq,
        variance_ratio=float(ratio),
        ks_stat=float(ks_stat),
        ks_pvalue=float(ks_p),
        coverage=coverage,
        mean_fisher_info=float(np.mean([r.fisher_info for r in ok])),
        mean_abs_normalized_drift_bias=drift_norm,
    )


def summarize(records: list[ReplicationRecord], cfg: ExperimentConfig, wall_time_s: float) -> McSummary:
    kernel = cfg.observation.kernel_spec()
    sigma_sq = asymptotic_variance(cfg.model.theta_true, kernel, cfg.model.horizon)
    per_delta = {}
    for delta in cfg.observation.deltas:
        subset = sorted(
            (r for r in records if r.delta == float(delta)),
            key=lambda r: r.replication_id,
        )
        per_delta[float(delta)] = _summarize_delta(float(delta), subset, cfg, sigma_sq)
    failures = sum(1 for r in records if r.failed)
    return McSummary(
        theta_true=cfg.model.theta_true,
        n_replications=cfg.study.replications,
        base_seed=cfg.study.base_seed,
        config_hash=cfg.hash(),
        per_delta=per_delta,
        failure_fraction=failures / max(1, len(records)),
        wall_time_s=wall_time_s,
    )


def run_study(
    cfg: ExperimentConfig,
    *,
    existing_records: list[ReplicationRecord] | None = None,
    parallelism: int | None = None,
) -> tuple[McSummary, list[ReplicationRecord]]:
    """Execute the full study; order-independent and resumable.

    Replications already present in ``existing_records`` (all deltas done) are
    skipped; merged output is sorted by (delta, replication_id). Raises
    :class:`FailureBudgetExceeded` when more than 20% of records failed.
    """
    cfg.validate()
    start = time.perf_counter()
    kernel = cfg.observation.kernel_spec()
    coeff_rows = {
        float(d): kernel_coefficients(kernel, float(d), cfg.model.n_modes)
        for d in cfg.observation.deltas
    }

    done: dict[tuple[float, int], ReplicationRecord] = {}
    for rec in existing_records or []:
        done[(rec.delta, rec.replication_id)] = rec
    needed = [
        rep
        for rep in range(cfg.study.replications)
        if any((float(d), rep) not in done for d in cfg.observation.deltas)
    ]

    workers = cfg.study.parallelism if parallelism is None else parallelism
    fresh: list[ReplicationRecord] = []
    if needed:
        if workers > 1:
            payloads = [(cfg, rep, coeff_rows) for rep in needed]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for recs in pool.map(_worker, payloads):
                    fresh.extend(recs)
        else:
            for rep in needed:
                fresh.extend(_run_one_replication(cfg, rep, kernel, coeff_rows))

    merged = dict(done)
    for rec in fresh:
        merged.setdefault((rec.delta, rec.replication_id), rec)
    records = [
        merged[(float(d), rep)]
        for d in sorted(float(x) for x in cfg.observation.deltas)
        for rep in range(cfg.study.replications)
        if (float(d), rep) in merged
    ]
    summary = summarize(records, cfg, wall_time_s=time.perf_counter() - start)
    if summary.failure_fraction > _FAILURE_BUDGET:
        raise FailureBudgetExceeded(
            f"{summary.failure_fraction:.1%} of replications failed "
            f"(budget {_FAILURE_BUDGET:.0%})",
            summary,
            records,
        )
    return summary, records


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and np.isnan(x):
        return ""
    return format(x, ".17g")


def _write_records_csv(path: Path, records: list[ReplicationRecord], levels) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            lo, hi = r.primary_ci(levels)
            writer.writerow(
                [
                    r.replication_id,
                    _fmt(r.delta),
                    _fmt(r.theta_hat),
                    _fmt(r.fisher_info),
                    _fmt(lo),
                    _fmt(hi),
                    _fmt(r.normalized_error),
                    int(r.blow_up),
                    _fmt(r.drift_bias),
                    _fmt(r.martingale_part),
                    _fmt(r.fisher_info_linear),
                ]
            )


def read_records_csv(path, cfg: ExperimentConfig) -> list[ReplicationRecord]:
    """Rebuild records from an emitted CSV (intervals recomputed deterministically)."""
    records = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rep = int(row["replication_id"])
            delta = float(row["delta"])
            if row["theta_hat"] == "":
                records.append(_failed_record(rep, delta, blow_up=bool(int(row["blow_up"]))))
                continue
            theta_hat = float(row["theta_hat"])
            info = float(row["fisher_info"])
            ci = {
                float(level): confidence_interval(theta_hat, info, 1.0 - float(level))
                for level in cfg.study.confidence_levels
            }
            records.append(
                ReplicationRecord(
                    replication_id=rep,
                    delta=delta,
                    theta_hat=theta_hat,
                    fisher_info=info,
                    ci=ci,
                    normalized_error=float(row["normalized_error"]),
                    blow_up=bool(int(row["blow_up"])),
                    failed=False,
                    drift_bias=float(row["drift_bias"]) if row["drift_bias"] else None,
                    martingale_part=(
                        float(row["martingale_part"]) if row["martingale_part"] else None
                    ),
                    fisher_info_linear=(
                        float(row["fisher_info_linear"]) if row["fisher_info_linear"] else None
                    ),
                )
            )
    return records


def emit_results(
    summary: McSummary,
    records: list[ReplicationRecord],
    cfg: ExperimentConfig,
    out_dir=None,
) -> dict[str, Path]:
    """Write records, the JSON summary, and plot-ready rate/histogram tables."""
    out = Path(cfg.outputs.out_dir if out_dir is None else out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not records:
        warnings.warn("emitting results for an empty record set", stacklevel=2)
    paths: dict[str, Path] = {}

    levels = cfg.study.confidence_levels
    if cfg.outputs.format == "json":
        paths["records"] = out / "records.json"
        payload = []
        for r in records:
            lo, hi = r.primary_ci(levels)
            payload.append(
                {
                    "replication_id": r.replication_id,
                    "delta": r.delta,
                    "theta_hat": None if np.isnan(r.theta_hat) else r.theta_hat,
                    "fisher_info": None if np.isnan(r.fisher_info) else r.fisher_info,
                    "ci_lo": None if np.isnan(lo) else lo,
                    "ci_hi": None if np.isnan(hi) else hi,
                    "normalized_error": (
                        None if np.isnan(r.normalized_error) else r.normalized_error
                    ),
                    "blow_up": r.blow_up,
                    "drift_bias": r.drift_bias,
                    "martingale_part": r.martingale_part,
                    "fisher_info_linear": r.fisher_info_linear,
                }
            )
        paths["records"].write_text(json.dumps(payload, indent=1))
    else:
        paths["records"] = out / "records.csv"
        _write_records_csv(paths["records"], records, levels)

    paths["summary"] = out / "summary.json"
    summary_payload = summary.canonical_dict()
    summary_payload["wall_time_s"] = summary.wall_time_s
    paths["summary"].write_text(json.dumps(summary_payload, indent=1))

    paths["rate"] = out / "rate.csv"
    with paths["rate"].open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delta", "rmse"])
        for delta in sorted(summary.per_delta, reverse=True):
            writer.writerow([_fmt(delta), _fmt(summary.per_delta[delta].rmse)])

    paths["histogram"] = out / "histogram.csv"
    edges = np.linspace(-5.0, 5.0, 41)
    with paths["histogram"].open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delta", "bin_lo", "bin_hi", "count", "density", "normal_density"])
        for delta in sorted(summary.per_delta, reverse=True):
            errs = np.array(
                [
                    r.normalized_error
                    for r in records
                    if r.delta == delta and not r.failed
                ]
            )
            counts, _ = np.histogram(errs, bins=edges)
            total = max(1, errs.size)
            for i, c in enumerate(counts):
                mid = 0.5 * (edges[i] + edges[i + 1])
                writer.writerow(
                    [
                        _fmt(delta),
                        _fmt(edges[i]),
                        _fmt(edges[i + 1]),
                        int(c),
                        _fmt(c / (total * (edges[i + 1] - edges[i]))),
                        _fmt(float(np.exp(-0.5 * mid**2) / np.sqrt(2 * np.pi))),
                    ]
                )
    return paths
