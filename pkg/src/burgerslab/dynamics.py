"""Drift nonlinearities and the spectral Galerkin exponential-Euler time stepper.

The state evolves mode-wise by

    u_n+ = exp(-theta lam_n dt) u_n + phi1(theta lam_n dt) dt * drift_n + noise_n

with phi1(z) = (1 - exp(-z))/z, the drift being the Galerkin projection of
a * d/dx(u^2) + F(u), and the noise term carrying the exact per-mode variance
of the linear flow. With zero drift the scheme reproduces the exact sampling
of the stochastic convolution pathwise (shared draws).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as _fft

from .noise import NoisePlan, normal_block, transition_arrays
from .spectral import (
    GridField,
    ResolutionError,
    SpectralField,
    eigenvalues,
    synthesize,
)

__all__ = [
    "NonlinearitySpec",
    "SolverConfig",
    "Trajectory",
    "unit_envelope",
    "validate_nonlinearity",
    "burgers_drift",
    "f_drift",
    "step",
    "simulate",
    "moment_diagnostic",
    "dump_trajectory",
]

_FAMILIES = (None, "nonlocal1", "nonlocal2", "nemytskii")


def unit_envelope(r):
    """Constant envelope g = 1 (bounded, Lipschitz, nonnegative)."""
    return np.ones_like(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class NonlinearitySpec:
    """Declarative drift description: transport coefficient and reaction family.

    ``a`` multiplies the quadratic transport term a * d/dx(u^2). The reaction
    family is one of:

    * ``None`` -- no reaction term;
    * ``"nonlocal1"`` -- F(u)(x) = f1(||u||) * f2(u(x)), f1 bounded and locally
      Lipschitz, f2 globally Lipschitz;
    * ``"nonlocal2"`` -- F(u)(x) = g(||u||) * h(x) with bounded h;
    * ``"nemytskii"`` -- F(u)(x) = f(u(x)); without an explicit ``f`` the
      built-in family f(x) = -c0 * x |x|^eta * g(|x|^(1-eta)) is used.
    """

    a: float = 0.0
    family: str | None = None
    f1: Callable | None = None
    f2: Callable | None = None
    g: Callable | None = None
    h: Callable | None = None
    f: Callable | None = None
    eta: float = 1.0
    c0: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown nonlinearity family {self.family!r}")
        if self.family == "nonlocal1" and (self.f1 is None or self.f2 is None):
            raise ValueError("nonlocal1 requires f1 and f2")
        if self.family == "nonlocal2" and (self.g is None or self.h is None):
            raise ValueError("nonlocal2 requires g and h")
        if self.family == "nemytskii":
            if not 0.0 <= self.eta <= 1.0:
                raise ValueError("eta must lie in [0, 1]")
            if self.c0 < 0.0:
                raise ValueError("c0 must be nonnegative")

    @classmethod
    def linear(cls) -> "NonlinearitySpec":
        return cls(a=0.0, family=None)

    @classmethod
    def burgers(cls, a: float = 0.5) -> "NonlinearitySpec":
        return cls(a=a, family=None)

    @classmethod
    def nemytskii_power(
        cls,
        a: float = 0.5,
        eta: float = 1.0,
        c0: float = 1.0,
        g: Callable | None = None,
        f: Callable | None = None,
    ) -> "NonlinearitySpec":
        return cls(a=a, family="nemytskii", eta=eta, c0=c0, g=g, f=f)

    @classmethod
    def nonlocal_product(cls, f1: Callable, f2: Callable, a: float = 0.5) -> "NonlinearitySpec":
        return cls(a=a, family="nonlocal1", f1=f1, f2=f2)

    @classmethod
    def nonlocal_profile(cls, g: Callable, h: Callable, a: float = 0.5) -> "NonlinearitySpec":
        return cls(a=a, family="nonlocal2", g=g, h=h)

    @property
    def has_reaction(self) -> bool:
        return self.family is not None

    @property
    def is_trivial(self) -> bool:
        return self.a == 0.0 and self.family is None

    def reaction_values(self, values: np.ndarray, points: np.ndarray, l2_norm: float) -> np.ndarray:
        """Pointwise values of F(u) on the grid given |u| data."""
        if self.family is None:
            return np.zeros_like(values)
        if self.family == "nonlocal1":
            return float(self.f1(l2_norm)) * np.asarray(self.f2(values), dtype=float)
        if self.family == "nonlocal2":
            return float(self.g(l2_norm)) * np.asarray(self.h(points), dtype=float)
        if self.f is not None:
            return np.asarray(self.f(values), dtype=float)
        envelope = self.g if self.g is not None else unit_envelope
        absv = np.abs(values)
        return -self.c0 * values * absv**self.eta * np.asarray(
            envelope(absv ** (1.0 - self.eta)), dtype=float
        )


def validate_nonlinearity(
    spec: NonlinearitySpec, radius: float = 8.0, n_samples: int = 321
) -> list[str]:
    """Finite-sampling probes of the family hypotheses on [-radius, radius].

    Returns a list of violation messages (empty when all probes pass). Sampling
    cannot prove the global conditions; it flags nonfinite values and exploding
    bound constants.
    """
    issues: list[str] = []
    xs = np.linspace(-radius, radius, n_samples)
    rs = np.linspace(0.0, radius, n_samples)
    huge = 1e8

    def lipschitz_ratio(fn, pts):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            vals = np.asarray(fn(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            return np.inf, vals
        num = np.abs(np.diff(vals))
        den = np.diff(pts)
        return float(np.max(num / den)), vals

    if spec.family == "nonlocal1":
        ratio1, vals1 = lipschitz_ratio(spec.f1, rs)
        if not np.all(np.isfinite(vals1)) or np.max(np.abs(vals1)) > huge:
            issues.append("f1 is not bounded on the probed range")
        if ratio1 > huge:
            issues.append("f1 fails the local Lipschitz probe")
        ratio2, vals2 = lipschitz_ratio(spec.f2, xs)
        if not np.all(np.isfinite(vals2)):
            issues.append("f2 takes nonfinite values")
        if ratio2 > huge:
            issues.append("f2 fails the Lipschitz probe")
    elif spec.family == "nonlocal2":
        ratio_g, vals_g = lipschitz_ratio(spec.g, rs)
        if not np.all(np.isfinite(vals_g)) or np.max(np.abs(vals_g)) > huge:
            issues.append("g is not bounded on the probed range")
        if ratio_g > huge:
            issues.append("g fails the local Lipschitz probe")
        pts = np.linspace(0.0, 1.0, n_samples)[1:-1]
        vals_h = np.asarray(spec.h(pts), dtype=float)
        if not np.all(np.isfinite(vals_h)):
            issues.append("h takes nonfinite values on (0, 1)")
    elif spec.family == "nemytskii":
        fvals = spec.reaction_values(xs, xs, 0.0)
        if not np.all(np.isfinite(fvals)):
            issues.append("f takes nonfinite values")
        else:
            growth = np.max(np.abs(fvals) / (1.0 + xs**2))
            if growth > huge:
                issues.append("f violates the quadratic growth probe")
            dx = xs[1] - xs[0]
            deriv = np.gradient(fvals, dx)
            if np.max(np.abs(deriv) / (1.0 + np.abs(xs))) > huge:
                issues.append("f' violates the linear growth probe")
            # one-sided condition f(x+y) y <= C (1 + y^2 + |x|^q), probed at q = 4
            xg, yg = np.meshgrid(xs[:: max(1, n_samples // 40)], xs[:: max(1, n_samples // 40)])
            fxy = spec.reaction_values(xg + yg, xg, 0.0)
            bound = np.max(fxy * yg / (1.0 + yg**2 + np.abs(xg) ** 4))
            if bound > huge:
                issues.append("f violates the one-sided growth probe")
    return issues


def _dealias_floor(n_modes: int) -> int:
    return int(np.ceil(1.5 * n_modes))


def _transport_coeffs(values2d: np.ndarray, a: float, n_modes: int) -> np.ndarray:
    """Galerkin coefficients of a * d/dx(u^2) from grid values of u (batched).

    Squares pointwise, runs the endpoint-padded cosine analysis and reads off
    d_n = -a sqrt(2) n pi S_n / (M + 1) where S_n is the discrete cosine sum.
    Exact for bandlimited u whenever M + 1 > 3N/2 (quadratic aliasing falls
    above the retained band).
    """
    squared = values2d * values2d
    m = squared.shape[-1]
    padded = np.zeros(squared.shape[:-1] + (m + 2,))
    padded[..., 1:-1] = squared
    cos_sums = 0.5 * _fft.dct(padded, type=1, axis=-1)[..., 1 : n_modes + 1]
    n = np.arange(1, n_modes + 1, dtype=float)
    return -a * np.sqrt(2.0) * np.pi * n * cos_sums / (m + 1)


def _grid_points(m: int) -> np.ndarray:
    return np.arange(1, m + 1, dtype=float) / (m + 1)


def _drift_coeffs(
    coeffs2d: np.ndarray,
    spec: NonlinearitySpec,
    n_grid: int,
    *,
    grid_values: np.ndarray | None = None,
) -> np.ndarray:
    """Full drift projection a * d/dx(u^2) + F(u) for a batch of states."""
    n_modes = coeffs2d.shape[-1]
    values = synthesize(coeffs2d, n_grid) if grid_values is None else grid_values
    out = np.zeros_like(coeffs2d)
    if spec.a != 0.0:
        out += _transport_coeffs(values, spec.a, n_modes)
    if spec.has_reaction:
        points = _grid_points(n_grid)
        if spec.family == "nemytskii":
            reaction = spec.reaction_values(values, points, 0.0)  # norm unused
        else:
            l2 = np.atleast_1d(np.sqrt(np.sum(coeffs2d**2, axis=-1)))
            scale = np.array([_nonlocal_scale(spec, float(r)) for r in l2])
            profile = (
                np.asarray(spec.f2(values), dtype=float)
                if spec.family == "nonlocal1"
                else np.broadcast_to(
                    np.asarray(spec.h(points), dtype=float), values.shape
                )
            )
            if coeffs2d.ndim == 1:
                reaction = scale[0] * profile
            else:
                reaction = scale[:, None] * profile
        out += _fft.dst(reaction, type=1, axis=-1)[..., :n_modes] / (
            np.sqrt(2.0) * (n_grid + 1)
        )
    return out


def _nonlocal_scale(spec: NonlinearitySpec, l2_norm: float) -> float:
    fn = spec.f1 if spec.family == "nonlocal1" else spec.g
    return float(fn(l2_norm))


def burgers_drift(u: SpectralField, a: float, n_grid: int, dealias: bool = True) -> SpectralField:
    """Galerkin projection of the quadratic transport term a * d/dx(u^2)."""
    n = u.n_modes
    if n_grid < n:
        raise ResolutionError(f"grid {n_grid} cannot resolve {n} modes")
    if dealias and n_grid < _dealias_floor(n):
        raise ResolutionError(
            f"dealiased quadratic term needs at least {_dealias_floor(n)} grid points, got {n_grid}"
        )
    if a == 0.0:
        return SpectralField.zero(n)
    values = synthesize(u.coeffs, n_grid)
    return SpectralField(_transport_coeffs(values, a, n))


def f_drift(u: SpectralField, spec: NonlinearitySpec, n_grid: int) -> SpectralField:
    """Galerkin projection of the reaction term F(u) (grid evaluation + analysis)."""
    n = u.n_modes
    if n_grid < n:
        raise ResolutionError(f"grid {n_grid} cannot resolve {n} modes")
    if not spec.has_reaction:
        return SpectralField.zero(n)
    reaction_only = NonlinearitySpec(
        a=0.0,
        family=spec.family,
        f1=spec.f1,
        f2=spec.f2,
        g=spec.g,
        h=spec.h,
        f=spec.f,
        eta=spec.eta,
        c0=spec.c0,
    )
    return SpectralField(_drift_coeffs(u.coeffs, reaction_only, n_grid))


@dataclass(frozen=True)
class SolverConfig:
    """Everything needed to advance one trajectory of the full dynamics."""

    theta_true: float
    horizon: float
    n_modes: int
    n_grid: int
    dt: float
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec.linear)
    initial_condition: SpectralField | None = None
    noise_on: bool = True
    dealias: bool = True
    magnitude_cap: float = 1e8

    def __post_init__(self):
        if self.theta_true <= 0 or self.horizon <= 0 or self.dt <= 0:
            raise ValueError("theta_true, horizon and dt must be positive")
        if self.dt > self.horizon:
            raise ValueError("dt must not exceed the horizon")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
            raise ValueError("horizon must be an integer multiple of dt")
        if self.n_grid < self.n_modes:
            raise ResolutionError("n_grid must be at least n_modes")
        if (
            self.dealias
            and self.nonlinearity.a != 0.0
            and self.n_grid < _dealias_floor(self.n_modes)
        ):
            raise ResolutionError(
                f"dealiased quadratic term needs n_grid >= {_dealias_floor(self.n_modes)}"
            )
        if self.initial_condition is not None and self.initial_condition.n_modes != self.n_modes:
            raise ValueError("initial condition mode count must match n_modes")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def plan(self, seed: int, replication_id: int = 0) -> NoisePlan:
        return NoisePlan(
            seed=seed,
            replication_id=replication_id,
            n_modes=self.n_modes,
            n_steps=self.n_steps,
            dt=self.dt,
        )


@dataclass(frozen=True)
class Trajectory:
    """Recorded states of one trajectory on the stored time grid.

    ``states[j]`` holds the coefficients at ``times[j]``; when a blow-up is
    flagged, entries from the offending step onward are NaN and
    ``blow_up_step`` gives the first bad solver step.
    """

    times: np.ndarray
    states: np.ndarray
    config: SolverConfig
    linear_states: np.ndarray | None = None
    blow_up: bool = False
    blow_up_step: int | None = None
    drift_projections: np.ndarray | None = None
    sup_l4: float | None = None

    def field_at(self, index: int) -> SpectralField:
        return SpectralField(self.states[index])

    @property
    def store_stride(self) -> int:
        if self.times.size < 2:
            return 1
        return int(round((self.times[1] - self.times[0]) / self.config.dt))


def _phi1_dt(theta: float, lam: np.ndarray, dt: float) -> np.ndarray:
    z = theta * lam * dt
    return dt * np.where(z > 0.0, -np.expm1(-z) / np.where(z > 0.0, z, 1.0), 1.0)


def step(state: SpectralField, cfg: SolverConfig, plan: NoisePlan, k: int) -> SpectralField:
    """One exponential-Euler step from time k*dt using the plan's draws for step k."""
    lam = eigenvalues(cfg.n_modes)
    decay, noise_std = transition_arrays(cfg.theta_true, lam, cfg.dt)
    u = state.coeffs
    if cfg.nonlinearity.is_trivial:
        new = decay * u
    else:
        drift = _drift_coeffs(u, cfg.nonlinearity, cfg.n_grid)
        new = decay * u + _phi1_dt(cfg.theta_true, lam, cfg.dt) * drift
    if cfg.noise_on:
        from .noise import normal_at

        z = np.array([normal_at(plan, n, k) for n in range(1, cfg.n_modes + 1)])
        new = new + noise_std * z
    return SpectralField(new)


def simulate(
    cfg: SolverConfig,
    plan: NoisePlan,
    with_linear_part: bool = False,
    *,
    drift_probes: np.ndarray | None = None,
    track_l4: bool = False,
    store_stride: int = 1,
) -> Trajectory:
    """Iterate the stepper over the full horizon.

    ``with_linear_part`` co-evolves the zero-drift dynamics with identical
    draws so the pathwise splitting X - Xbar is available downstream.
    ``drift_probes`` (Q x N) records the drift's inner products with Q spectral
    test vectors at every stored time. ``store_stride`` thins the stored states
    (blow-up detection still runs every step).
    """
    if plan.n_modes != cfg.n_modes or plan.n_steps != cfg.n_steps or plan.dt != cfg.dt:
        raise ValueError("noise plan does not match the solver configuration")
    n_steps = cfg.n_steps
    if store_stride < 1 or n_steps % store_stride != 0:
        raise ValueError("store_stride must divide the step count")

    lam = eigenvalues(cfg.n_modes)
    decay, noise_std = transition_arrays(cfg.theta_true, lam, cfg.dt)
    phi1dt = _phi1_dt(cfg.theta_true, lam, cfg.dt)
    nonlinear = not cfg.nonlinearity.is_trivial
    draws = normal_block(plan) if cfg.noise_on else None

    u = np.zeros(cfg.n_modes) if cfg.initial_condition is None else cfg.initial_condition.coeffs.copy()
    n_stored = n_steps // store_stride + 1
    states = np.full((n_stored, cfg.n_modes), np.nan)
    states[0] = u
    linear = None
    ubar = None
    if with_linear_part:
        linear = np.full((n_stored, cfg.n_modes), np.nan)
        linear[0] = 0.0
        ubar = np.zeros(cfg.n_modes)
    projections = None
    if drift_probes is not None:
        drift_probes = np.atleast_2d(np.asarray(drift_probes, dtype=float))
        projections = np.zeros((drift_probes.shape[0], n_stored))

    h4 = 1.0 / (cfg.n_grid + 1)
    sup_l4 = None
    if track_l4:
        g0 = synthesize(u, cfg.n_grid)
        sup_l4 = (h4 * np.sum(g0**4)) ** 0.25

    blow_up = False
    blow_up_step = None
    for k in range(n_steps):
        if nonlinear:
            grid_vals = synthesize(u, cfg.n_grid)
            drift = _drift_coeffs(u, cfg.nonlinearity, cfg.n_grid, grid_values=grid_vals)
            if projections is not None and k % store_stride == 0:
                # row-wise dots keep each projection independent of how many
                # probes ride along (fixed summation kernel per row)
                for q in range(drift_probes.shape[0]):
                    projections[q, k // store_stride] = drift_probes[q] @ drift
            new_u = decay * u + phi1dt * drift
        else:
            new_u = decay * u
        if cfg.noise_on:
            new_u = new_u + noise_std * draws[k]
            if with_linear_part:
                ubar = decay * ubar + noise_std * draws[k]
        elif with_linear_part:
            ubar = decay * ubar

        if not np.all(np.isfinite(new_u)) or np.sqrt(np.sum(new_u**2)) > cfg.magnitude_cap:
            blow_up = True
            blow_up_step = k + 1
            break
        u = new_u
        if track_l4:
            gv = synthesize(u, cfg.n_grid)
            sup_l4 = max(sup_l4, (h4 * np.sum(gv**4)) ** 0.25)
        if (k + 1) % store_stride == 0:
            j = (k + 1) // store_stride
            states[j] = u
            if with_linear_part:
                linear[j] = ubar

    if not blow_up and projections is not None:
        if nonlinear:
            final_drift = _drift_coeffs(u, cfg.nonlinearity, cfg.n_grid)
            for q in range(drift_probes.shape[0]):
                projections[q, -1] = drift_probes[q] @ final_drift
    times = cfg.dt * store_stride * np.arange(n_stored)
    return Trajectory(
        times=times,
        states=states,
        config=cfg,
        linear_states=linear,
        blow_up=blow_up,
        blow_up_step=blow_up_step,
        drift_projections=projections,
        sup_l4=None if sup_l4 is None else float(sup_l4),
    )


def moment_diagnostic(trajectories, k: int) -> float:
    """Empirical mean over replications of sup_t ||X(t)||_{L^4}^k."""
    if k < 1:
        raise ValueError("moment order must be >= 1")
    trajectories = list(trajectories)
    if not trajectories:
        return 0.0
    values = []
    for traj in trajectories:
        if traj.sup_l4 is not None:
            values.append(traj.sup_l4**k)
            continue
        m = traj.config.n_grid
        h = 1.0 / (m + 1)
        sup = 0.0
        chunk = max(1, 2_000_000 // max(m, 1))
        for start in range(0, traj.states.shape[0], chunk):
            grid = synthesize(traj.states[start : start + chunk], m)
            norms = (h * np.sum(grid**4, axis=-1)) ** 0.25
            sup = max(sup, float(np.max(norms)))
        values.append(sup**k)
    return float(np.mean(values))


def dump_trajectory(traj: Trajectory, path, fmt: str = "csv", seed: int | None = None) -> None:
    """Write (t_k, coefficients) rows for debugging; csv or npz."""
    cfg = traj.config
    if fmt == "npz":
        np.savez_compressed(
            path,
            times=traj.times,
            states=traj.states,
            n_modes=cfg.n_modes,
            dt=cfg.dt,
            theta=cfg.theta_true,
            seed=-1 if seed is None else seed,
        )
        return
    if fmt != "csv":
        raise ValueError(f"unknown dump format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n_modes={cfg.n_modes} dt={cfg.dt!r} theta={cfg.theta_true!r}")
        fh.write(f" seed={'' if seed is None else seed}\n")
        fh.write("t," + ",".join(f"c{n}" for n in range(1, cfg.n_modes + 1)) + "\n")
        for t, row in zip(traj.times, traj.states):
            fh.write(format(t, ".17g") + "," + ",".join(format(v, ".17g") for v in row) + "\n")
