"""Kernel windows, resolution scaling, and the scalar observables."""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from scipy.integrate import quad

from burgerslab.dynamics import NonlinearitySpec, SolverConfig, simulate
from burgerslab.observation import (
    SupportError,
    bump_kernel,
    kernel_coefficients,
    kernel_report,
    make_kernel,
    observe,
    scale_kernel,
    scaling_identity_check,
)
from burgerslab.spectral import SpectralField, eigenvalues


def narrow_bump(width: float = 0.2):
    """Bump window rescaled to [-width, width], via the public factory."""
    base = bump_kernel(0.5)

    def ad(x):
        return base.antiderivative(np.asarray(x, dtype=float) / width)

    def k(x):
        return base.kernel(np.asarray(x, dtype=float) / width) / width

    def kp(x):
        return base.kernel_derivative(np.asarray(x, dtype=float) / width) / width**2

    return make_kernel(ad, x0=0.5, support=(-width, width), kernel=k, kernel_derivative=kp)


def gauss_legendre_sq_integral(fn, lo, hi, n=4000):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    return 0.5 * (hi - lo) * float(np.sum(weights * np.asarray(fn(x)) ** 2))


def test_bump_values():
    spec = bump_kernel(0.5)
    assert spec.antiderivative(np.array([0.0]))[0] == pytest.approx(math.exp(-10.0), rel=1e-13)
    assert spec.kernel(np.array([0.0]))[0] == 0.0
    for edge in (-1.0, 1.0, -1.2, 1.2):
        assert spec.antiderivative(np.array([edge]))[0] == 0.0
        assert spec.kernel(np.array([edge]))[0] == 0.0


def test_bump_analytic_derivatives_match_finite_differences():
    spec = bump_kernel(0.5)
    x = np.linspace(-0.95, 0.95, 101)
    h = 1e-5

    def fd(fn, pts):
        return (
            -np.asarray(fn(pts + 2 * h)) + 8 * np.asarray(fn(pts + h))
            - 8 * np.asarray(fn(pts - h)) + np.asarray(fn(pts - 2 * h))
        ) / (12 * h)

    assert np.max(np.abs(spec.kernel(x) - fd(spec.antiderivative, x))) < 1e-10
    assert np.max(np.abs(spec.kernel_derivative(x) - fd(spec.kernel, x))) < 1e-8
    assert np.max(np.abs(spec.kernel_second_derivative(x) - fd(spec.kernel_derivative, x))) < 1e-6


def test_bump_norms_against_independent_quadrature():
    spec = bump_kernel(0.5)
    oracle_k = math.sqrt(gauss_legendre_sq_integral(spec.kernel, -1, 1))
    oracle_kp = math.sqrt(gauss_legendre_sq_integral(spec.kernel_derivative, -1, 1))
    assert spec.norm_K == pytest.approx(oracle_k, rel=1e-10)
    assert spec.norm_Kprime == pytest.approx(oracle_kp, rel=1e-10)
    assert spec.norm_K > 0 and spec.norm_Kprime > 0


def test_numerical_differentiation_fallback():
    derived = make_kernel(bump_kernel(0.5).antiderivative, x0=0.5, support=(-1.0, 1.0))
    reference = bump_kernel(0.5)
    assert derived.norm_K == pytest.approx(reference.norm_K, rel=1e-7)
    assert derived.norm_Kprime == pytest.approx(reference.norm_Kprime, rel=1e-5)


def test_max_scale_and_support_guard():
    spec = bump_kernel(0.5)
    assert spec.max_scale == pytest.approx(0.5)
    assert spec.fits(0.49)
    assert not spec.fits(0.5)
    with pytest.raises(SupportError):
        kernel_coefficients(spec, 0.5, 8)
    off_center = bump_kernel(0.25)
    assert off_center.max_scale == pytest.approx(0.25)


def test_scale_kernel_parseval_tail():
    spec = bump_kernel(0.5)
    for delta in (0.1, 0.05):
        k = kernel_coefficients(spec, delta, 512)
        assert abs(spec.norm_K**2 - float(np.sum(k**2))) < 1e-10


def test_scale_kernel_identity_at_unit_scale():
    spec = narrow_bump(0.2)
    k = kernel_coefficients(spec, 1.0, 32)
    # independent oracle: plain adaptive quadrature of K(x - x0) e_n(x)
    for n in (1, 2, 7, 20):
        val, _ = quad(
            lambda x: float(np.atleast_1d(spec.kernel(x - 0.5))[0])
            * math.sqrt(2.0) * math.sin(n * math.pi * x),
            0.3, 0.7, epsabs=1e-13, epsrel=1e-11, limit=300,
        )
        assert k[n - 1] == pytest.approx(val, abs=1e-10)


def test_scale_kernel_laplacian_relation_and_cross_check():
    spec = bump_kernel(0.5)
    delta = 0.1
    n_modes = 64
    k = scale_kernel(spec, delta, n_modes, which="kernel").coeffs
    klap = scale_kernel(spec, delta, n_modes, which="laplacian").coeffs
    lam = eigenvalues(n_modes)
    assert np.array_equal(klap, -lam * k)
    # direct quadrature of the second derivative of the scaled window
    amp = delta ** (-2.5) * math.sqrt(2.0)
    for n in (1, 2, 8, 32):
        val, _ = quad(
            lambda x: amp * float(np.atleast_1d(spec.kernel_second_derivative((x - 0.5) / delta))[0]),
            0.5 - delta, 0.5 + delta,
            weight="sin", wvar=n * math.pi, epsabs=1e-10, epsrel=1e-9, limit=400,
        )
        assert klap[n - 1] == pytest.approx(val, abs=1e-6)


def test_observe_zero_and_frozen_single_mode():
    cfg = SolverConfig(
        theta_true=1.0, horizon=0.01, n_modes=8, n_grid=16, dt=1e-3, noise_on=False
    )
    zero_traj = simulate(cfg, cfg.plan(seed=0))
    spec = bump_kernel(0.5)
    obs = observe(zero_traj, spec, 0.2)
    assert np.all(obs.values == 0.0) and np.all(obs.laplacian_values == 0.0)

    frozen = dataclasses.replace(
        zero_traj, states=np.tile(SpectralField.mode(1, 8).coeffs, (zero_traj.times.size, 1))
    )
    obs = observe(frozen, spec, 0.2)
    k1 = kernel_coefficients(spec, 0.2, 8)[0]
    assert np.allclose(obs.values, k1, rtol=1e-12)
    assert np.allclose(obs.laplacian_values, -math.pi**2 * k1, rtol=1e-12)


def test_observe_is_linear_in_states():
    cfg = SolverConfig(theta_true=1.0, horizon=0.01, n_modes=8, n_grid=16, dt=1e-3)
    t1 = simulate(cfg, cfg.plan(seed=1))
    t2 = simulate(cfg, cfg.plan(seed=2))
    spec = bump_kernel(0.5)
    combined = dataclasses.replace(t1, states=2.0 * t1.states - 3.0 * t2.states)
    obs = observe(combined, spec, 0.2)
    o1 = observe(t1, spec, 0.2)
    o2 = observe(t2, spec, 0.2)
    assert np.allclose(obs.values, 2 * o1.values - 3 * o2.values, atol=1e-14)
    assert np.allclose(
        obs.laplacian_values, 2 * o1.laplacian_values - 3 * o2.laplacian_values, atol=1e-11
    )


def test_observe_stride_and_errors():
    cfg = SolverConfig(theta_true=1.0, horizon=0.02, n_modes=4, n_grid=8, dt=1e-3)
    traj = simulate(cfg, cfg.plan(seed=3))
    spec = bump_kernel(0.5)
    full = observe(traj, spec, 0.2)
    coarse = observe(traj, spec, 0.2, dt_obs=4e-3)
    assert coarse.times.size == 6
    assert np.array_equal(coarse.values, full.values[::4])
    with pytest.raises(ValueError):
        observe(traj, spec, 0.2, dt_obs=1.5e-3)
    with pytest.raises(ValueError):
        observe(traj, spec, 0.2, dt_obs=3e-3)  # 20 steps not divisible by 3


def test_observation_variance_matches_mode_sum():
    theta, dt, n_steps, n_modes, delta = 1.0, 0.01, 32, 8, 0.3
    spec = bump_kernel(0.5)
    k = kernel_coefficients(spec, delta, n_modes)
    n_reps = 2000
    finals = np.empty(n_reps)
    cfg = SolverConfig(theta_true=theta, horizon=n_steps * dt, n_modes=n_modes, n_grid=16, dt=dt)
    for rep in range(n_reps):
        traj = simulate(cfg, cfg.plan(seed=606, replication_id=rep), store_stride=n_steps)
        finals[rep] = traj.states[-1] @ k
    t = n_steps * dt
    lam = eigenvalues(n_modes)
    expected = float(np.sum(k**2 * (1.0 - np.exp(-2 * theta * lam * t)) / (2 * theta * lam)))
    assert np.var(finals) == pytest.approx(expected, rel=0.10)


def test_scaling_identity_residuals():
    spec = bump_kernel(0.5)
    # analytic second derivative: pure rounding noise
    assert scaling_identity_check(
        spec.antiderivative, 0.4, x0=0.5, d2z=spec.kernel_derivative
    ) < 1e-6
    # stencil route stays within evaluation error
    assert scaling_identity_check(spec.antiderivative, 0.4, x0=0.5) < 1e-6


def test_scaling_identity_exact_at_unit_scale():
    spec = narrow_bump(0.2)
    res = scaling_identity_check(spec.antiderivative, 1.0, x0=0.5, support=spec.support)
    assert res == 0.0


def test_scaling_identity_translation_invariance():
    spec = bump_kernel(0.5)
    residuals = [
        scaling_identity_check(spec.antiderivative, 0.3, x0=x0) for x0 in (0.35, 0.5, 0.65)
    ]
    assert all(r < 1e-8 for r in residuals)


def test_scaling_identity_support_guard():
    spec = bump_kernel(0.5)
    with pytest.raises(SupportError):
        scaling_identity_check(spec.antiderivative, 0.6, x0=0.5)


def test_kernel_report_contents():
    spec = bump_kernel(0.5)
    report = kernel_report(spec, 256, (0.1, 0.05, 0.6))
    checks = report["assumption_checks"]
    assert checks["kernel_matches_antiderivative"]
    assert checks["compact_support"]
    assert checks["norms_positive"]
    assert report["per_delta"][0.1]["support_fits"]
    assert abs(report["per_delta"][0.1]["parseval_tail"]) < 1e-8
    assert not report["per_delta"][0.6]["support_fits"]
