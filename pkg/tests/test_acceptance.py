"""Acceptance suite: one test per criterion, summarised by conftest.

Analytic criteria run on both example systems. The sweep criteria share one
module-scoped sweep (both examples, T = 125 ... 4000, 10 runs each), which
dominates the runtime of the whole test session.
"""

import os
import time

import numpy as np
import pytest

from lqr_ac import harness
from lqr_ac import model as lqr
from lqr_ac.checks import analytic_f, bellman_residual, fd_gradient_error, fisher_identity_error, fixed_point_residuals
from lqr_ac.numerics import spectral_radius, symmetrize
from lqr_ac.sampler import RngStream, conditional_f_hat, make_env, rollout_burnin

MODELS = {"example1": lqr.example_1(), "example2": lqr.example_2()}
REFERENCE_MAXIMA = {
    "example1": (0.524, 0.529, 0.586, 0.329, 2.641),
    "example2": (0.662, 0.662, 0.867, 0.498, 4.254),
}
SWEEP_T = [125, 250, 500, 1000, 2000, 4000]


def stable_gains(model, n, seed):
    return lqr.random_stable_gains(model, n, np.random.default_rng(seed))


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# --- analytic ----------------------------------------------------------------------

@pytest.mark.criterion(1, "fixed-point residuals of D_K, P_K, Sigma_K, theta_K <= 1e-10")
def test_fixed_point_residuals(detail):
    with Timer() as t:
        worst = max(fixed_point_residuals(m, lqr.stationary_operators(m, K))
                    for m in MODELS.values() for K in stable_gains(m, 20, 1))
    detail(f"worst={worst:.1e}, {t.elapsed:.2f}s")
    assert worst <= 1e-10
    assert t.elapsed < 1.0


@pytest.mark.criterion(2, "Riccati residual < 1e-12, ||G_K*|| < 1e-8, rho(A-BK*) < 1")
def test_riccati(detail):
    with Timer() as t:
        stats = []
        for m in MODELS.values():
            P, K = lqr.solve_riccati(m)
            stats.append((lqr.riccati_residual(m, P), np.linalg.norm(lqr.natural_grad_G(m, K)),
                          spectral_radius(m.A - m.B @ K)))
    res, g, rho = (max(col) for col in zip(*stats))
    detail(f"residual={res:.1e}, |G|={g:.1e}, rho={rho:.3f}, {t.elapsed:.2f}s")
    assert res < 1e-12 and g < 1e-8 and rho < 1.0
    assert t.elapsed < 1.0


@pytest.mark.criterion(3, "grad J matches central differences (h=1e-5) to 1e-4 relative")
def test_gradient_finite_differences(detail):
    with Timer() as t:
        worst = max(fd_gradient_error(m, K, h=1e-5) for m in MODELS.values() for K in stable_gains(m, 20, 3))
    detail(f"worst={worst:.1e}, {t.elapsed:.2f}s")
    assert worst <= 1e-4
    assert t.elapsed < 1.0


@pytest.mark.criterion(4, "sigma^2 F(K) vec(G_K) = vec(G_K D_K) to 1e-9 relative")
def test_fisher_identity(detail):
    with Timer() as t:
        worst = max(fisher_identity_error(m, lqr.stationary_operators(m, K))
                    for m in MODELS.values() for K in stable_gains(m, 20, 4))
    detail(f"worst={worst:.1e}, {t.elapsed:.2f}s")
    assert worst <= 1e-9
    assert t.elapsed < 1.0


@pytest.mark.criterion(5, "Bellman residual of the exact Q-function <= 1e-9")
def test_bellman_residual(detail):
    rng = np.random.default_rng(5)
    with Timer() as t:
        worst = 0.0
        for m in MODELS.values():
            _, K = lqr.solve_riccati(m)
            ops = lqr.stationary_operators(m, K)
            for _ in range(100):
                x, u = 2 * rng.standard_normal(m.d), 2 * rng.standard_normal(m.k)
                worst = max(worst, abs(bellman_residual(m, ops, x, u)))
    detail(f"worst={worst:.1e}, {t.elapsed:.2f}s")
    assert worst <= 1e-9
    assert t.elapsed < 1.0


@pytest.mark.criterion(6, "gradient-dominance sandwich at 50 stable gains per model")
def test_gradient_dominance(detail):
    with Timer() as t:
        violations, tightest = 0, np.inf
        for m in MODELS.values():
            _, K_star = lqr.solve_riccati(m)
            ops_star = lqr.stationary_operators(m, K_star)
            for K in stable_gains(m, 50, 6):
                b = lqr.gradient_dominance_check(m, K, ops_star=ops_star)
                violations += not b.holds(slack=0.0)
                tightest = min(tightest, b.gap - b.lower, b.upper - b.gap)
    detail(f"violations={violations}, min margin={tightest:.2e}, {t.elapsed:.2f}s")
    assert violations == 0
    assert t.elapsed < 1.0


@pytest.mark.criterion(7, "exact critic gradient vanishes at theta_K; Hessian form positive")
def test_critic_stationarity_and_curvature(detail):
    rng = np.random.default_rng(7)
    with Timer() as t:
        grad_worst, curv_min = 0.0, np.inf
        for m in MODELS.values():
            n = m.d + m.k
            for K in stable_gains(m, 5, 7):
                ops = lqr.stationary_operators(m, K)
                grad_worst = max(grad_worst, np.linalg.norm(lqr.critic_grad_exact(m, K, ops.theta_K, ops)))
                for _ in range(100):
                    M = symmetrize(rng.standard_normal((n, n)))
                    curv_min = min(curv_min, lqr.critic_hessian_quadratic(m, K, M / np.linalg.norm(M), ops))
    detail(f"|grad|={grad_worst:.1e}, min curvature={curv_min:.2e}, {t.elapsed:.2f}s")
    assert grad_worst <= 1e-9
    assert curv_min > 0.0
    assert t.elapsed < 1.0


# --- statistical -------------------------------------------------------------------------

def _mean_and_se(chunks):
    s1 = sum(c.sum(axis=0) for c in chunks)
    s2 = sum((c**2).sum(axis=0) for c in chunks)
    n = sum(c.shape[0] for c in chunks)
    mean = s1 / n
    return mean, np.sqrt(np.maximum(s2 / n - mean**2, 0.0) / n)


@pytest.mark.criterion(8, "conditional f-hat unbiased within 4 SE at 10 pinned pairs (1e5 draws)")
def test_estimator_unbiasedness(detail):
    draws, chunk, N1 = 100_000, 25_000, 10
    rng = np.random.default_rng(8)
    with Timer() as t:
        worst = 0.0
        for m in MODELS.values():
            env = make_env(m)
            _, K = lqr.solve_riccati(m)
            ops = lqr.stationary_operators(m, K)
            n = m.d + m.k
            theta = ops.theta_K + 0.1 * symmetrize(rng.standard_normal((n, n)))
            for pair in range(10):
                x, u = rng.standard_normal(m.d), rng.standard_normal(m.k)
                xs, us = np.tile(x, (chunk, 1)), np.tile(u, (chunk, 1))
                samples = [conditional_f_hat(env, K, theta, xs, us, N1, RngStream(8, (pair, c)))
                           for c in range(draws // chunk)]
                mean, se = _mean_and_se(samples)
                exact = analytic_f(m, ops, theta, np.concatenate([x, u]))
                worst = max(worst, float(np.max(np.abs(mean - exact) / se)))
    detail(f"worst z={worst:.2f}, {t.elapsed:.1f}s")
    assert worst <= 4.0
    assert t.elapsed < 30.0


@pytest.mark.criterion(9, "full gradient with N0=200 matches the exact gradient within 4 SE + burn-in bias")
def test_full_gradient_bias(detail):
    """Each draw is one burned-in trajectory; a mini-batch gradient is an average of these."""
    m = lqr.example_1()
    env = make_env(m)
    rng = np.random.default_rng(9)
    (K,) = stable_gains(m, 1, 9)
    ops = lqr.stationary_operators(m, K)
    theta = ops.theta_K + 0.2 * symmetrize(rng.standard_normal((5, 5)))
    draws, chunk, N0, N1 = 100_000, 10_000, 200, 100
    with Timer() as t:
        samples = []
        for c in range(draws // chunk):
            stream = RngStream(9, (c,))
            x, u = rollout_burnin(env, K, N0, stream.child(0), n_traj=chunk)
            samples.append(conditional_f_hat(env, K, theta, x, u, N1, stream.child(1)))
        mean, se = _mean_and_se(samples)
    exact = lqr.critic_grad_exact(m, K, theta, ops)
    bias = np.linalg.norm(lqr.burnin_bias(m, K, theta, N0, ops))
    z = np.abs(mean - exact) / se
    detail(f"worst z={z.max():.2f}, bias bound={bias:.1e}, {t.elapsed:.1f}s")
    assert np.all(np.abs(mean - exact) <= 4 * se + bias)
    assert t.elapsed < 60.0


# --- sweep reproduction ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def sweeps(tmp_path_factory):
    threads = max(1, len(os.sched_getaffinity(0)))
    out = {}
    for name, m in MODELS.items():
        spec = harness.ExperimentSpec(model=m, t_list=SWEEP_T, runs_per_t=10,
                                      seed=2024 if name == "example1" else 2025)
        out[name] = harness.run_sweep(spec, out_dir=tmp_path_factory.mktemp(name), threads=threads)
    return out


@pytest.mark.slow
@pytest.mark.criterion(10, "log-log slopes of final critic error and actor gap in -1.0 +- 0.15")
def test_convergence_slopes(sweeps, detail):
    slopes = {f"{name}/{curve}": getattr(res, f"slope_{curve}")
              for name, res in sweeps.items() for curve in ("critic", "actor")}
    detail(", ".join(f"{k}={v:.3f}" for k, v in slopes.items()))
    for res in sweeps.values():
        assert all(res.completed[T] == 10 for T in SWEEP_T)
    for value in slopes.values():
        assert abs(value + 1.0) <= 0.15


@pytest.mark.slow
@pytest.mark.criterion(11, "monitored-norm maxima within 15% of reference values (soft; hard bound 30%)")
def test_monitor_maxima(sweeps, detail):
    notes, hard = [], []
    for name, res in sweeps.items():
        found = res.maxima()
        for (key, value), ref in zip(found.items(), REFERENCE_MAXIMA[name]):
            rel = value / ref - 1.0
            if abs(rel) > 0.15:
                notes.append(f"{name}.{key} {value:.3f} vs {ref} ({rel:+.0%})")
            if abs(rel) > 0.30:
                hard.append(notes[-1])
    detail("all within 15%" if not notes else "soft misses: " + "; ".join(notes))
    assert not hard


@pytest.mark.slow
@pytest.mark.criterion(12, "per-T mean final errors decrease monotonically from T=125 to T=4000")
def test_learning_curve_shape(sweeps, detail):
    bad = []
    for name, res in sweeps.items():
        for curve in ("critic", "actor"):
            means = [getattr(res, f"mean_{curve}")[T] for T in SWEEP_T]
            if not all(b < a for a, b in zip(means, means[1:])):
                bad.append(f"{name}/{curve}: " + ", ".join(f"{v:.2e}" for v in means))
    detail("monotone" if not bad else "; ".join(bad))
    assert not bad
