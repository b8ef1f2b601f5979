"""Analytic verification suite run by ``lqr-ac check``.

Each check evaluates an identity of the model layer (or a statistical
property of the sampler) on a given LqrModel and reports the worst residual.
"""

from dataclasses import dataclass

import numpy as np

from . import model as lqr
from .numerics import spectral_radius, symmetrize
from .sampler import conditional_f_hat, make_env


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34s} worst={self.value:.3e}  tol={self.tolerance:.1e}"


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(1.0, np.linalg.norm(b)))


def _check(name, value, tol):
    return CheckResult(name, bool(value <= tol), float(value), tol)


def fixed_point_residuals(model, ops):
    F = lqr.closed_loop(model, ops.K)
    K = ops.K
    return max(
        _rel(ops.D_K, model.D_eps + F @ ops.D_K @ F.T),
        _rel(ops.P_K, model.Q + K.T @ model.R @ K + F.T @ ops.P_K @ F),
        _rel(ops.Sigma_K, ops.Sigma_eps + ops.E @ ops.Sigma_K @ ops.E.T),
        _rel(ops.theta_K, model.cost_matrix + ops.E.T @ ops.theta_K @ ops.E),
    )


def fd_gradient_error(model, K, h=1e-5):
    g = lqr.grad_J(model, K)
    fd = np.zeros_like(K)
    for idx in np.ndindex(*K.shape):
        Kp, Km = K.copy(), K.copy()
        Kp[idx] += h
        Km[idx] -= h
        fd[idx] = (lqr.cost(model, Kp) - lqr.cost(model, Km)) / (2 * h)
    return float(np.linalg.norm(fd - g) / np.linalg.norm(g))


def fisher_identity_error(model, ops):
    G = lqr.natural_grad_G(model, ops.K, ops)
    F = lqr.fisher_tensor(model, ops.K, ops)
    lhs = model.sigma**2 * F @ G.reshape(-1)
    rhs = (G @ ops.D_K).reshape(-1)
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300))


def bellman_residual(model, ops, x, u):
    """c(x,u) - J + E[Q(x',u') | x,u] - Q(x,u), with the expectation in closed form."""
    z = np.concatenate([x, u])
    _, q_now = lqr.value_functions(model, ops.K, x, u, ops)
    second_moment = ops.E @ np.outer(z, z) @ ops.E.T + ops.Sigma_eps
    q_next = float(np.sum(ops.theta_K * second_moment)) - lqr.q_offset(model, ops)
    c = float(x @ model.Q @ x + u @ model.R @ u)
    return c - ops.J_K + q_next - q_now


def run_checks(model, seed=0, n_gains=20, n_points=100, mc_draws=20_000):
    """Run every analytic identity; returns a list of CheckResult."""
    rng = np.random.default_rng(seed)
    results = []
    P_star, K_star = lqr.solve_riccati(model)
    ops_star = lqr.stationary_operators(model, K_star)
    gains = lqr.random_stable_gains(model, n_gains, rng, center=K_star)
    ops_list = [lqr.stationary_operators(model, K) for K in gains]

    results.append(_check("fixed-point residuals", max(fixed_point_residuals(model, o) for o in ops_list), 1e-10))
    results.append(_check("E[psi] = 0 under stationarity",
                          max(_rel(o.E @ o.Sigma_K @ o.E.T + o.Sigma_eps - o.Sigma_K, 0 * o.Sigma_K)
                              for o in ops_list), 1e-10))
    results.append(_check("rho(E) = rho(A - BK)",
                          max(abs(spectral_radius(o.E) - o.rho) for o in ops_list), 1e-8))
    results.append(_check("cost = cost_alt",
                          max(abs(lqr.cost_alt(model, K) - o.J_K) / o.J_K for K, o in zip(gains, ops_list)),
                          1e-10))
    results.append(_check("Riccati residual", lqr.riccati_residual(model, P_star), 1e-12))
    results.append(_check("G_K* = 0", float(np.linalg.norm(lqr.natural_grad_G(model, K_star, ops_star))), 1e-8))
    results.append(_check("rho(A - BK*) < 1", ops_star.rho, 1.0 - 1e-12))
    results.append(_check("grad J vs finite differences", max(fd_gradient_error(model, K) for K in gains), 1e-4))
    results.append(_check("Fisher identity", max(fisher_identity_error(model, o) for o in ops_list), 1e-9))

    worst = 0.0
    for o in ops_list[:5]:
        for _ in range(n_points // 5):
            x = 2.0 * rng.standard_normal(model.d)
            u = 2.0 * rng.standard_normal(model.k)
            worst = max(worst, abs(bellman_residual(model, o, x, u)))
    results.append(_check("Bellman residual of exact Q", worst, 1e-9))

    worst = 0.0
    for K in gains:
        b = lqr.gradient_dominance_check(model, K, ops_star=ops_star)
        worst = max(worst, b.lower - b.gap, b.gap - b.upper)
    results.append(_check("gradient-dominance sandwich", worst, 1e-12))

    worst = 0.0
    for (K1, o1), (K2, o2) in zip(zip(gains, ops_list), zip(gains[1:], ops_list[1:])):
        worst = max(worst, abs(lqr.cost_difference(model, K1, K2, o1, o2) - (o1.J_K - o2.J_K)))
    results.append(_check("cost-difference formula", worst, 1e-8))

    results.append(_check("critic gradient at theta_K",
                          max(float(np.linalg.norm(lqr.critic_grad_exact(model, o.K, o.theta_K, o)))
                              for o in ops_list), 1e-9))
    n = model.d + model.k
    worst = np.inf
    for _ in range(100):
        M = symmetrize(rng.standard_normal((n, n)))
        M /= np.linalg.norm(M)
        worst = min(worst, lqr.critic_hessian_quadratic(model, K_star, M, ops_star))
    results.append(CheckResult("critic Hessian min over directions", bool(worst > 0), float(worst), 0.0))

    results.append(_unbiasedness_check(model, ops_star, rng, mc_draws))
    return results


def _unbiasedness_check(model, ops, rng, draws, n_pairs=3, N1=4, z_tol=5.0):
    """Largest |mean - f(x,u)| / stderr over entries of a conditional f-hat sample."""
    env = make_env(model)
    theta = ops.theta_K + 0.1 * symmetrize(rng.standard_normal(ops.theta_K.shape))
    worst = 0.0
    for _ in range(n_pairs):
        x = rng.standard_normal(model.d)
        u = rng.standard_normal(model.k)
        z = np.concatenate([x, u])
        samples = conditional_f_hat(env, ops.K, theta, np.tile(x, (draws, 1)), np.tile(u, (draws, 1)), N1, rng)
        exact = analytic_f(model, ops, theta, z)
        se = samples.std(axis=0, ddof=1) / np.sqrt(draws)
        score = np.abs(samples.mean(axis=0) - exact) / np.maximum(se, 1e-300)
        worst = max(worst, float(score.max()))
    return CheckResult("f-hat conditional unbiasedness (z)", worst <= z_tol, worst, z_tol)


def analytic_f(model, ops, theta, z):
    """f(z) = (c(z) + <psi(z), theta>) psi(z) with psi from the exact transition."""
    psi = ops.E @ np.outer(z, z) @ ops.E.T + ops.Sigma_eps - np.outer(z, z)
    c = float(z @ model.cost_matrix @ z)
    return (c + float(np.sum(psi * theta))) * psi


def precondition_radius(model):
    """rho(A), the closed-loop radius of the initial gain K_0 = 0."""
    return spectral_radius(model.A)

