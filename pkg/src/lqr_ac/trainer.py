"""Single-timescale actor-critic training loop.

Each iteration draws one stochastic critic gradient at (theta_t, K_t),
takes a critic SGD step, and takes a natural-gradient actor step built from
the *current* critic blocks. The model is consulted only to log exact
diagnostics (critic error, cost gap, norms); updates never see it.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import model as lqr
from .errors import AssumptionViolated, LqrError, NonPositiveConstant
from .numerics import operator_norm, spectral_radius, symmetrize
from .sampler import DEFAULT_GUARD, RngStream, SampleConfig, sample_critic_gradient


@dataclass(frozen=True)
class TrainConfig:
    T: int
    alpha: float
    beta: float
    sample: SampleConfig = field(default_factory=SampleConfig)
    seed: int = 0
    run: int = 0
    stream: Tuple[int, ...] = ()  # RNG path prefix, e.g. (T,) inside a sweep
    warmup_factor: float = 3.0
    warmup_fraction: float = 0.5
    guard_rho: float = 0.999
    state_guard: float = DEFAULT_GUARD

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("step sizes must be positive")
        if self.warmup_factor <= 0 or not 0.0 <= self.warmup_fraction <= 1.0:
            raise ValueError("bad warmup settings")
        if not 0.0 < self.guard_rho < 1.0:
            raise ValueError("guard_rho must lie in (0, 1)")

    @property
    def warmup_steps(self):
        return int(np.floor(self.warmup_fraction * self.T))

    def step_sizes(self, t):
        """(alpha_eff, beta_eff) at iteration t; warmup covers t < floor(fraction * T)."""
        scale = self.warmup_factor if t < self.warmup_steps else 1.0
        return self.alpha * scale, self.beta * scale


@dataclass(frozen=True)
class IterateLog:
    t: int
    critic_err_sq: float
    actor_gap: float
    lyapunov: float
    rho_closed_loop: float
    norm_AmBK: float
    norm_E: float
    norm_K: float
    norm_theta_F: float
    alpha_eff: float
    beta_eff: float

    @property
    def critic_err(self):
        return float(np.sqrt(self.critic_err_sq))


@dataclass
class TrainResult:
    log: List[IterateLog]
    K: np.ndarray
    theta: np.ndarray
    error: Optional[LqrError] = None

    @property
    def ok(self):
        return self.error is None


def critic_step(theta, grad_sample, alpha):
    return symmetrize(np.asarray(theta) - alpha * np.asarray(grad_sample))


def critic_blocks(theta, k):
    """(theta22, theta21): the action-action and action-state blocks."""
    theta = np.asarray(theta)
    d = theta.shape[0] - k
    return theta[d:, d:], theta[d:, :d]


def actor_step(K, theta, beta):
    """K - beta (theta22 K - theta21)."""
    K = np.asarray(K, dtype=float)
    t22, t21 = critic_blocks(theta, K.shape[0])
    return K - beta * (t22 @ K - t21)


def diagnostics(model, K_star_cost, t, theta, K, alpha_eff, beta_eff):
    ops = lqr.stationary_operators(model, K)
    err_sq = float(np.sum((theta - ops.theta_K) ** 2))
    gap = ops.J_K - K_star_cost
    return IterateLog(
        t=t,
        critic_err_sq=err_sq,
        actor_gap=gap,
        lyapunov=err_sq + gap,
        rho_closed_loop=ops.rho,
        norm_AmBK=operator_norm(lqr.closed_loop(model, K)),
        norm_E=operator_norm(ops.E),
        norm_K=operator_norm(K),
        norm_theta_F=float(np.linalg.norm(theta)),
        alpha_eff=alpha_eff,
        beta_eff=beta_eff,
    )


def train(env, oracle, cfg, sink: Optional[Callable[[IterateLog], None]] = None,
          critic="sampled", K_star=None):
    """Run the actor-critic loop from theta_0 = 0, K_0 = 0.

    ``oracle`` is the LqrModel, used only for logging and the stability
    monitor. Row t of the log describes (theta_t, K_t) after t updates,
    t = 1..T. ``critic="exact"`` replaces theta_t by theta_{K_t} before each
    actor step (a test mode that removes critic error).

    If the closed loop reaches ``cfg.guard_rho`` or a state blows up, the
    partial log is returned with ``error`` set.
    """
    if critic not in ("sampled", "exact"):
        raise ValueError(f"unknown critic mode {critic!r}")
    d, k = env.d, env.k
    if K_star is None:
        _, K_star = lqr.solve_riccati(oracle)
    J_star = lqr.cost(oracle, K_star)
    K = np.zeros((k, d))
    theta = np.zeros((d + k, d + k))
    log = []
    stream = RngStream(cfg.seed, tuple(cfg.stream) + (cfg.run,))

    rho = spectral_radius(lqr.closed_loop(oracle, K))
    if rho >= cfg.guard_rho:
        return TrainResult(log, K, theta, AssumptionViolated(0, rho, cfg.guard_rho))

    for t in range(cfg.T):
        alpha_eff, beta_eff = cfg.step_sizes(t)
        if critic == "exact":
            theta_actor = lqr.critic_target(oracle, K)
            theta_next = theta_actor
        else:
            try:
                grad = sample_critic_gradient(env, K, theta, cfg.sample, stream.child(t),
                                              guard=cfg.state_guard)
            except LqrError as exc:
                return TrainResult(log, K, theta, exc)
            theta_actor = theta
            theta_next = critic_step(theta, grad, alpha_eff)
        K = actor_step(K, theta_actor, beta_eff)
        theta = theta_next

        rho = spectral_radius(lqr.closed_loop(oracle, K))
        if rho >= cfg.guard_rho:
            return TrainResult(log, K, theta, AssumptionViolated(t + 1, rho, cfg.guard_rho))
        row = diagnostics(oracle, J_star, t + 1, theta, K, alpha_eff, beta_eff)
        log.append(row)
        if sink is not None:
            sink(row)
    return TrainResult(log, K, theta)


def theoretical_stepsizes(c_L, c3, kappa, sigma_min_Deps, eps):
    """Constant step sizes from the finite-time convergence bound: alpha = kappa * beta.

    The constants are not observable for a given problem; callers supply
    their own estimates.
    """
    for name, val in (("c_L", c_L), ("c3", c3), ("kappa", kappa),
                      ("sigma_min_Deps", sigma_min_Deps), ("eps", eps)):
        if not val > 0:
            raise NonPositiveConstant(f"{name} must be positive, got {val}")
    alpha = sigma_min_Deps * eps / (16.0 * c_L**2 * c3 * kappa)
    return alpha, alpha / kappa
