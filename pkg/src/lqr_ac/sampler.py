"""Model-free data path: policy execution, rollouts, critic-gradient samples.

Nothing here touches the system matrices. The dynamics are reached only
through an :class:`EnvHandle` (a step function and a cost function), which
is the boundary between the learner and the ground truth.

All routines are batched: states have shape (..., d) and actions (..., k),
so N trajectories (and N x N1 next-step draws) advance in one numpy call.
"""

from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np

from .errors import StateBlowup
from .numerics import cholesky

DEFAULT_GUARD = 1e6


@dataclass(frozen=True)
class RngStream:
    """Hierarchically addressed random stream.

    ``RngStream(seed).child(run).child(t)`` always yields the same draws, and
    distinct paths give independent streams (numpy SeedSequence spawn keys).
    """

    seed: int
    path: Tuple[int, ...] = ()

    def child(self, *index):
        return RngStream(self.seed, self.path + tuple(int(i) for i in index))

    def generator(self):
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))


def _as_generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


@dataclass(frozen=True)
class EnvHandle:
    """Opaque environment: ``step(x, u, rng) -> x'`` and ``cost(x, u)``."""

    step: Callable
    cost: Callable
    d: int
    k: int
    sigma: float = field(default=1.0)

    @property
    def dims(self):
        return self.d, self.k


def make_env(model):
    """Wrap an LqrModel as a black-box environment.

    The matrices are captured in closures; callers see only the callables.
    Process noise is drawn as chol(D_xi) @ g with g standard normal.
    """
    A, B, Q, R = (np.array(M) for M in (model.A, model.B, model.Q, model.R))
    L_xi = cholesky(model.D_xi, jitter=1e-12)

    def step(x, u, rng):
        g = rng.standard_normal(np.shape(x))
        return x @ A.T + u @ B.T + g @ L_xi.T

    def stage_cost(x, u):
        return ((x @ Q) * x).sum(axis=-1) + ((u @ R) * u).sum(axis=-1)

    # sigma is the learner's own exploration noise, not a model secret
    return EnvHandle(step=step, cost=stage_cost, d=model.d, k=model.k, sigma=model.sigma)


@dataclass(frozen=True)
class SampleConfig:
    N: int = 100
    N0: int = 100
    N1: int = 100

    def __post_init__(self):
        if self.N < 1 or self.N0 < 0:
            raise ValueError(f"need N >= 1 and N0 >= 0, got N={self.N}, N0={self.N0}")
        if self.N1 < 2:
            raise ValueError(f"N1 must be at least 2 (covariance correction), got {self.N1}")


def sample_action(K, x, sigma, rng):
    """u ~ N(-K x, sigma^2 I), batched over leading axes of x."""
    rng = _as_generator(rng)
    K = np.asarray(K, dtype=float)
    x = np.asarray(x, dtype=float)
    omega = rng.standard_normal(x.shape[:-1] + (K.shape[0],))
    return -x @ K.T + sigma * omega


def rollout_burnin(env, K, N0, rng, n_traj=None, guard=DEFAULT_GUARD):
    """Run N0 steps of pi_K from x_0 = 0 and return (x_N0, u_N0).

    With ``n_traj`` set, that many independent trajectories are simulated
    and the outputs have a leading batch axis.
    """
    rng = _as_generator(rng)
    batch = () if n_traj is None else (n_traj,)
    K = np.asarray(K, dtype=float)
    x = np.zeros(batch + (env.d,))
    # all exploration noise for the trajectory in one draw
    omega = env.sigma * rng.standard_normal((N0 + 1,) + batch + (env.k,))
    u = omega[0]
    for s in range(1, N0 + 1):
        x = env.step(x, u, rng)
        u = omega[s] - x @ K.T
    norm = float(np.max(np.abs(x))) if x.size else 0.0
    if not np.isfinite(norm) or norm > guard:
        raise StateBlowup(norm, guard)
    return x, u


def feature_phi(x, u):
    """z z' with z = [x; u] (batched)."""
    z = np.concatenate([np.asarray(x, dtype=float), np.asarray(u, dtype=float)], axis=-1)
    return z[..., :, None] * z[..., None, :]


def conditional_f_hat(env, K, theta, x, u, N1, rng):
    """One unbiased sample of f(x, u) per leading batch index.

    For each pinned pair (x, u), N1 next-step pairs give psi_j = phi(z'_j) - phi(z).
    The estimator is

        mean_j c(x,u) psi_j
          + [mean_j psi_j <psi_j,theta> - 1/(N1-1) sum_j (psi_j - psibar) <psi_j - psibar, theta>]

    Every term is a weighted sum of the psi_j, so it is accumulated as
    sum_j w_j z'_j z'_j' - (sum_j w_j) z z' without forming N1 matrices.
    """
    rng = _as_generator(rng)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    theta = np.asarray(theta, dtype=float)
    n = x.shape[0]
    xs = np.broadcast_to(x[:, None, :], (n, N1, env.d))
    us = np.broadcast_to(u[:, None, :], (n, N1, env.k))
    x_next = env.step(xs, us, rng)
    u_next = sample_action(K, x_next, env.sigma, rng)
    z = np.concatenate([x, u], axis=-1)
    zn = np.concatenate([x_next, u_next], axis=-1)
    # s_j = <psi_j, theta> = z'_j theta z'_j - z theta z
    q0 = ((z @ theta) * z).sum(axis=-1)
    s = ((zn @ theta) * zn).sum(axis=-1) - q0[:, None]
    s_bar = s.mean(axis=1, keepdims=True)
    c = env.cost(x, u)[:, None]
    w = (c + s) / N1 - (s - s_bar) / (N1 - 1)
    out = np.swapaxes(zn * w[..., None], 1, 2) @ zn
    out -= w.sum(axis=1)[:, None, None] * (z[:, :, None] * z[:, None, :])
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def sample_critic_gradient(env, K, theta, cfg, rng, guard=DEFAULT_GUARD):
    """Average of N burned-in conditional samples: the stochastic critic gradient."""
    rng = _as_generator(rng)
    x, u = rollout_burnin(env, K, cfg.N0, rng, n_traj=cfg.N, guard=guard)
    f = conditional_f_hat(env, K, theta, x, u, cfg.N1, rng)
    g = f.mean(axis=0)
    return 0.5 * (g + g.T)
