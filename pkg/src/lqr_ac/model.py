"""Model-based layer: exact quantities for a known LQR instance.

Everything here reads A, B, Q, R and the noise covariance directly, so it is
only ever used as an oracle (tests, diagnostics, error tracking). The
training path goes through :mod:`lqr_ac.sampler` instead.

Shapes: state dimension d, action dimension k, gain K is k x d, critic
parameters are (d+k) x (d+k).
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    AsymmetricTheta,
    InvalidModel,
    RiccatiNonConvergence,
    UnstableClosedLoop,
    UnstableGain,
)
from .numerics import (
    as_matrix,
    is_symmetric,
    min_eig_sym,
    operator_norm,
    solve_kron_linear,
    spectral_radius,
    symmetrize,
)


@dataclass(frozen=True, eq=False)
class LqrModel:
    """x' = A x + B u + xi,  xi ~ N(0, D_xi),  cost x'Qx + u'Ru, policy noise sigma."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    D_xi: np.ndarray
    sigma: float

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        Q = as_matrix(self.Q, "Q")
        R = as_matrix(self.R, "R")
        D_xi = as_matrix(self.D_xi, "D_xi")
        d, k = A.shape[0], B.shape[1]
        if A.shape != (d, d):
            raise InvalidModel(f"A must be square, got {A.shape}")
        if B.shape != (d, k):
            raise InvalidModel(f"B must be {d} x k, got {B.shape}")
        for name, M, n in (("Q", Q, d), ("R", R, k), ("D_xi", D_xi, d)):
            if M.shape != (n, n):
                raise InvalidModel(f"{name} must be {n} x {n}, got {M.shape}")
            if not is_symmetric(M):
                raise InvalidModel(f"{name} must be symmetric")
        sigma = float(self.sigma)
        if not np.isfinite(sigma) or sigma < 0:
            raise InvalidModel(f"sigma must be a nonnegative finite number, got {self.sigma}")
        if min_eig_sym(Q) <= 0:
            raise InvalidModel("Q must be positive definite")
        if min_eig_sym(R) <= 0:
            raise InvalidModel("R must be positive definite")
        if min_eig_sym(D_xi) < -1e-12:
            raise InvalidModel("D_xi must be positive semidefinite")
        D_eps = symmetrize(D_xi + sigma**2 * B @ B.T)
        if min_eig_sym(D_eps) <= 0:
            raise InvalidModel("D_eps = D_xi + sigma^2 B B' must be positive definite")
        for name, M in (("A", A), ("B", B), ("Q", symmetrize(Q)), ("R", symmetrize(R)),
                        ("D_xi", symmetrize(D_xi)), ("D_eps", D_eps)):
            M.flags.writeable = False
            object.__setattr__(self, name, M)
        object.__setattr__(self, "sigma", sigma)

    @property
    def d(self):
        return self.A.shape[0]

    @property
    def k(self):
        return self.B.shape[1]

    @property
    def cost_matrix(self):
        """blkdiag(Q, R), so that c(z) = z' C z."""
        d, k = self.d, self.k
        C = np.zeros((d + k, d + k))
        C[:d, :d] = self.Q
        C[d:, d:] = self.R
        return C

    def to_dict(self):
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "Q": self.Q.tolist(),
            "R": self.R.tolist(),
            "D_xi": self.D_xi.tolist(),
            "sigma": self.sigma,
        }

    @classmethod
    def from_dict(cls, data):
        missing = {"A", "B", "Q", "R", "D_xi", "sigma"} - set(data)
        if missing:
            raise InvalidModel(f"missing model fields: {sorted(missing)}")
        return cls(data["A"], data["B"], data["Q"], data["R"], data["D_xi"], data["sigma"])


def example_1():
    """d = 2, k = 3 instance used in the numerical experiments."""
    return LqrModel(
        A=[[0.5, 0.0], [0.0, 0.5]],
        B=[[0.2, 0.0, 0.1], [0.0, 0.2, 0.1]],
        Q=[[1.0, 0.0], [0.0, 0.8]],
        R=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]],
        D_xi=[[1.0, 0.0], [0.0, 1.0]],
        sigma=1.0,
    )


def example_2():
    """d = 4, k = 3 instance used in the numerical experiments."""
    return LqrModel(
        A=[[0.5, 0.1, 0.0, 0.0], [0.1, 0.5, 0.1, 0.0], [0.0, 0.1, 0.5, 0.0], [0.0, 0.0, 0.0, 0.5]],
        B=[[0.3, 0.1, 0.0], [0.1, 0.3, 0.1], [0.0, 0.1, 0.3], [0.1, 0.1, 0.1]],
        Q=[[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.1, 0.0], [0.0, 0.1, 1.0, 0.1], [0.0, 0.0, 0.1, 1.0]],
        R=[[1.0, 0.1, 0.0], [0.1, 1.0, 0.1], [0.0, 0.1, 1.0]],
        D_xi=[[1.0, 0.0, 0.1, 0.0], [0.0, 1.0, 0.0, 0.0], [0.1, 0.0, 1.0, 0.1], [0.0, 0.0, 0.1, 1.0]],
        sigma=1.0,
    )


EXAMPLES = {"example1": example_1, "example2": example_2}


# --- per-gain building blocks ------------------------------------------------

def as_gain(model, K):
    K = np.asarray(K, dtype=float).reshape(model.k, model.d)
    return K


def closed_loop(model, K):
    return model.A - model.B @ as_gain(model, K)


def check_stable(model, K):
    """Return rho(A - BK), raising UnstableGain if it is >= 1."""
    radius = spectral_radius(closed_loop(model, K))
    if radius >= 1.0:
        raise UnstableGain(radius)
    return radius


def concat_transition(model, K):
    """E = [[A, B], [-KA, -KB]]: z' = E z + noise for z = [x; u]."""
    K = as_gain(model, K)
    top = np.hstack([model.A, model.B])
    return np.vstack([top, -K @ top])


def lift(model, K):
    """[I; -K], mapping x to the mean state-action pair under pi_K."""
    return np.vstack([np.eye(model.d), -as_gain(model, K)])


def concat_noise(model, K):
    K = as_gain(model, K)
    L = lift(model, K)
    S = L @ model.D_xi @ L.T
    S[model.d:, model.d:] += model.sigma**2 * np.eye(model.k)
    return symmetrize(S)


def state_action_cov(model, K, D):
    """Joint covariance of (x, u) with x ~ N(0, D), u ~ pi_K(.|x)."""
    L = lift(model, K)
    S = L @ D @ L.T
    S[model.d:, model.d:] += model.sigma**2 * np.eye(model.k)
    return symmetrize(S)


def theta_from_P(model, P):
    top = np.hstack([model.A, model.B])
    return symmetrize(model.cost_matrix + top.T @ P @ top)


@dataclass(frozen=True, eq=False)
class StationaryOperators:
    K: np.ndarray
    rho: float
    E: np.ndarray
    Sigma_eps: np.ndarray
    D_K: np.ndarray
    P_K: np.ndarray
    Sigma_K: np.ndarray
    theta_K: np.ndarray
    J_K: float


def stationary_operators(model, K):
    K = as_gain(model, K)
    rho = check_stable(model, K)
    F = closed_loop(model, K)
    D = symmetrize(solve_kron_linear(F, F.T, model.D_eps))
    P = symmetrize(solve_kron_linear(F.T, F, model.Q + K.T @ model.R @ K))
    J = float(np.trace(model.D_eps @ P) + model.sigma**2 * np.trace(model.R))
    return StationaryOperators(
        K=K,
        rho=rho,
        E=concat_transition(model, K),
        Sigma_eps=concat_noise(model, K),
        D_K=D,
        P_K=P,
        Sigma_K=state_action_cov(model, K, D),
        theta_K=theta_from_P(model, P),
        J_K=J,
    )


def critic_target(model, K):
    return stationary_operators(model, K).theta_K


def cost(model, K):
    return stationary_operators(model, K).J_K


def cost_alt(model, K):
    """Tr[D_K (Q + K'RK)] + sigma^2 Tr R: same value, via the state covariance."""
    ops = stationary_operators(model, K)
    K = ops.K
    return float(np.trace(ops.D_K @ (model.Q + K.T @ model.R @ K)) + model.sigma**2 * np.trace(model.R))


def natural_grad_G(model, K, ops=None):
    """G_K = (R + B'P_K B) K - B'P_K A."""
    ops = ops or stationary_operators(model, K)
    P, K = ops.P_K, ops.K
    return (model.R + model.B.T @ P @ model.B) @ K - model.B.T @ P @ model.A


def grad_J(model, K, ops=None):
    ops = ops or stationary_operators(model, K)
    return 2.0 * natural_grad_G(model, K, ops) @ ops.D_K


# --- optimal control ---------------------------------------------------------

def riccati_map(model, P):
    A, B, Q, R = model.A, model.B, model.Q, model.R
    BtPA = B.T @ P @ A
    return symmetrize(Q + A.T @ P @ A - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA))


def riccati_residual(model, P):
    """Relative Frobenius residual of P against the Riccati map."""
    return float(np.linalg.norm(P - riccati_map(model, P)) / max(1.0, np.linalg.norm(P)))


def optimal_gain_from_P(model, P):
    return np.linalg.solve(model.R + model.B.T @ P @ model.B, model.B.T @ P @ model.A)


def solve_riccati(model, tol=1e-12, max_iter=100_000):
    """Fixed-point iteration of the discrete Riccati equation from P = Q.

    Returns (P_star, K_star). After the relative step drops below ``tol`` a
    few extra sweeps are taken while the step keeps shrinking, so the
    returned residual sits well under ``tol``.
    """
    P = model.Q.copy()
    for _ in range(max_iter):
        P_next = riccati_map(model, P)
        step = np.linalg.norm(P_next - P) / max(np.linalg.norm(P), 1e-300)
        P = P_next
        if step <= tol:
            break
    else:
        raise RiccatiNonConvergence(f"no convergence in {max_iter} iterations (last step {step:.3g})")
    for _ in range(50):
        P_next = riccati_map(model, P)
        new_step = np.linalg.norm(P_next - P) / np.linalg.norm(P)
        if new_step >= step:
            break
        P, step = P_next, new_step
    K = optimal_gain_from_P(model, P)
    radius = spectral_radius(model.A - model.B @ K)
    if radius >= 1.0:
        raise UnstableClosedLoop(f"Riccati gain is not stabilizing: rho = {radius:.6g}")
    return P, K


# --- value functions -----------------------------------------------------------

def q_offset(model, ops):
    """Scalar offset of the exact Q-function (the theta' of the parameterization).

    sigma^2 (Tr R + Tr(P_K B B')) + Tr(D_K P_K); R and P_K B B' have different
    sizes, so the trace of the sum is read as the sum of traces.
    """
    P = ops.P_K
    return float(model.sigma**2 * (np.trace(model.R) + np.trace(P @ model.B @ model.B.T))
                 + np.trace(ops.D_K @ P))


def value_functions(model, K, x, u, ops=None):
    """Exact (V_K(x), Q_K(x, u)) for the relative-value (average-cost) setting."""
    ops = ops or stationary_operators(model, K)
    x = np.asarray(x, dtype=float).reshape(model.d)
    u = np.asarray(u, dtype=float).reshape(model.k)
    z = np.concatenate([x, u])
    V = float(x @ ops.P_K @ x - np.trace(ops.D_K @ ops.P_K))
    Qval = float(z @ ops.theta_K @ z - q_offset(model, ops))
    return V, Qval


# --- critic loss, gradient and curvature ---------------------------------------

def _check_theta(model, theta):
    n = model.d + model.k
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n, n):
        raise AsymmetricTheta(f"theta must be {n} x {n}, got {theta.shape}")
    if not is_symmetric(theta):
        raise AsymmetricTheta("theta must be symmetric")
    return symmetrize(theta)


def _residual_quadratic(model, E, Sigma_eps, theta):
    """Bellman residual (without J) as z' H z + h0."""
    H = symmetrize(model.cost_matrix + E.T @ theta @ E - theta)
    h0 = float(np.sum(theta * Sigma_eps))
    return H, h0


def expected_f(model, K, theta, Sigma_z, ops=None):
    """E[f(z)] for z ~ N(0, Sigma_z), with f the per-sample critic gradient.

    f(z) = (c(z) + <psi(z), theta>) psi(z), psi(z) = E z z' E' + Sigma_eps - z z'.
    Isserlis: E[(z'Hz) z z'] = Tr(H S) S + 2 S H S for symmetric H.
    """
    ops = ops or stationary_operators(model, K)
    theta = _check_theta(model, theta)
    E, Se = ops.E, ops.Sigma_eps
    H, h0 = _residual_quadratic(model, E, Se, theta)
    S = Sigma_z
    trHS = float(np.sum(H * S))
    M = trHS * S + 2.0 * S @ H @ S + h0 * S
    return symmetrize(E @ M @ E.T - M + (trHS + h0) * Se)


def critic_grad_exact(model, K, theta, ops=None):
    ops = ops or stationary_operators(model, K)
    return expected_f(model, K, theta, ops.Sigma_K, ops)


def critic_loss_exact(model, K, theta, ops=None):
    """L_K(theta) = 1/2 E[(c - J + <psi, theta>)^2] in closed form.

    Accepts a non-symmetric theta (only its symmetric part matters), which is
    what an entrywise finite-difference check needs.
    """
    ops = ops or stationary_operators(model, K)
    theta = np.asarray(theta, dtype=float)
    H, h0 = _residual_quadratic(model, ops.E, ops.Sigma_eps, symmetrize(theta))
    S = ops.Sigma_K
    HS = H @ S
    mean = float(np.trace(HS)) + h0 - ops.J_K
    return float(np.trace(HS @ HS) + 0.5 * mean**2)


def critic_hessian_quadratic(model, K, M, ops=None):
    """E[(Tr[M psi])^2] = 2 Tr[S (E'ME - M) S (E'ME - M)] with S = Sigma_K."""
    ops = ops or stationary_operators(model, K)
    M = _check_theta(model, M)
    W = ops.E.T @ M @ ops.E - M
    SW = ops.Sigma_K @ W
    return float(max(2.0 * np.trace(SW @ SW), 0.0))


def burnin_state_cov(model, K, n_steps, ops=None):
    """Covariance of x after n_steps from x_0 = 0: D_K - F^n D_K F^n'."""
    ops = ops or stationary_operators(model, K)
    Fn = np.linalg.matrix_power(closed_loop(model, K), n_steps)
    return symmetrize(ops.D_K - Fn @ ops.D_K @ Fn.T)


def burnin_bias(model, K, theta, n_steps, ops=None):
    """E_{N0}[f] - E_K[f]: exact bias of the burned-in sampling distribution.

    Expanded in the covariance gap so no catastrophic cancellation occurs
    when the gap is tiny.
    """
    ops = ops or stationary_operators(model, K)
    theta = _check_theta(model, theta)
    Fn = np.linalg.matrix_power(closed_loop(model, K), n_steps)
    L = lift(model, K)
    # Sigma^(N0) = Sigma_K + Delta
    Delta = -symmetrize(L @ (Fn @ ops.D_K @ Fn.T) @ L.T)
    E, Se, S = ops.E, ops.Sigma_eps, ops.Sigma_K
    H, h0 = _residual_quadratic(model, E, Se, theta)
    trHS, trHD = float(np.sum(H * S)), float(np.sum(H * Delta))
    dM = (trHD * S + trHS * Delta + trHD * Delta
          + 2.0 * (Delta @ H @ S + S @ H @ Delta + Delta @ H @ Delta) + h0 * Delta)
    return symmetrize(E @ dM @ E.T - dM + trHD * Se)


# --- natural gradient ------------------------------------------------------------

def fisher_tensor(model, K, ops=None):
    """Average Fisher information of pi_K on row-major flattened k x d matrices.

    The score is -(u + Kx) x' / sigma^2 with w = u + Kx ~ N(0, sigma^2 I)
    independent of x ~ N(0, D_K), so the moment integrals factor:
    F = E[w w'] kron E[x x'] / sigma^4.
    """
    if model.sigma <= 0:
        raise ValueError("Fisher information is undefined for sigma = 0")
    ops = ops or stationary_operators(model, K)
    s2 = model.sigma**2
    return np.kron(s2 * np.eye(model.k), ops.D_K) / s2**2


# --- actor geometry -----------------------------------------------------------------

def cost_difference(model, K, K_prime, ops=None, ops_prime=None):
    """J(K) - J(K') from G_K, P_K and D_{K'} (no cost evaluation)."""
    ops = ops or stationary_operators(model, K)
    ops_prime = ops_prime or stationary_operators(model, K_prime)
    G = natural_grad_G(model, K, ops)
    dK = ops.K - ops_prime.K
    curv = model.R + model.B.T @ ops.P_K @ model.B
    inner = dK.T @ G + G.T @ dK - dK.T @ curv @ dK
    return float(np.trace(ops_prime.D_K @ inner))


class DominanceBounds(NamedTuple):
    lower: float
    gap: float
    upper: float

    def holds(self, slack=1e-10):
        return self.lower <= self.gap + slack and self.gap <= self.upper + slack


def gradient_dominance_check(model, K, K_star=None, ops_star=None):
    """(c2 Tr(GG'), J(K) - J(K*), c3 Tr(GG')) with the uniform P-bound taken as ||P_K||."""
    if ops_star is None:
        if K_star is None:
            _, K_star = solve_riccati(model)
        ops_star = stationary_operators(model, K_star)
    ops = stationary_operators(model, K)
    G = natural_grad_G(model, K, ops)
    tr_gg = float(np.sum(G * G))
    sig_min_eps = min_eig_sym(model.D_eps)
    c2 = sig_min_eps / (operator_norm(model.R) + operator_norm(ops.P_K) * operator_norm(model.B) ** 2)
    c3 = operator_norm(ops_star.D_K) / min_eig_sym(model.R)
    return DominanceBounds(c2 * tr_gg, ops.J_K - ops_star.J_K, c3 * tr_gg)


# --- sampling helpers for tests and checks -------------------------------------------

def random_stable_gains(model, n, rng, center=None, scale=0.3, max_radius=0.95):
    """n random gains around ``center`` (default K*) with rho(A - BK) < max_radius."""
    if center is None:
        _, center = solve_riccati(model)
    center = as_gain(model, center)
    gains = []
    attempts = 0
    while len(gains) < n:
        attempts += 1
        if attempts > 1000 * n:
            raise RuntimeError("could not draw enough stable gains; reduce scale")
        K = center + scale * rng.standard_normal(center.shape)
        if spectral_radius(closed_loop(model, K)) < max_radius:
            gains.append(K)
    return gains
