"""Small dense linear-algebra kernel.

Matrices are plain 2-D float64 numpy arrays. Nothing in here knows about
control problems; the model layer builds on these primitives.
"""

import numpy as np

from .errors import DimensionMismatch, NonConvergence, NotPSD, SingularSystem

SYM_RTOL = 1e-10


def as_matrix(M, name="matrix"):
    """Coerce to a finite 2-D float64 array (copy)."""
    arr = np.array(M, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def symmetrize(M):
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def is_symmetric(M, rtol=SYM_RTOL):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    scale = max(1.0, np.max(np.abs(M)))
    return np.max(np.abs(M - M.T)) <= rtol * scale


def frobenius_norm(M):
    return float(np.linalg.norm(np.asarray(M, dtype=float), "fro"))


def operator_norm(M):
    """Largest singular value."""
    return float(np.linalg.norm(np.asarray(M, dtype=float), 2))


def min_eig_sym(M):
    return float(np.linalg.eigvalsh(symmetrize(M))[0])


def cholesky(M, jitter=0.0):
    """Lower Cholesky factor of a symmetric PSD matrix.

    The factorization is first attempted on ``M`` itself; ``jitter * I`` is
    added only if that fails. A PSD-but-singular covariance (e.g. a noise
    channel that is switched off) therefore needs ``jitter > 0``.
    """
    M = as_matrix(M)
    n, m = M.shape
    if n != m:
        raise DimensionMismatch(f"cholesky needs a square matrix, got {M.shape}")
    if not is_symmetric(M):
        raise NotPSD("matrix is not symmetric")
    M = symmetrize(M)
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        pass
    if jitter > 0:
        try:
            return np.linalg.cholesky(M + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            pass
    raise NotPSD(f"factorization failed (jitter={jitter})")


def spectral_radius(M):
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"spectral radius needs a square matrix, got {M.shape}")
    try:
        eig = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:  # QR iteration did not converge
        raise NonConvergence(str(exc)) from exc
    return float(np.max(np.abs(eig)))


def solve_kron_linear(F, G, W):
    """Solve ``X = W + F X G`` for square X.

    Uses the column-major identity vec(F X G) = (G^T kron F) vec(X), so the
    fixed point is the solution of ``(I - G^T kron F) vec(X) = vec(W)``.
    Unique whenever rho(F) * rho(G) < 1.
    """
    F, G, W = as_matrix(F, "F"), as_matrix(G, "G"), as_matrix(W, "W")
    n = W.shape[0]
    if W.shape != (n, n) or F.shape != (n, n) or G.shape != (n, n):
        raise DimensionMismatch(f"shapes F{F.shape} G{G.shape} W{W.shape} are not all n x n")
    lhs = np.eye(n * n) - np.kron(G.T, F)
    rhs = W.reshape(-1, order="F")
    if np.linalg.cond(lhs) > 1e13:
        raise SingularSystem("vectorized fixed-point system is numerically singular")
    x = np.linalg.solve(lhs, rhs)
    # one round of refinement keeps residuals at machine level for rho near 1
    x += np.linalg.solve(lhs, rhs - lhs @ x)
    return x.reshape((n, n), order="F")


def fixed_point_series(F, G, W, tol=1e-16, max_terms=100_000):
    """Truncated series sum_s F^s W G^s; the reference for solve_kron_linear."""
    F, G, W = as_matrix(F), as_matrix(G), as_matrix(W)
    total = W.copy()
    term = W.copy()
    for _ in range(max_terms):
        term = F @ term @ G
        total += term
        if np.max(np.abs(term)) <= tol * max(1.0, np.max(np.abs(total))):
            return total
    raise NonConvergence("series did not converge")
