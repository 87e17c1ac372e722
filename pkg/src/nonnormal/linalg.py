"""Dense real linear algebra used across the package.

Random orthogonal sampling, nonsymmetric eigenvalues, least squares with an
intercept, and the recurrent noise-covariance series.  Everything operates on
plain float64 numpy arrays and is pure: no shared mutable state, safe to call
from concurrent workers.
"""

from __future__ import annotations

import numpy as np

from . import rng as rng_mod

__all__ = [
    "ConvergenceError",
    "FactorizationError",
    "random_orthogonal",
    "eigenvalues",
    "least_squares",
    "noise_covariance",
]


class ConvergenceError(RuntimeError):
    """An iterative computation failed to converge."""


class FactorizationError(RuntimeError):
    """A factorization failed, e.g. a numerically non-SPD matrix."""


NOISE_COV_TOL = 1e-10
NOISE_COV_MAX_TERMS = 100_000
# The series for a nilpotent chain legitimately passes through enormous norms
# before terminating exactly (any feedforward weight is admissible), so the
# runaway guard sits near float64 overflow, not at a merely "large" value.
NOISE_COV_NORM_CAP = 1e250


def _as_square(m, name="matrix"):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError(f"{name} contains non-finite entries")
    return m


def random_orthogonal(n: int, seed) -> np.ndarray:
    """Haar-distributed random n x n orthogonal matrix.

    QR of a standard Gaussian matrix with the usual sign correction on the
    R diagonal.  `seed` may be an integer or a Generator; integer seeds are
    split on the RECURRENT stream.  Deterministic given the seed.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    rng = rng_mod.as_rng(seed, rng_mod.RECURRENT)
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    d[d == 0.0] = 1.0
    return q * d


def eigenvalues(m) -> np.ndarray:
    """All eigenvalues of a square real matrix, as a complex array.

    Raises ConvergenceError if the underlying QR iteration fails, which flags
    an ill-conditioned input.
    """
    m = _as_square(m)
    try:
        return np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration did not converge: {exc}") from exc


def least_squares(x, y) -> tuple[np.ndarray, float]:
    """Least-squares fit of y on the columns of x plus an intercept.

    Returns (coefficients, r_squared).  The coefficient vector has length
    ``features + 1`` with the intercept last.  Rank-deficient designs get the
    minimum-norm solution.  r_squared is 1 - SSE/SST on the fitting set.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.ndim != 2:
        raise ValueError(f"design matrix must be 2-d, got shape {x.shape}")
    samples, features = x.shape
    if y.shape[0] != samples:
        raise ValueError("x and y disagree on sample count")
    if samples < features + 1:
        raise ValueError(f"need at least {features + 1} samples, got {samples}")
    a = np.column_stack([x, np.ones(samples)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    sse = float(resid @ resid)
    centered = y - y.mean()
    sst = float(centered @ centered)
    if sst == 0.0:
        return coef, 1.0
    return coef, 1.0 - sse / sst


def noise_covariance(
    w,
    tol: float = NOISE_COV_TOL,
    max_terms: int = NOISE_COV_MAX_TERMS,
) -> np.ndarray:
    """Steady-state covariance of unit white noise driven through W.

    Solves C = W C W^T + I by fixed-point iteration from C = I; after m steps
    the iterate equals the partial series sum_{k<=m} W^k W^kT.  Converges when
    the spectral radius of W is below 1 or W is nilpotent.  The returned C is
    symmetric with residual ||C - (W C W^T + I)||_F < tol.

    Raises ConvergenceError when the series diverges (norm runaway or
    `max_terms` exceeded).
    """
    w = _as_square(w, "W")
    n = w.shape[0]
    c = np.eye(n)
    for _ in range(max_terms):
        c_next = w @ c @ w.T
        c_next[np.diag_indices(n)] += 1.0
        diff = float(np.linalg.norm(c_next - c))
        if diff < tol:
            return 0.5 * (c + c.T)
        c = c_next
        norm = float(np.linalg.norm(c))
        if not np.isfinite(norm) or norm > NOISE_COV_NORM_CAP:
            raise ConvergenceError(
                "noise-covariance series does not converge: "
                f"||C||_F reached {norm:.3e}"
            )
    raise ConvergenceError(
        f"noise-covariance series did not converge within {max_terms} terms"
    )
