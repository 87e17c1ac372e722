"""Fisher memory analysis of linear recurrent networks driven by unit noise.

For state updates h_t = W h_{t-1} + v s_t + z_t with z_t ~ N(0, I), the
memory curve j(k) measures the Fisher information the current state carries
about the scalar signal injected k steps ago:

    j(k) = (W^k v)^T C^{-1} (W^k v),   C = sum_k W^k W^kT.

The total memory is the sum of j(k) over all lags; it equals 1 for every
normal W and is bounded by the state dimension in general.  The
"amplification" curve ||W^k v|| tracks the propagated signal strength.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linalg import FactorizationError, _as_square, noise_covariance

__all__ = [
    "MemoryCurve",
    "fisher_memory_curve",
    "total_fisher_memory",
    "amplification_curve",
]

# Hard cap on adaptive lag extension; generous because stable spectra decay
# geometrically and nilpotent chains terminate at the dimension.
_MAX_ADAPTIVE_LAGS = 500_000


@dataclass(frozen=True)
class MemoryCurve:
    """Memory curve j(0..k_max), its sum, and the signal-strength curve."""

    j: np.ndarray
    j_tot: float
    amplification: np.ndarray


def _chol_lower(c) -> np.ndarray:
    try:
        return np.linalg.cholesky(c)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            f"noise covariance is numerically not SPD: {exc}"
        ) from exc


def _info_at_lag(chol_lower, u) -> float:
    # u^T C^{-1} u = ||L^{-1} u||^2, which is non-negative by construction.
    z = scipy.linalg.solve_triangular(chol_lower, u, lower=True)
    return float(z @ z)


def fisher_memory_curve(w, v, k_max: int, tol: float = 1e-10) -> MemoryCurve:
    """Memory and amplification curves for lags 0..k_max inclusive.

    One Cholesky factorization of the noise covariance is reused across all
    lags; the lag-k signal vector W^k v is built by repeated matrix-vector
    products.
    """
    w = _as_square(w, "W")
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.shape[0] != w.shape[0]:
        raise ValueError("v dimension does not match W")
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    chol = _chol_lower(noise_covariance(w, tol=tol))
    j = np.empty(k_max + 1)
    amp = np.empty(k_max + 1)
    u = v.copy()
    for k in range(k_max + 1):
        j[k] = _info_at_lag(chol, u)
        amp[k] = float(np.linalg.norm(u))
        u = w @ u
    return MemoryCurve(j=j, j_tot=float(j.sum()), amplification=amp)


def total_fisher_memory(w, v, tol: float = 1e-9) -> float:
    """Total memory with adaptive lag extension.

    Lags are accumulated until the largest of the last 10 contributions drops
    below ``tol`` times the running total, and never fewer than twice the
    state dimension (chain curves are exactly zero beyond it).
    """
    w = _as_square(w, "W")
    v = np.asarray(v, dtype=np.float64).ravel()
    n = w.shape[0]
    chol = _chol_lower(noise_covariance(w))
    u = v.copy()
    total = 0.0
    tail = []
    k = 0
    while True:
        jk = _info_at_lag(chol, u)
        total += jk
        tail.append(jk)
        if len(tail) > 10:
            tail.pop(0)
        if k >= 2 * n and max(tail) <= tol * max(total, 1e-300):
            return total
        if k >= _MAX_ADAPTIVE_LAGS:
            raise RuntimeError(
                f"memory curve did not flatten within {_MAX_ADAPTIVE_LAGS} lags"
            )
        u = w @ u
        k += 1


def amplification_curve(w, v, k_max: int) -> np.ndarray:
    """Signal-strength curve ||W^k v|| for k = 0..k_max inclusive.

    Uses repeated matrix-vector products, never explicit matrix powers.
    """
    w = np.asarray(w, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64).ravel()
    amp = np.empty(k_max + 1)
    u = v.copy()
    for k in range(k_max + 1):
        amp[k] = float(np.linalg.norm(u))
        u = w @ u
    return amp
