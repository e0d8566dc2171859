"""Dense-matrix numerics: Frobenius norm, extreme singular values, stable rank.

Matrices are plain 2-D numpy float64 arrays, logically row-major. Every
public function validates shape and finiteness once on entry.

The largest singular value is computed by power iteration on the Gram
matrix of the smaller dimension rather than a full decomposition; only the
top of the spectrum is ever needed here, and the seeded start vector keeps
results reproducible run to run.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError, NumericError

POWER_ITERATION_TOL = 1e-10
POWER_ITERATION_MAX_STEPS = 10_000

# Fixed seed for the power-iteration start vector. A random start is
# orthogonal to the dominant eigenvector with probability zero; fixing the
# seed makes every call deterministic.
_START_VECTOR_SEED = 0


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce ``m`` to a 2-D float64 array, rejecting empty or non-finite input."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise InputError(f"{name} must be 2-D, got {a.ndim}-D")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise InputError(f"{name} must have positive dimensions, got {a.shape}")
    if not np.isfinite(a).all():
        raise InputError(f"{name} contains non-finite entries")
    return a


def frobenius_norm(m) -> float:
    """Square root of the sum of squared entries."""
    a = as_matrix(m)
    return float(np.sqrt(np.sum(a * a)))


def _gram_smaller_side(a: np.ndarray) -> np.ndarray:
    """Gram matrix over the smaller dimension; shares the nonzero spectrum of a.T @ a."""
    if a.shape[0] <= a.shape[1]:
        return a @ a.T
    return a.T @ a


def _top_eigenvalue(g: np.ndarray, strict: bool = True) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Stops when the Rayleigh quotient changes by less than
    ``POWER_ITERATION_TOL`` relative. The Rayleigh quotient of a PSD matrix
    never exceeds the true eigenvalue, so the estimate approaches from
    below. With ``strict`` the iteration cap raises ``NumericError``
    carrying the last estimate; otherwise the last estimate is returned
    (adequate for threshold checks on the small end of the spectrum).
    """
    rng = np.random.default_rng(_START_VECTOR_SEED)
    v = rng.standard_normal(g.shape[0])
    v /= np.linalg.norm(v)
    lam_prev = None
    lam = 0.0
    for _ in range(POWER_ITERATION_MAX_STEPS):
        w = g @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            # v landed in the null space; for a PSD matrix with a random
            # start this means g is (numerically) zero.
            return 0.0
        lam = float(v @ w)
        v = w / norm_w
        if lam_prev is not None and abs(lam - lam_prev) <= POWER_ITERATION_TOL * abs(lam):
            return lam
        lam_prev = lam
    if strict:
        raise NumericError(
            f"power iteration did not converge in {POWER_ITERATION_MAX_STEPS} steps",
            last_estimate=lam,
        )
    return lam


def sigma_max(m) -> float:
    """Largest singular value.

    Raises ``NumericError`` (with the last estimate attached) if the power
    iteration fails to converge within its step budget.
    """
    a = as_matrix(m)
    g = _gram_smaller_side(a)
    return float(np.sqrt(max(_top_eigenvalue(g), 0.0)))


def sigma_min(m) -> float:
    """Smallest singular value of the compact spectrum.

    Computed by power iteration on the spectrally shifted Gram matrix
    ``lam_max * I - G``, which avoids linear solves. Accuracy is absolute
    (relative to ``sigma_max``), which is what threshold checks need; no
    convergence error is raised.
    """
    a = as_matrix(m)
    g = _gram_smaller_side(a)
    lam_top = _top_eigenvalue(g, strict=False)
    if lam_top <= 0.0:
        return 0.0
    shifted = lam_top * np.eye(g.shape[0]) - g
    lam_shift = _top_eigenvalue(shifted, strict=False)
    return float(np.sqrt(max(lam_top - lam_shift, 0.0)))


def stable_rank(m) -> float:
    """Squared Frobenius norm over squared spectral norm.

    Scale-invariant; always in ``[1, min(rows, cols)]``. The all-zero
    matrix has no stable rank and is rejected.
    """
    a = as_matrix(m)
    fro_sq = float(np.sum(a * a))
    if fro_sq == 0.0:
        raise InputError("stable rank is undefined for the all-zero matrix")
    smax = sigma_max(a)
    sr = fro_sq / (smax * smax)
    # The estimate can stray past the mathematical bounds by rounding only;
    # clamp so the documented range is unconditional.
    return float(min(max(sr, 1.0), float(min(a.shape))))


def matmul(a, b) -> np.ndarray:
    """Matrix product with explicit shape validation."""
    am = as_matrix(a, "left operand")
    bm = as_matrix(b, "right operand")
    if am.shape[1] != bm.shape[0]:
        raise InputError(
            f"inner dimensions do not match: {am.shape} @ {bm.shape}"
        )
    return am @ bm
