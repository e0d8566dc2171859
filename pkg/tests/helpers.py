"""Independent oracles used only by the test suite.

Each oracle takes a deliberately different algorithmic route from the
library code it checks: singular values come from a one-sided Jacobi sweep
instead of power iteration, k-means optima from exhaustive partition
enumeration instead of dynamic programming, and gradients from central
finite differences instead of closed forms.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def jacobi_singular_values(m, max_sweeps: int = 60, tol: float = 1e-14) -> np.ndarray:
    """All singular values, descending, via one-sided Jacobi rotations.

    Brute force and slow; intended for matrices up to ~32x32. Columns of the
    working copy are rotated pairwise until mutually orthogonal; their norms
    are then the singular values.
    """
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("need a 2-D matrix")
    if a.shape[0] < a.shape[1]:
        a = a.T
    v = a.copy()
    n = v.shape[1]
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = float(v[:, p] @ v[:, p])
                aqq = float(v[:, q] @ v[:, q])
                apq = float(v[:, p] @ v[:, q])
                denom = math.sqrt(app * aqq)
                if denom == 0.0 or abs(apq) <= tol * denom:
                    continue
                off = max(off, abs(apq) / denom)
                tau = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                col_p = v[:, p].copy()
                v[:, p] = c * col_p - s * v[:, q]
                v[:, q] = s * col_p + c * v[:, q]
        if off <= tol:
            break
    svals = np.sqrt(np.sum(v * v, axis=0))
    return np.sort(svals)[::-1]


def exhaustive_kmeans_1d(values, k: int) -> tuple[np.ndarray, float]:
    """Optimal 1-D k-means by enumerating contiguous partitions of the sorted values.

    Returns (centers ascending, cost). Exponential enumeration; keep inputs
    tiny. Centers of an optimal solution are means of contiguous runs in
    sorted order, so enumerating split-point subsets covers every candidate.
    """
    xs = np.sort(np.asarray(values, dtype=np.float64).ravel())
    n = xs.size
    d = np.unique(xs).size
    groups = min(k, d)

    best_cost = math.inf
    best_centers: np.ndarray | None = None
    # choose groups-1 split positions among the n-1 gaps
    for splits in itertools.combinations(range(1, n), groups - 1):
        bounds = (0, *splits, n)
        cost = 0.0
        centers = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            seg = xs[lo:hi]
            mu = seg.mean()
            cost += float(((seg - mu) ** 2).sum())
            centers.append(mu)
        if cost < best_cost:
            best_cost = cost
            best_centers = np.asarray(centers)
    assert best_centers is not None
    # collapse duplicate centers (possible when a crafted tie puts an empty
    # gap between equal values); keeps the comparison well-defined
    return np.unique(best_centers), best_cost


def central_difference_gradients(a, b, loss_fn, h: float = 1e-5):
    """Gradients of ``loss_fn(a, b)`` by central finite differences, entry by entry."""
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    grad_a = np.zeros_like(a)
    grad_b = np.zeros_like(b)
    for idx in np.ndindex(a.shape):
        orig = a[idx]
        a[idx] = orig + h
        up = loss_fn(a, b)
        a[idx] = orig - h
        down = loss_fn(a, b)
        a[idx] = orig
        grad_a[idx] = (up - down) / (2.0 * h)
    for idx in np.ndindex(b.shape):
        orig = b[idx]
        b[idx] = orig + h
        up = loss_fn(a, b)
        b[idx] = orig - h
        down = loss_fn(a, b)
        b[idx] = orig
        grad_b[idx] = (up - down) / (2.0 * h)
    return grad_a, grad_b
