"""Desk-scale adapter fitting against synthetic weight-delta targets.

Gradient descent on ||reconstruction - target||_F^2 over the two factors,
for both reconstruction flavors. The point is not training realism but a
controlled expressivity comparison: at equal rank and iteration budget the
sine reconstruction can dip below the plain product's rank-k error floor.

Descent is fixed-step with per-iteration halving: a step that fails to
strictly decrease the loss is halved up to 20 times, after which the fit
stops early and reports what it has. Everything is seeded and pure numpy,
so trajectories are reproducible bit for bit.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .adapter import DEFAULT_OMEGA, Flavor, default_gamma
from .errors import InputError, NumericError
from .linalg import as_matrix, stable_rank

DEFAULT_LEARNING_RATE = 10.0
DEFAULT_ITERATIONS = 2000
_MAX_HALVINGS = 20

EXPRESSIVITY_CSV_HEADER = "rank,seed,flavor,final_loss,stable_rank,iters"


@dataclass(frozen=True)
class FitConfig:
    """Inputs of one fit: the target, the adapter shape, and descent knobs."""

    target: np.ndarray
    rank: int
    flavor: Flavor
    omega: float = DEFAULT_OMEGA
    gamma: float | None = None  # None: default_gamma(target columns)
    learning_rate: float = DEFAULT_LEARNING_RATE
    iterations: int = DEFAULT_ITERATIONS
    seed: int = 0

    def __post_init__(self):
        target = as_matrix(self.target, "target")
        object.__setattr__(self, "target", target)
        m, n = target.shape
        if not (1 <= self.rank <= min(m, n)):
            raise InputError(f"rank {self.rank} outside [1, {min(m, n)}] for a {m}x{n} target")
        if not (self.learning_rate > 0) or not math.isfinite(self.learning_rate):
            raise InputError(f"learning rate must be positive, got {self.learning_rate!r}")
        if self.iterations < 1:
            raise InputError(f"iterations must be >= 1, got {self.iterations!r}")
        if self.flavor == Flavor.SINE and not (self.omega > 0):
            raise InputError(f"sine flavor needs omega > 0, got {self.omega!r}")
        if self.gamma is not None and not (self.gamma > 0):
            raise InputError(f"gamma must be positive, got {self.gamma!r}")
        if int(self.seed) < 0:
            raise InputError(f"seed must be nonnegative, got {self.seed!r}")

    def resolved_gamma(self) -> float:
        if self.gamma is not None:
            return float(self.gamma)
        return default_gamma(self.target.shape[1])


@dataclass(frozen=True)
class FitReport:
    """Outcome of a fit.

    ``trajectory`` holds the loss before descent and after each accepted
    step, so it is non-increasing by construction. ``delta_stable_rank`` is
    None when the fitted reconstruction is identically zero (stable rank is
    undefined there); that happens only for degenerate targets.
    """

    final_loss: float
    trajectory: np.ndarray
    delta_stable_rank: float | None
    elapsed_seconds: float
    iterations_run: int
    factor_a: np.ndarray = field(repr=False)
    factor_b: np.ndarray = field(repr=False)


def _reconstruct(a: np.ndarray, b: np.ndarray, flavor: Flavor, omega: float,
                 gamma: float) -> np.ndarray:
    product = a @ b
    if flavor == Flavor.PLAIN:
        return product
    return np.sin(omega * product) / gamma


def loss_and_gradients(a, b, target, flavor: Flavor, omega: float = DEFAULT_OMEGA,
                       gamma: float | None = None) -> tuple[float, np.ndarray, np.ndarray]:
    """Squared Frobenius loss of the reconstruction and its exact gradients.

    Plain flavor: with R = a @ b - target, loss = ||R||_F^2, and the
    gradients are 2 R b^T and 2 a^T R. Sine flavor composes the chain rule
    through sin(omega * a @ b) / gamma, which multiplies the residual
    elementwise by (omega / gamma) * cos(omega * a @ b) before the same
    contractions.
    """
    a = as_matrix(a, "factor a")
    b = as_matrix(b, "factor b")
    target = as_matrix(target, "target")
    if a.shape[1] != b.shape[0]:
        raise InputError(f"factor shapes do not compose: {a.shape} @ {b.shape}")
    if (a.shape[0], b.shape[1]) != target.shape:
        raise InputError(
            f"reconstruction shape {(a.shape[0], b.shape[1])} does not match target {target.shape}"
        )
    if flavor == Flavor.SINE and not (omega > 0):
        raise InputError(f"sine flavor needs omega > 0, got {omega!r}")
    g = float(gamma) if gamma is not None else default_gamma(target.shape[1])
    if not (g > 0):
        raise InputError(f"gamma must be positive, got {gamma!r}")

    product = a @ b
    if flavor == Flavor.PLAIN:
        residual = product - target
        scaled = 2.0 * residual
    else:
        residual = np.sin(omega * product) / g - target
        scaled = 2.0 * residual * (omega / g) * np.cos(omega * product)
    loss = float((residual * residual).sum())
    return loss, scaled @ b.T, a.T @ scaled


def fit(config: FitConfig) -> FitReport:
    """Run seeded gradient descent per ``config`` and report the outcome."""
    m, n = config.target.shape
    k = config.rank
    gamma = config.resolved_gamma()
    rng = np.random.default_rng(int(config.seed))
    a = rng.normal(0.0, 1.0 / math.sqrt(k), size=(m, k))
    b = np.zeros((k, n))

    loss, grad_a, grad_b = loss_and_gradients(
        a, b, config.target, config.flavor, config.omega, gamma)
    if math.isnan(loss):
        raise NumericError("initial loss is NaN", iteration=0)
    trajectory = [loss]
    start = time.perf_counter()
    steps_taken = 0

    for iteration in range(config.iterations):
        step = config.learning_rate
        accepted = False
        for _ in range(_MAX_HALVINGS + 1):
            cand_a = a - step * grad_a
            cand_b = b - step * grad_b
            cand_loss = _loss_only(cand_a, cand_b, config, gamma)
            if math.isnan(cand_loss):
                raise NumericError("loss became NaN", iteration=iteration)
            if cand_loss < loss:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # stalled: no strict decrease within the halving budget
        a, b, loss = cand_a, cand_b, cand_loss
        trajectory.append(loss)
        steps_taken += 1
        grad_a, grad_b = loss_and_gradients(
            a, b, config.target, config.flavor, config.omega, gamma)[1:]

    elapsed = time.perf_counter() - start
    delta = _reconstruct(a, b, config.flavor, config.omega, gamma)
    sr = stable_rank(delta) if np.any(delta) else None
    return FitReport(
        final_loss=loss,
        trajectory=np.asarray(trajectory),
        delta_stable_rank=sr,
        elapsed_seconds=elapsed,
        iterations_run=steps_taken,
        factor_a=a,
        factor_b=b,
    )


def _loss_only(a: np.ndarray, b: np.ndarray, config: FitConfig, gamma: float) -> float:
    residual = _reconstruct(a, b, config.flavor, config.omega, gamma) - config.target
    return float((residual * residual).sum())


@dataclass(frozen=True)
class ExpressivityRow:
    """One (rank, seed, flavor) cell of the expressivity comparison."""

    rank: int
    seed: int
    flavor: Flavor
    final_loss: float
    delta_stable_rank: float | None
    iterations_run: int


def orthogonalish_target(m: int, n: int, seed: int) -> np.ndarray:
    """Full-rank target with all singular values 1, drawn from ``seed``."""
    if m < 1 or n < 1:
        raise InputError(f"target dimensions must be positive, got {m}x{n}")
    rng = np.random.default_rng(int(seed))
    g = rng.normal(size=(m, n))
    if m >= n:
        q, _ = np.linalg.qr(g)
        return q[:, :n].copy()
    q, _ = np.linalg.qr(g.T)
    return q[:, :m].T.copy()


def expressivity_report(m: int, n: int, ranks: Sequence[int], seeds: Sequence[int],
                        omega: float = DEFAULT_OMEGA, gamma: float | None = None,
                        learning_rate: float = DEFAULT_LEARNING_RATE,
                        iterations: int = DEFAULT_ITERATIONS) -> list[ExpressivityRow]:
    """Fit both flavors to one shared target per seed, across ranks.

    The target depends only on (m, n, seed), so rows are comparable across
    both flavor and rank.
    """
    if not ranks or not seeds:
        raise InputError("ranks and seeds must be nonempty")
    rows = []
    for seed in seeds:
        target = orthogonalish_target(m, n, int(seed))
        for k in ranks:
            for flavor in (Flavor.PLAIN, Flavor.SINE):
                report = fit(FitConfig(
                    target=target, rank=int(k), flavor=flavor, omega=omega,
                    gamma=gamma, learning_rate=learning_rate,
                    iterations=iterations, seed=int(seed),
                ))
                rows.append(ExpressivityRow(
                    rank=int(k), seed=int(seed), flavor=flavor,
                    final_loss=report.final_loss,
                    delta_stable_rank=report.delta_stable_rank,
                    iterations_run=report.iterations_run,
                ))
    return rows


def expressivity_to_csv(rows: Sequence[ExpressivityRow]) -> str:
    lines = [EXPRESSIVITY_CSV_HEADER]
    for r in rows:
        sr = "" if r.delta_stable_rank is None else f"{r.delta_stable_rank:.6g}"
        lines.append(
            f"{r.rank},{r.seed},{r.flavor.name.lower()},{r.final_loss:.6g},{sr},{r.iterations_run}"
        )
    return "\n".join(lines) + "\n"
