"""SPO+ surrogate loss, its subgradient, and the worst-case robust variant.

The loss generalizes the canonical SPO+ construction to decision objectives
with a prediction-independent concave term (fee and ridge penalties): with
psi(v) = max_w v.w + penalty(w) over the simplex,

    loss(r_hat, r) = psi(2 r_hat - r) - 2 r_hat.w* + r.w* - penalty(w*),

where w* maximizes r.w + penalty(w). The loss is convex in r_hat, vanishes at
r_hat = r, upper-bounds the true decision regret, and 2 (w_tilde - w*) is a
subgradient, where w_tilde solves the (2 r_hat - r)-shifted problem.

The robust variant perturbs predictions multiplicatively inside the box
||zeta||_inf <= rho and keeps the worst sampled loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market_data import _frozen
from .solvers import DecisionProblem, Portfolio, argmax_batch, penalty_batch
from .util import derived_rng


@dataclass(frozen=True)
class SpoInstance:
    """One training sample: predicted and realized returns plus the decision problem."""

    r_hat: np.ndarray
    r_true: np.ndarray
    problem: DecisionProblem

    def __post_init__(self):
        r_hat = np.asarray(self.r_hat, dtype=float).reshape(-1)
        r_true = np.asarray(self.r_true, dtype=float).reshape(-1)
        if r_hat.size != r_true.size:
            raise ValueError("r_hat and r_true must have equal length")
        if not (np.all(np.isfinite(r_hat)) and np.all(np.isfinite(r_true))):
            raise ValueError("return vectors must be finite")
        if self.problem.w_prev is not None and self.problem.w_prev.n_assets != r_hat.size:
            raise ValueError("problem dimension does not match return vectors")
        object.__setattr__(self, "r_hat", _frozen(r_hat))
        object.__setattr__(self, "r_true", _frozen(r_true))


@dataclass(frozen=True)
class SpoEvaluation:
    """Loss value, subgradient wrt r_hat, the two argmax decisions, and true regret."""

    loss: float
    subgradient: np.ndarray
    w_tilde: Portfolio
    w_star: Portfolio
    regret: float


@dataclass(frozen=True)
class RobustConfig:
    """Multiplicative uncertainty box and its Monte Carlo sampling plan."""

    rho: float
    n_samples: int = 8
    include_corners: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


def spo_plus_batch(
    r_hat_rows: np.ndarray,
    r_rows: np.ndarray,
    prob: DecisionProblem,
    w_star_rows: np.ndarray | None = None,
):
    """Vectorized loss/subgradient over rows of (r_hat, r) sharing one problem.

    Returns (losses, subgradients, w_tilde_rows, w_star_rows). Passing
    precomputed w_star_rows skips re-solving the realized-return problems.
    """
    r_hat = np.atleast_2d(np.asarray(r_hat_rows, dtype=float))
    r = np.atleast_2d(np.asarray(r_rows, dtype=float))
    if w_star_rows is None:
        w_star_rows = argmax_batch(r, prob)
    shifted = 2.0 * r_hat - r
    w_tilde = argmax_batch(shifted, prob)
    psi = (shifted * w_tilde).sum(axis=1) + penalty_batch(w_tilde, prob)
    losses = psi - 2.0 * (r_hat * w_star_rows).sum(axis=1) + (r * w_star_rows).sum(axis=1) - penalty_batch(w_star_rows, prob)
    grads = 2.0 * (w_tilde - w_star_rows)
    return losses, grads, w_tilde, w_star_rows


def spo_plus(instance: SpoInstance) -> SpoEvaluation:
    """Evaluate the SPO+ surrogate at one instance, including the true regret."""
    prob = instance.problem
    losses, grads, w_tilde, w_star = spo_plus_batch(
        instance.r_hat[None, :], instance.r_true[None, :], prob
    )
    w_hat = argmax_batch(instance.r_hat[None, :], prob)[0]
    star_value = float(instance.r_true @ w_star[0]) + prob.penalty(w_star[0])
    hat_value = float(instance.r_true @ w_hat) + prob.penalty(w_hat)
    return SpoEvaluation(
        loss=float(losses[0]),
        subgradient=grads[0],
        w_tilde=Portfolio(w_tilde[0]),
        w_star=Portfolio(w_star[0]),
        regret=star_value - hat_value,
    )


def perturbation_set(rho: float, n: int, config: RobustConfig) -> np.ndarray:
    """Seeded perturbation sample: uniform box draws plus sign-pattern corners.

    The uniform draws are rho times fixed [-1, 1] variates, so sample sets are
    nested across rho for a fixed seed. Corners start with +/- rho * ones and
    continue with single-coordinate sign flips, capped at 2n rows.
    """
    rng = derived_rng(config.seed, "robust-box", n)
    zetas = [rho * rng.uniform(-1.0, 1.0, size=(config.n_samples, n))]
    if config.include_corners:
        corners = [np.ones(n), -np.ones(n)]
        for i in range(n):
            c = np.ones(n)
            c[i] = -1.0
            corners.append(c)
        for i in range(n):
            c = -np.ones(n)
            c[i] = 1.0
            corners.append(c)
        corners = np.array(corners[: max(2, 2 * n)])
        zetas.append(rho * corners)
    return np.concatenate(zetas, axis=0)


def robust_spo_loss(instance: SpoInstance, config: RobustConfig):
    """Worst sampled SPO+ loss over multiplicative perturbations of r_hat.

    Returns (worst SpoEvaluation, worst zeta); ties keep the first sample. The
    evaluation's subgradient is taken at the perturbed prediction, i.e. wrt
    r_tilde = r_hat * (1 + zeta); chain through (1 + zeta) to reach r_hat.
    """
    n = instance.r_hat.size
    zetas = perturbation_set(config.rho, n, config)
    perturbed = instance.r_hat[None, :] * (1.0 + zetas)
    r_rows = np.broadcast_to(instance.r_true, perturbed.shape)
    losses, _, _, _ = spo_plus_batch(perturbed, r_rows, instance.problem)
    worst = int(np.argmax(losses))
    evaluation = spo_plus(SpoInstance(perturbed[worst], instance.r_true, instance.problem))
    return evaluation, zetas[worst]


def robust_spo_batch(
    r_hat_rows: np.ndarray,
    r_rows: np.ndarray,
    prob: DecisionProblem,
    zetas: np.ndarray,
    w_star_rows: np.ndarray | None = None,
):
    """Worst-scenario loss and r_hat-subgradient for a batch sharing one zeta set.

    The subgradient chains through the multiplicative perturbation:
    d loss / d r_hat = (1 + zeta*) * 2 (w_tilde* - w*).
    """
    r_hat = np.atleast_2d(r_hat_rows)
    r = np.atleast_2d(r_rows)
    b, n = r_hat.shape
    s = zetas.shape[0]
    if w_star_rows is None:
        w_star_rows = argmax_batch(r, prob)
    perturbed = r_hat[:, None, :] * (1.0 + zetas[None, :, :])  # (b, s, n)
    flat_pred = perturbed.reshape(b * s, n)
    flat_r = np.repeat(r, s, axis=0)
    flat_star = np.repeat(w_star_rows, s, axis=0)
    losses, grads, _, _ = spo_plus_batch(flat_pred, flat_r, prob, w_star_rows=flat_star)
    losses = losses.reshape(b, s)
    grads = grads.reshape(b, s, n)
    worst = np.argmax(losses, axis=1)
    rows = np.arange(b)
    worst_loss = losses[rows, worst]
    worst_grad = grads[rows, worst] * (1.0 + zetas[worst])
    return worst_loss, worst_grad
