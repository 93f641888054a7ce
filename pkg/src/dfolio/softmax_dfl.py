"""End-to-end softmax allocator: linear inferencer -> small relu net -> softmax weights.

Trained directly on realized portfolio performance (negative return, or a
negative Sharpe surrogate with the covariance estimated once per training
window), with hand-written backpropagation; no optimization layer in the
forward pass, so the output is a valid portfolio by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solvers import CovarianceEstimate, Portfolio, estimate_covariance
from .training import AdamState, LinearPredictor, TrainConfig, TrainingError, adam_step, predict
from .util import derived_rng

MAX_RETURN_LOSS = "max_return"
MAX_SHARPE_LOSS = "max_sharpe"
DFL_LOSS_KINDS = (MAX_RETURN_LOSS, MAX_SHARPE_LOSS)


@dataclass
class SoftmaxAllocator:
    """Inferencer producing per-asset return estimates plus a one-hidden-layer head."""

    inferencer: LinearPredictor
    w1: np.ndarray  # (hidden, n_assets)
    b1: np.ndarray
    w2: np.ndarray  # (n_assets, hidden)
    b2: np.ndarray

    @property
    def n_assets(self) -> int:
        return self.w1.shape[1]


def init_allocator(n_assets: int, n_features: int, hidden: int = 32, seed: int = 0) -> SoftmaxAllocator:
    """Seeded uniform +-1/sqrt(fan_in) init for the head; zero inferencer."""
    rng = derived_rng(seed, "softmax-init", n_assets, n_features, hidden)
    bound1 = 1.0 / np.sqrt(n_assets)
    bound2 = 1.0 / np.sqrt(hidden)
    return SoftmaxAllocator(
        inferencer=LinearPredictor(theta=np.zeros(n_features)),
        w1=rng.uniform(-bound1, bound1, size=(hidden, n_assets)),
        b1=rng.uniform(-bound1, bound1, size=hidden),
        w2=rng.uniform(-bound2, bound2, size=(n_assets, hidden)),
        b2=rng.uniform(-bound2, bound2, size=n_assets),
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(model: SoftmaxAllocator, x: np.ndarray):
    """Batched forward pass; x is (batch, n_assets, n_features)."""
    r_hat = predict(model.inferencer, x)
    pre1 = r_hat @ model.w1.T + model.b1
    h = np.maximum(pre1, 0.0)
    logits = h @ model.w2.T + model.b2
    return r_hat, pre1, h, logits, _softmax(logits)


def allocate(model: SoftmaxAllocator, features: np.ndarray) -> Portfolio:
    """Map one day's asset x feature slice to softmax portfolio weights."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[0] != model.n_assets:
        raise ValueError(f"expected ({model.n_assets}, n_features) slice, got {x.shape}")
    *_, w = _forward(model, x[None, :, :])
    return Portfolio(w[0])


def dfl_loss(
    weights,
    realized: np.ndarray,
    kind: str = MAX_RETURN_LOSS,
    est: CovarianceEstimate | None = None,
) -> float:
    """Negative realized return, or the negative Sharpe surrogate given Sigma."""
    w = weights.weights if isinstance(weights, Portfolio) else np.asarray(weights, dtype=float)
    r = np.asarray(realized, dtype=float)
    if w.shape != r.shape:
        raise ValueError("weights and realized returns must have matching shape")
    if kind == MAX_RETURN_LOSS:
        return -float(r @ w)
    if kind != MAX_SHARPE_LOSS:
        raise ValueError(f"unknown loss kind {kind!r}")
    if est is None:
        raise ValueError("max_sharpe loss requires a covariance estimate")
    var = float(w @ est.loaded @ w)
    if var <= 0:
        raise ValueError("zero portfolio variance: degenerate covariance")
    return -float(r @ w) / np.sqrt(var)


def _loss_and_weight_grad(z: np.ndarray, y: np.ndarray, kind: str, sigma: np.ndarray | None):
    """Per-sample loss and dLoss/dWeights for a batch of softmax outputs."""
    if kind == MAX_RETURN_LOSS:
        losses = -(y * z).sum(axis=1)
        dz = -y
        return losses, dz
    a = (y * z).sum(axis=1)
    sz = z @ sigma
    q = (z * sz).sum(axis=1)
    if np.any(q <= 0):
        raise ValueError("zero portfolio variance: degenerate covariance")
    losses = -a / np.sqrt(q)
    dz = -y / np.sqrt(q)[:, None] + (a / q**1.5)[:, None] * sz
    return losses, dz


def batch_gradients(model: SoftmaxAllocator, xb: np.ndarray, yb: np.ndarray, kind: str, sigma):
    """Mean loss over the batch and gradients for every parameter group."""
    r_hat, pre1, h, _, z = _forward(model, xb)
    losses, dz = _loss_and_weight_grad(z, yb, kind, sigma)
    b = xb.shape[0]
    # softmax Jacobian: diag(z) - z z^T applied to dz
    dlogits = z * (dz - (z * dz).sum(axis=1, keepdims=True))
    grads = {
        "w2": np.einsum("bi,bh->ih", dlogits, h) / b,
        "b2": dlogits.mean(axis=0),
    }
    dh = dlogits @ model.w2
    dpre1 = dh * (pre1 > 0)
    grads["w1"] = np.einsum("bh,bi->hi", dpre1, r_hat) / b
    grads["b1"] = dpre1.mean(axis=0)
    dr_hat = dpre1 @ model.w1
    grads["theta"] = np.einsum("bi,bid->d", dr_hat, xb) / b
    grads["intercept"] = np.array([dr_hat.sum(axis=1).mean()])
    return float(losses.mean()), float(losses.sum()), grads


def train_dfl(
    features: np.ndarray,
    returns: np.ndarray,
    kind: str,
    config: TrainConfig,
    hidden: int = 32,
    est: CovarianceEstimate | None = None,
):
    """Adam training of the allocator on realized-performance losses.

    For the Sharpe loss, Sigma is estimated once from the training-window
    returns (unless an estimate is supplied) and held fixed.
    """
    if kind not in DFL_LOSS_KINDS:
        raise ValueError(f"unknown loss kind {kind!r}")
    x = np.asarray(features, dtype=float)
    y = np.asarray(returns, dtype=float)
    if x.ndim != 3 or x.shape[:2] != y.shape:
        raise ValueError(f"misaligned features {x.shape} / returns {y.shape}")
    t_total, n, d = x.shape
    if t_total < config.batch_size:
        raise ValueError(f"{t_total} samples < batch size {config.batch_size}")
    sigma = None
    if kind == MAX_SHARPE_LOSS:
        if est is None:
            est = estimate_covariance(y)
        sigma = est.loaded

    model = init_allocator(n, d, hidden=hidden, seed=config.seed)
    params = {
        "theta": model.inferencer.theta,
        "intercept": np.array([model.inferencer.intercept]),
        "w1": model.w1,
        "b1": model.b1,
        "w2": model.w2,
        "b2": model.b2,
    }
    states = {k: AdamState.like(v) for k, v in params.items()}

    trace: list[float] = []
    for epoch in range(config.epochs):
        loss_sum = 0.0
        for s in range(0, t_total, config.batch_size):
            xb, yb = x[s : s + config.batch_size], y[s : s + config.batch_size]
            _sync(model, params)
            mean_loss, sum_loss, grads = batch_gradients(model, xb, yb, kind, sigma)
            if not np.isfinite(mean_loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, offset {s} ({kind})")
            loss_sum += sum_loss
            for k in params:
                params[k] = adam_step(
                    params[k], grads[k], states[k], config.learning_rate,
                    config.beta1, config.beta2, config.eps,
                )
        trace.append(loss_sum / t_total)
    _sync(model, params)
    return model, trace


def _sync(model: SoftmaxAllocator, params: dict) -> None:
    model.inferencer.theta = params["theta"]
    model.inferencer.intercept = float(params["intercept"][0])
    model.w1 = params["w1"]
    model.b1 = params["b1"]
    model.w2 = params["w2"]
    model.b2 = params["b2"]
