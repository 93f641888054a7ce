"""Linear predictor training (MSE / SPO+ / robust SPO+), Adam, and random search.

The predictor is a single coefficient vector shared across assets: for one
day's feature slice x (assets x features), predictions are x @ theta + b.
Batches are chronological contiguous slices, never shuffled, so training is
deterministic given the config.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .solvers import DecisionProblem, argmax_batch
from .spo import RobustConfig, perturbation_set, robust_spo_batch, spo_plus_batch
from .util import derived_rng, stable_seed

MSE = "mse"
SPO_PLUS = "spo_plus"
ROBUST_SPO = "robust_spo"
LOSS_KINDS = (MSE, SPO_PLUS, ROBUST_SPO)


class TrainingError(RuntimeError):
    pass


@dataclass
class LinearPredictor:
    theta: np.ndarray
    intercept: float = 0.0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(self.theta)) and np.isfinite(self.intercept)):
            raise ValueError("predictor parameters must be finite")


def predict(model: LinearPredictor, features: np.ndarray) -> np.ndarray:
    """Predicted returns for one day's asset x feature slice (or a stack of them)."""
    x = np.asarray(features, dtype=float)
    if x.shape[-1] != model.theta.size:
        raise ValueError(f"feature count {x.shape[-1]} != theta size {model.theta.size}")
    return x @ model.theta + model.intercept


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    count: int = 0

    @staticmethod
    def like(params: np.ndarray) -> "AdamState":
        return AdamState(m=np.zeros_like(params), v=np.zeros_like(params))


def adam_step(
    params: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> np.ndarray:
    """One Adam update; mutates state, returns the new parameters."""
    state.count += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1**state.count)
    v_hat = state.v / (1.0 - beta2**state.count)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass(frozen=True)
class TrainConfig:
    loss_kind: str = MSE
    epochs: int = 30
    learning_rate: float = 0.01
    batch_size: int = 63
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    fit_intercept: bool = True
    robust: RobustConfig | None = None
    problem: DecisionProblem = field(default_factory=DecisionProblem)

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        if not 1 <= self.epochs <= 1000:
            raise ValueError("epochs must be in [1, 1000]")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss_kind == ROBUST_SPO and self.robust is None:
            raise ValueError("robust loss requires a RobustConfig")


def train(features: np.ndarray, targets: np.ndarray, config: TrainConfig):
    """Mini-batch Adam on the configured per-sample loss.

    features: (T, n_assets, n_features); targets: (T, n_assets) next-day simple
    returns. Returns (LinearPredictor, per-epoch mean loss trace).
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if x.ndim != 3 or y.ndim != 2 or x.shape[:2] != y.shape:
        raise ValueError(f"misaligned features {x.shape} / targets {y.shape}")
    t_total, n, d = x.shape
    if t_total < config.batch_size:
        raise ValueError(f"{t_total} samples < batch size {config.batch_size}")

    theta = np.zeros(d)
    intercept = np.zeros(1)
    st_theta = AdamState.like(theta)
    st_b = AdamState.like(intercept)
    prob = config.problem

    w_star = None
    if config.loss_kind in (SPO_PLUS, ROBUST_SPO):
        w_star = argmax_batch(y, prob)

    starts = range(0, t_total, config.batch_size)
    trace: list[float] = []
    for epoch in range(config.epochs):
        loss_sum = 0.0
        for bi, s in enumerate(starts):
            xb = x[s : s + config.batch_size]
            yb = y[s : s + config.batch_size]
            r_hat = xb @ theta + intercept[0]
            if config.loss_kind == MSE:
                resid = r_hat - yb
                losses = (resid * resid).sum(axis=1)
                g_rhat = 2.0 * resid
            elif config.loss_kind == SPO_PLUS:
                losses, g_rhat, _, _ = spo_plus_batch(r_hat, yb, prob, w_star_rows=w_star[s : s + config.batch_size])
            else:
                rc = replace(config.robust, seed=stable_seed(config.seed, "robust", epoch, bi))
                zetas = perturbation_set(rc.rho, n, rc)
                losses, g_rhat = robust_spo_batch(r_hat, yb, prob, zetas, w_star_rows=w_star[s : s + config.batch_size])
            batch_loss = float(losses.mean())
            if not np.isfinite(batch_loss):
                raise TrainingError(
                    f"non-finite loss {batch_loss} at epoch {epoch}, batch {bi} ({config.loss_kind})"
                )
            loss_sum += float(losses.sum())
            scale = 1.0 / xb.shape[0]
            g_theta = np.einsum("bi,bid->d", g_rhat, xb) * scale
            theta = adam_step(theta, g_theta, st_theta, config.learning_rate, config.beta1, config.beta2, config.eps)
            if config.fit_intercept:
                g_b = np.array([g_rhat.sum() * scale])
                intercept = adam_step(intercept, g_b, st_b, config.learning_rate, config.beta1, config.beta2, config.eps)
        trace.append(loss_sum / t_total)
    if not np.all(np.isfinite(theta)) or not np.isfinite(intercept[0]):
        raise TrainingError("non-finite parameters after training")
    return LinearPredictor(theta=theta, intercept=float(intercept[0])), trace


@dataclass(frozen=True)
class SearchSpace:
    lr_min: float = 1e-4
    lr_max: float = 5e-2
    epochs_min: int = 20
    epochs_max: int = 40
    n_trials: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.lr_min <= self.lr_max:
            raise ValueError("need 0 < lr_min <= lr_max")
        if not 1 <= self.epochs_min <= self.epochs_max:
            raise ValueError("need 1 <= epochs_min <= epochs_max")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")


@dataclass(frozen=True)
class TrialResult:
    learning_rate: float
    epochs: int
    score: float


@dataclass(frozen=True)
class SearchResult:
    best: TrainConfig
    best_score: float
    trials: tuple[TrialResult, ...]
    traces: tuple[tuple[float, ...], ...] = ()  # per-trial epoch loss traces


def decision_value(y_rows: np.ndarray, w_rows: np.ndarray, prob: DecisionProblem) -> np.ndarray:
    """Realized value of decisions: r.w minus the problem's own fee on turnover."""
    value = (y_rows * w_rows).sum(axis=1)
    if prob.gamma > 0:
        value = value - prob.gamma * np.abs(w_rows - prob.w_prev.weights).sum(axis=1)
    return value


def validation_score(model: LinearPredictor, x_val, y_val, config: TrainConfig) -> float:
    """Trial score on held-out days: net decision value, or negated MSE for PtO."""
    r_hat = predict(model, x_val)
    if config.loss_kind == MSE:
        resid = r_hat - y_val
        return -float((resid * resid).sum(axis=1).mean())
    w_rows = argmax_batch(r_hat, config.problem)
    return float(decision_value(np.asarray(y_val), w_rows, config.problem).mean())


def hyperparameter_search(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    space: SearchSpace,
    base_config: TrainConfig,
) -> SearchResult:
    """Seeded random search over (learning rate, epochs), scored on the validation span.

    Callers are responsible for the validation span lying strictly after the
    training span; the backtest enforces that ordering by construction.
    """
    rng = derived_rng(space.seed, "hparam-search")
    lrs = np.exp(rng.uniform(np.log(space.lr_min), np.log(space.lr_max), space.n_trials))
    epoch_draws = rng.integers(space.epochs_min, space.epochs_max + 1, space.n_trials)
    trials = []
    configs = []
    traces = []
    for lr, ep in zip(lrs, epoch_draws):
        cfg = replace(base_config, learning_rate=float(lr), epochs=int(ep))
        model, trace = train(x_train, y_train, cfg)
        score = validation_score(model, x_val, y_val, cfg)
        trials.append(TrialResult(learning_rate=float(lr), epochs=int(ep), score=score))
        configs.append(cfg)
        traces.append(tuple(trace))
    best = int(np.argmax([t.score for t in trials]))
    return SearchResult(
        best=configs[best],
        best_score=trials[best].score,
        trials=tuple(trials),
        traces=tuple(traces),
    )
