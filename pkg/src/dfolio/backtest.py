"""Rolling-window, monthly-rebalanced backtest over a roster of strategies.

Protocol per rebalance date t: train on [t - 12m, t - 3m), tune on the
time-ordered validation span [t - 3m, t), retrain the chosen config on the
train span, and trade at t using only features dated strictly before t. The
trade is priced before day t's return accrues, so every decision is a pure
function of data strictly before t. A proportional fee of fee_rate * turnover
(turnover = l1 distance from the drifted pre-trade weights) is charged at
every rebalance, uniformly across strategies.
"""

from __future__ import annotations

import calendar
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date

import numpy as np

from .features import FeatureTensor, IndicatorConfig, compute_indicators, standardize
from .market_data import MarketFrame, ReturnPanel, compute_returns
from .solvers import (
    MAX_RETURN,
    MAX_RETURN_FEE,
    MAX_RETURN_FEE_L2,
    DecisionProblem,
    Portfolio,
    estimate_covariance,
    solve_fee,
    solve_fee_l2,
    solve_max_return,
    solve_max_sharpe,
)
from .softmax_dfl import MAX_RETURN_LOSS, MAX_SHARPE_LOSS, _forward, allocate, train_dfl
from .spo import RobustConfig
from .training import (
    MSE,
    ROBUST_SPO,
    SPO_PLUS,
    SearchSpace,
    TrainConfig,
    TrialResult,
    hyperparameter_search,
    predict,
    train,
)
from .util import derived_rng, span_indices, stable_seed

STRAT_SPO_PLUS = "spo_plus"
STRAT_SPO_FEE = "spo_plus_fee"
STRAT_SPO_FEE_L2 = "spo_plus_fee_l2"
STRAT_ROBUST = "robust_spo"
STRAT_SOFTMAX_RETURN = "softmax_max_return"
STRAT_SOFTMAX_SHARPE = "softmax_max_sharpe"
STRAT_PTO = "pto_markowitz"
STRAT_MAX_SHARPE = "max_sharpe"
STRATEGY_KINDS = (
    STRAT_SPO_PLUS,
    STRAT_SPO_FEE,
    STRAT_SPO_FEE_L2,
    STRAT_ROBUST,
    STRAT_SOFTMAX_RETURN,
    STRAT_SOFTMAX_SHARPE,
    STRAT_PTO,
    STRAT_MAX_SHARPE,
)


class AccountingError(RuntimeError):
    pass


@dataclass(frozen=True)
class StrategySpec:
    name: str
    kind: str
    gamma: float = 0.0
    lam: float = 0.0
    rho: float = 0.0
    robust_samples: int = 8
    hidden: int = 32

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.gamma < 0 or self.lam < 0:
            raise ValueError(f"strategy {self.name}: gamma/lam must be >= 0")
        if self.kind == STRAT_ROBUST and self.rho <= 0:
            raise ValueError(f"strategy {self.name}: robust_spo requires rho > 0")
        if self.kind == STRAT_SPO_FEE_L2 and self.lam <= 0:
            raise ValueError(f"strategy {self.name}: fee+l2 oracle requires lam > 0")
        if self.robust_samples < 1 or self.hidden < 1:
            raise ValueError(f"strategy {self.name}: counts must be >= 1")


def default_roster() -> tuple[StrategySpec, ...]:
    """The nine compared strategies with their stock parameter values."""
    return (
        StrategySpec("softmax_max_return", STRAT_SOFTMAX_RETURN),
        StrategySpec("softmax_max_sharpe", STRAT_SOFTMAX_SHARPE),
        StrategySpec("robust_spo_rho0.01", STRAT_ROBUST, rho=0.01),
        StrategySpec("robust_spo_rho0.1", STRAT_ROBUST, rho=0.1),
        StrategySpec("pto_markowitz", STRAT_PTO),
        StrategySpec("spo_plus_fee", STRAT_SPO_FEE, gamma=0.005),
        StrategySpec("spo_plus_fee_l2", STRAT_SPO_FEE_L2, gamma=0.005, lam=0.42),
        StrategySpec("spo_plus", STRAT_SPO_PLUS),
        StrategySpec("max_sharpe", STRAT_MAX_SHARPE),
    )


@dataclass(frozen=True)
class BacktestConfig:
    start: date
    end: date
    train_months: int = 9
    validation_months: int = 3
    fee_rate: float = 0.005
    seed: int = 0
    n_trials: int = 20
    lr_min: float = 1e-4
    lr_max: float = 5e-2
    epochs_min: int = 20
    epochs_max: int = 40
    batch_size: int = 63
    indicators: IndicatorConfig = field(default_factory=IndicatorConfig)

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("start must be <= end")
        if self.fee_rate < 0:
            raise ValueError("fee_rate must be >= 0")
        if self.train_months < 1 or self.validation_months < 1:
            raise ValueError("window months must be >= 1")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")

    @property
    def lookback_months(self) -> int:
        return self.train_months + self.validation_months


def months_back(day: date, months: int) -> date:
    """Same day-of-month `months` earlier, clamped to the target month's length."""
    y, m = day.year, day.month - months
    while m <= 0:
        m += 12
        y -= 1
    return date(y, m, min(day.day, calendar.monthrange(y, m)[1]))


def rebalance_dates(frame: MarketFrame, config: BacktestConfig) -> list[date]:
    """First trading day of each month in [start, end] with a full lookback behind it."""
    first_of_month: dict[tuple[int, int], date] = {}
    for d in frame.dates:
        key = (d.year, d.month)
        if key not in first_of_month:
            first_of_month[key] = d
    out = []
    for key in sorted(first_of_month):
        c = first_of_month[key]
        if c < config.start or c > config.end:
            continue
        if months_back(c, config.lookback_months) >= frame.dates[0]:
            out.append(c)
    if not out:
        raise ValueError(
            f"no rebalance dates in [{config.start}, {config.end}] with a "
            f"{config.lookback_months}-month lookback inside the frame"
        )
    return out


@dataclass(frozen=True)
class BacktestData:
    """Frame plus derived panels computed once per backtest."""

    frame: MarketFrame
    panel: ReturnPanel
    features: FeatureTensor

    @property
    def warmup(self) -> int:
        return self.frame.n_dates - len(self.features.dates)


def prepare_data(frame: MarketFrame, config: BacktestConfig) -> BacktestData:
    return BacktestData(
        frame=frame,
        panel=compute_returns(frame),
        features=compute_indicators(frame, config.indicators),
    )


@dataclass(frozen=True)
class WindowDiagnostics:
    rebalance: date
    train_start: date
    val_start: date
    learning_rate: float | None = None
    epochs: int | None = None
    score: float | None = None


@dataclass
class RebalanceRecord:
    day: date
    target: np.ndarray
    drifted: np.ndarray
    turnover: float
    fee: float
    nav_before: float
    nav_after_fee: float
    diagnostics: WindowDiagnostics | None = None


@dataclass
class BacktestLedger:
    strategy: str
    nav_dates: list = field(default_factory=list)
    nav: list = field(default_factory=list)
    rebalances: list = field(default_factory=list)
    live_weights: np.ndarray | None = None
    error: str | None = None


def _strategy_problem(strategy: StrategySpec, w_prev: Portfolio) -> DecisionProblem:
    if strategy.kind == STRAT_SPO_FEE:
        return DecisionProblem(kind=MAX_RETURN_FEE, gamma=strategy.gamma, w_prev=w_prev)
    if strategy.kind == STRAT_SPO_FEE_L2:
        return DecisionProblem(
            kind=MAX_RETURN_FEE_L2, gamma=strategy.gamma, lam=strategy.lam, w_prev=w_prev
        )
    return DecisionProblem(kind=MAX_RETURN)


def _window_samples(data: BacktestData, tensor: FeatureTensor, start: date, end: date, it: int):
    """Feature/target rows with dates in [start, end) and targets strictly before t."""
    warm = data.warmup
    rows = span_indices(tensor.dates, start, end)
    keep = [k for k in rows if k + warm + 1 < it]
    x = tensor.features[keep]
    y = data.panel.simple_returns[[k + warm for k in keep]]
    return x, y


def run_window(
    strategy: StrategySpec,
    t: date,
    data: BacktestData,
    config: BacktestConfig,
    w_prev: Portfolio,
):
    """Train (if the strategy trains), tune, and decide the portfolio held from t.

    Uses only data strictly before t: features are standardized on the train
    span, validation targets stop at the last return before t, and the
    decision consumes the latest feature slice preceding t.
    """
    frame = data.frame
    it = frame.index_of(t)
    train_start = months_back(t, config.lookback_months)
    val_start = months_back(t, config.validation_months)
    diag = WindowDiagnostics(rebalance=t, train_start=train_start, val_start=val_start)

    if strategy.kind == STRAT_MAX_SHARPE:
        rows = span_indices(data.panel.dates, train_start, t)
        est = estimate_covariance(data.panel.simple_returns[rows.start : rows.stop])
        return solve_max_sharpe(est), diag

    tensor = standardize(data.features, train_start, val_start)
    x_train, y_train = _window_samples(data, tensor, train_start, val_start, it)
    x_val, y_val = _window_samples(data, tensor, val_start, t, it)
    k_dec = it - 1 - data.warmup
    if k_dec < 0:
        raise ValueError(f"no feature row available before {t} (warm-up too long)")
    decision_slice = tensor.features[k_dec]

    space = SearchSpace(
        lr_min=config.lr_min,
        lr_max=config.lr_max,
        epochs_min=config.epochs_min,
        epochs_max=config.epochs_max,
        n_trials=config.n_trials,
        seed=stable_seed(config.seed, strategy.name, t, "search"),
    )

    if strategy.kind in (STRAT_SOFTMAX_RETURN, STRAT_SOFTMAX_SHARPE):
        dfl_kind = MAX_RETURN_LOSS if strategy.kind == STRAT_SOFTMAX_RETURN else MAX_SHARPE_LOSS
        model, trial = _search_softmax(strategy, dfl_kind, x_train, y_train, x_val, y_val, space, config)
        diag = replace(diag, learning_rate=trial.learning_rate, epochs=trial.epochs, score=trial.score)
        return allocate(model, decision_slice), diag

    problem = _strategy_problem(strategy, w_prev)
    base = TrainConfig(
        loss_kind=_loss_kind(strategy),
        batch_size=config.batch_size,
        seed=stable_seed(config.seed, strategy.name, t, "train"),
        problem=problem,
        robust=(
            RobustConfig(
                rho=strategy.rho,
                n_samples=strategy.robust_samples,
                seed=stable_seed(config.seed, strategy.name, t, "robust"),
            )
            if strategy.kind == STRAT_ROBUST
            else None
        ),
    )
    result = hyperparameter_search(x_train, y_train, x_val, y_val, space, base)
    model, _ = train(x_train, y_train, result.best)
    r_hat = predict(model, decision_slice)
    diag = replace(
        diag,
        learning_rate=result.best.learning_rate,
        epochs=result.best.epochs,
        score=result.best_score,
    )
    if strategy.kind == STRAT_SPO_FEE:
        return solve_fee(r_hat, problem), diag
    if strategy.kind == STRAT_SPO_FEE_L2:
        return solve_fee_l2(r_hat, problem), diag
    return solve_max_return(r_hat), diag


def _loss_kind(strategy: StrategySpec) -> str:
    if strategy.kind == STRAT_PTO:
        return MSE
    if strategy.kind == STRAT_ROBUST:
        return ROBUST_SPO
    return SPO_PLUS


def _search_softmax(strategy, dfl_kind, x_train, y_train, x_val, y_val, space, config):
    """Random search for the softmax allocator, scored by realized validation return."""
    rng = derived_rng(space.seed, "hparam-search")
    lrs = np.exp(rng.uniform(np.log(space.lr_min), np.log(space.lr_max), space.n_trials))
    epoch_draws = rng.integers(space.epochs_min, space.epochs_max + 1, space.n_trials)
    est = estimate_covariance(y_train) if dfl_kind == MAX_SHARPE_LOSS else None
    best = None
    best_model = None
    for lr, ep in zip(lrs, epoch_draws):
        cfg = TrainConfig(
            learning_rate=float(lr),
            epochs=int(ep),
            batch_size=config.batch_size,
            seed=stable_seed(space.seed, "softmax-train"),
        )
        model, _ = train_dfl(x_train, y_train, dfl_kind, cfg, hidden=strategy.hidden, est=est)
        *_, w_rows = _forward(model, np.asarray(x_val))
        score = float((np.asarray(y_val) * w_rows).sum(axis=1).mean())
        trial = TrialResult(learning_rate=float(lr), epochs=int(ep), score=score)
        if best is None or trial.score > best.score:
            best, best_model = trial, model
    return best_model, best


def accrue(
    ledger: BacktestLedger,
    target: Portfolio,
    day_dates,
    day_returns: np.ndarray,
    fee_rate: float,
    diagnostics: WindowDiagnostics | None = None,
) -> None:
    """Charge the rebalance fee against drifted holdings, then compound daily.

    day_returns rows cover the holding period (the rebalance day itself through
    the day before the next rebalance); weights drift buy-and-hold within it.
    """
    drifted = ledger.live_weights
    turnover = float(np.abs(target.weights - drifted).sum())
    nav_before = ledger.nav[-1]
    nav = nav_before * (1.0 - fee_rate * turnover)
    fee = fee_rate * turnover * nav_before
    if nav <= 0:
        raise AccountingError(f"NAV {nav} <= 0 after fee at {day_dates[0] if len(day_dates) else '?'}")
    ledger.rebalances.append(
        RebalanceRecord(
            day=day_dates[0],
            target=target.weights.copy(),
            drifted=np.array(drifted, dtype=float),
            turnover=turnover,
            fee=fee,
            nav_before=nav_before,
            nav_after_fee=nav,
            diagnostics=diagnostics,
        )
    )
    w = target.weights.copy()
    for day, r in zip(day_dates, day_returns):
        day_ret = float(w @ r)
        nav *= 1.0 + day_ret
        if nav <= 0 or not np.isfinite(nav):
            raise AccountingError(f"NAV {nav} invalid on {day}")
        w = w * (1.0 + r) / (1.0 + day_ret)
        ledger.nav_dates.append(day)
        ledger.nav.append(nav)
    ledger.live_weights = w


def _run_strategy(strategy, rebs, data, config):
    frame = data.frame
    n = frame.n_assets
    i0 = frame.index_of(rebs[0])
    ledger = BacktestLedger(
        strategy=strategy.name,
        nav_dates=[frame.dates[i0 - 1]],
        nav=[1.0],
        live_weights=np.full(n, 1.0 / n),
    )
    boundaries = [frame.index_of(t) for t in rebs] + [frame.n_dates]
    for k, t in enumerate(rebs):
        target, diag = run_window(strategy, t, data, config, w_prev=Portfolio(ledger.live_weights))
        it, it_end = boundaries[k], boundaries[k + 1]
        accrue(
            ledger,
            target,
            frame.dates[it:it_end],
            data.panel.simple_returns[it - 1 : it_end - 1],
            config.fee_rate,
            diagnostics=diag,
        )
    return ledger


def run_backtest(
    frame: MarketFrame,
    roster: tuple[StrategySpec, ...] | None = None,
    config: BacktestConfig | None = None,
) -> dict[str, BacktestLedger]:
    """Run every strategy over identical rebalance dates and fee regime.

    Per-strategy failures are isolated: the failing ledger carries the error
    message and the remaining strategies still complete. Set DFOLIO_THREADS>1
    to run strategies concurrently (results are order- and value-deterministic
    either way).
    """
    if config is None:
        raise ValueError("config is required")
    if roster is None:
        roster = default_roster()
    names = [s.name for s in roster]
    if len(set(names)) != len(names):
        raise ValueError("duplicate strategy names in roster")
    frame.check_usable()
    data = prepare_data(frame, config)
    rebs = rebalance_dates(frame, config)

    def one(strategy: StrategySpec) -> BacktestLedger:
        try:
            return _run_strategy(strategy, rebs, data, config)
        except Exception as exc:  # noqa: BLE001 - isolation contract
            return BacktestLedger(strategy=strategy.name, error=f"{type(exc).__name__}: {exc}")

    workers = int(os.environ.get("DFOLIO_THREADS", "1") or "1")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ledgers = list(pool.map(one, roster))
    else:
        ledgers = [one(s) for s in roster]
    return {s.name: led for s, led in zip(roster, ledgers)}
