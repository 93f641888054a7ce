"""Decision-focused portfolio optimization toolkit."""

from .market_data import (
    AssetBar,
    IngestionError,
    MarketFrame,
    ReturnPanel,
    SyntheticSpec,
    UniverseError,
    compute_returns,
    generate_synthetic,
    ingest_csv_dir,
)
from .features import FeatureTensor, IndicatorConfig, WarmupError, compute_indicators, standardize
from .solvers import (
    CovarianceEstimate,
    DecisionProblem,
    Portfolio,
    estimate_covariance,
    project_simplex,
    solve_fee,
    solve_fee_l2,
    solve_lp,
    solve_max_return,
    solve_max_sharpe,
)
from .spo import RobustConfig, SpoEvaluation, SpoInstance, robust_spo_loss, spo_plus
from .training import LinearPredictor, SearchSpace, TrainConfig, hyperparameter_search, predict, train
from .softmax_dfl import SoftmaxAllocator, allocate, dfl_loss, train_dfl
from .backtest import BacktestConfig, BacktestLedger, StrategySpec, default_roster, run_backtest
from .metrics import MetricsRow, compute_metrics, subperiod_report

__all__ = [name for name in dir() if not name.startswith("_")]
