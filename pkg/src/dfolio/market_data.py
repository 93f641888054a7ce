"""Market data layer: CSV ingestion, calendar alignment, return panels, synthetic markets."""

from __future__ import annotations

import csv
from bisect import bisect_left
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

CSV_HEADER = ("date", "open", "high", "low", "close", "adj_close", "volume")

# Soft requirement for running a real backtest; small frames are fine for unit work.
MIN_USABLE_ASSETS = 2
MIN_USABLE_DATES = 252


class IngestionError(ValueError):
    """A CSV file could not be parsed or a row violates bar invariants."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class UniverseError(ValueError):
    """The aligned universe is unusable (empty intersection, too few assets/dates)."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AssetBar:
    """One daily OHLCV bar for a single asset."""

    day: date
    open: float
    high: float
    low: float
    close: float
    adj_close: float
    volume: float

    def validate(self) -> None:
        if self.adj_close <= 0:
            raise ValueError("adj_close must be > 0")
        body_low = min(self.open, self.close)
        body_high = max(self.open, self.close)
        if not (self.low <= body_low and body_high <= self.high):
            raise ValueError("low <= min(open, close) <= max(open, close) <= high violated")
        if self.volume < 0:
            raise ValueError("volume must be >= 0")


@dataclass(frozen=True)
class MarketFrame:
    """Aligned date x asset panel of adjusted closes and volumes.

    Every (date, asset) cell is populated and dates are strictly increasing.
    Immutable after construction; safe to share across threads.
    """

    dates: tuple[date, ...]
    tickers: tuple[str, ...]
    adj_close: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        n_d, n_a = len(self.dates), len(self.tickers)
        if n_d == 0 or n_a == 0:
            raise UniverseError("empty market frame")
        if any(self.dates[i] >= self.dates[i + 1] for i in range(n_d - 1)):
            raise ValueError("dates must be strictly increasing")
        ac = np.asarray(self.adj_close, dtype=float)
        vol = np.asarray(self.volume, dtype=float)
        if ac.shape != (n_d, n_a) or vol.shape != (n_d, n_a):
            raise ValueError(f"panel shapes must be ({n_d}, {n_a})")
        if not np.all(np.isfinite(ac)) or np.any(ac <= 0):
            raise ValueError("adj_close must be finite and > 0")
        if not np.all(np.isfinite(vol)) or np.any(vol < 0):
            raise ValueError("volume must be finite and >= 0")
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "adj_close", _frozen(ac))
        object.__setattr__(self, "volume", _frozen(vol))

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.tickers)

    def index_of(self, day: date) -> int:
        """Index of `day` in the calendar; raises KeyError if absent."""
        i = bisect_left(self.dates, day)
        if i == len(self.dates) or self.dates[i] != day:
            raise KeyError(f"{day} not a trading day of this frame")
        return i

    def select(self, tickers: Sequence[str]) -> "MarketFrame":
        """Restrict to a subset of tickers (kept in this frame's sorted order)."""
        missing = [t for t in tickers if t not in self.tickers]
        if missing:
            raise UniverseError(f"unknown tickers: {', '.join(missing)}")
        keep = [i for i, t in enumerate(self.tickers) if t in set(tickers)]
        return MarketFrame(
            dates=self.dates,
            tickers=tuple(self.tickers[i] for i in keep),
            adj_close=self.adj_close[:, keep],
            volume=self.volume[:, keep],
        )

    def check_usable(self) -> None:
        if self.n_assets < MIN_USABLE_ASSETS or self.n_dates < MIN_USABLE_DATES:
            raise UniverseError(
                f"universe has {self.n_assets} assets / {self.n_dates} dates; "
                f"need >= {MIN_USABLE_ASSETS} assets and >= {MIN_USABLE_DATES} dates"
            )


@dataclass(frozen=True)
class ReturnPanel:
    """Daily simple and log returns; dates drop the first frame date."""

    dates: tuple[date, ...]
    simple_returns: np.ndarray
    log_returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "simple_returns", _frozen(self.simple_returns))
        object.__setattr__(self, "log_returns", _frozen(self.log_returns))


def compute_returns(frame: MarketFrame) -> ReturnPanel:
    """Simple and log return panels from adjusted closes.

    Row t corresponds to the move into frame.dates[t + 1].
    """
    if frame.n_dates < 2:
        raise ValueError("need at least 2 dates to compute returns")
    ratio = frame.adj_close[1:] / frame.adj_close[:-1]
    return ReturnPanel(
        dates=frame.dates[1:],
        simple_returns=ratio - 1.0,
        log_returns=np.log(ratio),
    )


def _parse_bar(path, line_no: int, row: list[str]) -> AssetBar:
    if len(row) != len(CSV_HEADER):
        raise IngestionError(path, line_no, f"expected {len(CSV_HEADER)} fields, got {len(row)}")
    try:
        day = date.fromisoformat(row[0])
    except ValueError as exc:
        raise IngestionError(path, line_no, f"bad date {row[0]!r}: {exc}") from None
    try:
        values = [float(v) for v in row[1:]]
    except ValueError as exc:
        raise IngestionError(path, line_no, str(exc)) from None
    bar = AssetBar(day, *values)
    try:
        bar.validate()
    except ValueError as exc:
        raise IngestionError(path, line_no, str(exc)) from None
    return bar


def read_ticker_csv(path) -> list[AssetBar]:
    """Parse one per-ticker OHLCV file, validating header and every bar."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(path, 1, "empty file") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise IngestionError(path, 1, f"bad header {header!r}, expected {','.join(CSV_HEADER)}")
        bars = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            bar = _parse_bar(path, line_no, row)
            if bars and bar.day <= bars[-1].day:
                raise IngestionError(path, line_no, f"dates not strictly increasing at {bar.day}")
            bars.append(bar)
    if not bars:
        raise IngestionError(path, 2, "no data rows")
    return bars


def load_series(path) -> dict[str, list[AssetBar]]:
    """Read every per-ticker CSV in a directory, keyed by filename stem."""
    path = Path(path)
    files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".csv")
    if not files:
        raise UniverseError(f"no input files in {path}")
    return {f.stem: read_ticker_csv(f) for f in files}


def align_series(series: dict[str, list[AssetBar]]) -> MarketFrame:
    """Restrict all tickers to their common trading dates, sorted ascending."""
    if not series:
        raise UniverseError("no ticker series to align")
    tickers = sorted(series)
    common = set(b.day for b in series[tickers[0]])
    for t in tickers[1:]:
        common &= set(b.day for b in series[t])
    if not common:
        raise UniverseError("empty date intersection across tickers")
    dates = tuple(sorted(common))
    adj_close = np.empty((len(dates), len(tickers)))
    volume = np.empty_like(adj_close)
    for j, t in enumerate(tickers):
        by_day = {b.day: b for b in series[t]}
        for i, d in enumerate(dates):
            bar = by_day[d]
            adj_close[i, j] = bar.adj_close
            volume[i, j] = bar.volume
    return MarketFrame(dates=dates, tickers=tuple(tickers), adj_close=adj_close, volume=volume)


def ingest_csv_dir(path) -> MarketFrame:
    """Ingest a directory of per-ticker CSVs into a calendar-aligned frame.

    The frame is restricted to the intersection of all assets' trading dates,
    sorted ascending; tickers are sorted lexicographically.
    """
    return align_series(load_series(path))


def write_csv_dir(frame: MarketFrame, out_dir) -> list[Path]:
    """Write one OHLCV CSV per ticker (flat bars: open=high=low=close=adj_close)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for j, t in enumerate(frame.tickers):
        p = out_dir / f"{t}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for i, d in enumerate(frame.dates):
                px = repr(float(frame.adj_close[i, j]))
                w.writerow([d.isoformat(), px, px, px, px, px, repr(float(frame.volume[i, j]))])
        written.append(p)
    return written


@dataclass(frozen=True)
class SyntheticSpec:
    """Seeded planted-signal market: next-day returns are linear in exogenous features."""

    n_assets: int
    n_days: int
    seed: int
    signal_coefficients: tuple[float, ...] = (0.01, -0.01, 0.005)
    noise_scale: float = 0.005
    regime_breaks: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.n_assets < 1 or self.n_days < 2:
            raise ValueError("need n_assets >= 1 and n_days >= 2")
        if self.noise_scale <= 0:
            raise ValueError("noise_scale must be > 0")
        for day, _mult in self.regime_breaks:
            if not 0 <= day < self.n_days:
                raise ValueError(f"regime break day {day} outside [0, {self.n_days})")
        object.__setattr__(self, "signal_coefficients", tuple(float(c) for c in self.signal_coefficients))
        object.__setattr__(self, "regime_breaks", tuple((int(d), float(m)) for d, m in self.regime_breaks))


def business_days(start: date, n: int) -> tuple[date, ...]:
    """`n` consecutive weekday dates from `start` (weekends skipped)."""
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return tuple(out)


def generate_synthetic(spec: SyntheticSpec):
    """Build (MarketFrame, FeatureTensor, true_coefficients) with a planted linear signal.

    returns[t+1, i] = beta . x[t, i] + eps[t, i]; eps is seeded Gaussian noise
    scaled by noise_scale and by any regime volatility multipliers (each break
    sets the multiplier from its day onward). Prices compound from 100.
    Deterministic given the spec.
    """
    from .features import FeatureTensor  # local import avoids module cycle

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    beta = np.array(spec.signal_coefficients, dtype=float)
    n, t_total, d = spec.n_assets, spec.n_days, beta.size

    x = rng.standard_normal((t_total, n, d))
    mult = np.ones(t_total)
    for day, m in spec.regime_breaks:
        mult[day:] = m
    eps = rng.standard_normal((t_total, n)) * spec.noise_scale
    # Return on day j is generated from features of day j-1 and the day-j regime.
    returns = np.empty((t_total, n))
    returns[0] = 0.0
    returns[1:] = x[:-1] @ beta + eps[1:] * mult[1:, None]
    returns = np.maximum(returns, -0.99)

    prices = 100.0 * np.cumprod(1.0 + returns, axis=0)
    volume = np.exp(rng.normal(np.log(1e6), 0.1, size=(t_total, n)))

    dates = business_days(date(2015, 1, 5), t_total)
    tickers = tuple(f"SYN{i:02d}" for i in range(n))
    frame = MarketFrame(dates=dates, tickers=tickers, adj_close=prices, volume=volume)
    tensor = FeatureTensor(
        dates=dates,
        tickers=tickers,
        features=x,
        feature_names=tuple(f"f{k}" for k in range(d)),
    )
    return frame, tensor, beta
