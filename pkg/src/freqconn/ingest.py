"""Turn raw tick data into the daily log-volatility panel the estimator consumes.

Pipeline: tick CSV -> calendar filtering -> fixed intraday return grid
(previous-tick interpolation) -> daily bi-power variation -> aligned
multi-symbol panel. Also hosts the synthetic VAR panel generator used as a
test fixture throughout the toolkit.

Scale conventions: bi-power variation is a daily *variance*-scale quantity.
``transform="sqrt"`` stores its square root (a daily volatility),
``transform="log"`` stores ``log(sqrt(BPV))``, which is the scale the
estimator is normally fit on.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, NumericError, UsageError

log = logging.getLogger(__name__)

TRANSFORMS = ("raw", "sqrt", "log")

SECONDS_PER_DAY = 86_400


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TickSeries:
    """Irregularly spaced timestamped prices for one instrument.

    Timestamps are UTC, microsecond resolution, strictly increasing;
    all prices are positive.
    """

    symbol: str
    timestamps: np.ndarray  # datetime64[us], strictly increasing
    prices: np.ndarray      # float64, > 0

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[us]")
        px = np.asarray(self.prices, dtype=float)
        if ts.shape != px.shape or ts.ndim != 1:
            raise DataError("timestamps and prices must be 1-d arrays of equal length")
        if len(ts) == 0:
            raise DataError(f"{self.symbol}: empty tick series")
        if len(ts) > 1 and not (np.diff(ts.astype("int64")) > 0).all():
            raise DataError(f"{self.symbol}: timestamps must be strictly increasing")
        if not (px > 0).all():
            raise DataError(f"{self.symbol}: all prices must be positive")
        ts.setflags(write=False)
        px.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "prices", px)

    def __len__(self) -> int:
        return len(self.prices)


@dataclass(frozen=True)
class ReturnGrid:
    """Log returns of one trading day on a fixed intraday grid."""

    symbol: str
    trading_day: dt.date
    returns: np.ndarray
    grid_spacing: dt.timedelta = dt.timedelta(minutes=5)

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)


@dataclass(frozen=True)
class CalendarRules:
    """Date exclusions applied before resampling.

    ``fixed_exclusion_windows`` are (month, day) pairs, inclusive on both
    ends; a window may wrap the year end (e.g. Dec 31 - Jan 2).
    """

    weekend_exclusion: bool = True
    fixed_exclusion_windows: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = ()
    holiday_list: frozenset[dt.date] = frozenset()

    def __post_init__(self):
        for (sm, sd), (em, ed) in self.fixed_exclusion_windows:
            for m, d in ((sm, sd), (em, ed)):
                if not (1 <= m <= 12 and 1 <= d <= 31):
                    raise UsageError(f"invalid month-day pair ({m}, {d}) in exclusion window")

    def excludes(self, day: dt.date) -> bool:
        if self.weekend_exclusion and day.weekday() >= 5:
            return True
        if day in self.holiday_list:
            return True
        md = (day.month, day.day)
        for start, end in self.fixed_exclusion_windows:
            if start <= end:
                if start <= md <= end:
                    return True
            elif md >= start or md <= end:  # wraps the year end
                return True
        return False


def low_activity_rules(holidays: Iterable[dt.date] = ()) -> CalendarRules:
    """Default exclusion set: weekends, Dec 24-26, Dec 31 - Jan 2, plus any
    explicitly supplied holidays."""
    return CalendarRules(
        weekend_exclusion=True,
        fixed_exclusion_windows=(((12, 24), (12, 26)), ((12, 31), (1, 2))),
        holiday_list=frozenset(holidays),
    )


@dataclass(frozen=True)
class VolatilityPanel:
    """T x k matrix of daily (transformed) realized volatilities on a shared
    strictly increasing date index. No missing cells; k >= 2."""

    dates: tuple[dt.date, ...]
    symbols: tuple[str, ...]
    values: np.ndarray  # (T, k)
    transform_tag: str = "log"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape != (len(self.dates), len(self.symbols)):
            raise DataError("panel values must be a (T, k) matrix matching dates/symbols")
        if len(self.symbols) < 2:
            raise DataError("panel needs at least 2 symbols")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("panel dates must be strictly increasing")
        if not np.isfinite(vals).all():
            raise DataError("panel contains non-finite cells")
        if self.transform_tag not in TRANSFORMS:
            raise UsageError(f"unknown transform tag {self.transform_tag!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "symbols", tuple(self.symbols))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class PanelStats:
    """Per-symbol descriptive statistics (kurtosis is the raw fourth
    standardized moment, not excess)."""

    symbols: tuple[str, ...]
    mean: np.ndarray
    median: np.ndarray
    std: np.ndarray
    skewness: np.ndarray
    kurtosis: np.ndarray

    STAT_NAMES = ("mean", "median", "std", "skewness", "kurtosis")

    def to_csv_text(self) -> str:
        out = ["statistic," + ",".join(self.symbols)]
        for name in self.STAT_NAMES:
            vals = getattr(self, name)
            out.append(name + "," + ",".join(_fmt(v) for v in vals))
        return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# tick loading and filtering
# ---------------------------------------------------------------------------

def _parse_timestamp(text: str, lineno: int) -> np.datetime64:
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        stamp = dt.datetime.fromisoformat(s)
    except ValueError:
        raise DataError(f"line {lineno}: unparseable timestamp {text!r}") from None
    if stamp.tzinfo is None:
        raise DataError(f"line {lineno}: timestamp {text!r} lacks a UTC offset")
    stamp = stamp.astimezone(dt.timezone.utc).replace(tzinfo=None)
    return np.datetime64(stamp, "us")


def load_ticks(source: str | Path | IO, symbol: str) -> TickSeries:
    """Parse a tick CSV (header ``timestamp,price``) into a TickSeries.

    Rows must be time-ordered; an out-of-order row is rejected with its line
    number. Rows sharing a timestamp are collapsed keeping the last price.
    """
    if hasattr(source, "read"):
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    else:
        text = Path(source).read_text(encoding="utf-8")
    lines = text.lstrip("﻿").splitlines()
    if not lines:
        raise DataError(f"{symbol}: empty input")
    header = lines[0].strip().lower()
    if header != "timestamp,price":
        raise DataError(f"line 1: expected header 'timestamp,price', got {lines[0]!r}")

    stamps: list[np.datetime64] = []
    prices: list[float] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise DataError(f"line {lineno}: expected 2 fields, got {len(parts)}")
        ts = _parse_timestamp(parts[0], lineno)
        try:
            price = float(parts[1])
        except ValueError:
            raise DataError(f"line {lineno}: unparseable price {parts[1]!r}") from None
        if not math.isfinite(price) or price <= 0:
            raise DataError(f"line {lineno}: non-positive price {parts[1].strip()}")
        if stamps:
            if ts < stamps[-1]:
                raise DataError(f"line {lineno}: out-of-order timestamp {parts[0].strip()}")
            if ts == stamps[-1]:  # duplicate instant: last price wins
                prices[-1] = price
                continue
        stamps.append(ts)
        prices.append(price)
    if not stamps:
        raise DataError(f"{symbol}: no data rows")
    return TickSeries(symbol, np.array(stamps, dtype="datetime64[us]"), np.array(prices))


def filter_calendar(ticks: TickSeries, rules: CalendarRules) -> TickSeries:
    """Drop every observation falling on an excluded date; order preserved."""
    days = ticks.timestamps.astype("datetime64[D]")
    uniq = np.unique(days)
    keep_day = {d: not rules.excludes(d.astype(object)) for d in uniq}
    mask = np.array([keep_day[d] for d in days])
    if mask.all():
        return ticks
    if not mask.any():
        raise DataError(f"{ticks.symbol}: calendar rules exclude every observation")
    return TickSeries(ticks.symbol, ticks.timestamps[mask], ticks.prices[mask])


# ---------------------------------------------------------------------------
# resampling and bi-power variation
# ---------------------------------------------------------------------------

def resample_grid(
    ticks: TickSeries,
    spacing: dt.timedelta = dt.timedelta(minutes=5),
    session: tuple[int, int] = (0, SECONDS_PER_DAY),
) -> list[ReturnGrid]:
    """Extract fixed-interval log returns for each day via previous-tick
    interpolation.

    ``session`` gives the session start/end as seconds of the UTC day
    (end may be 86400). Each grid point takes the last price observed at or
    before it within the day; grid points before the day's first tick carry
    no price. Days with fewer than 2 priced grid points are skipped with a
    warning.
    """
    step = int(spacing.total_seconds())
    start_s, end_s = session
    if step <= 0:
        raise UsageError("grid spacing must be positive")
    if not (0 <= start_s < end_s <= SECONDS_PER_DAY):
        raise UsageError(f"invalid session ({start_s}, {end_s})")
    if (end_s - start_s) % step != 0:
        raise UsageError("grid spacing must divide the session length")

    offsets = np.arange(start_s, end_s + 1, step).astype("timedelta64[s]")
    days = ticks.timestamps.astype("datetime64[D]")
    out: list[ReturnGrid] = []
    for day in np.unique(days):
        sel = days == day
        ts = ticks.timestamps[sel].astype("datetime64[us]")
        px = ticks.prices[sel]
        grid = (day.astype("datetime64[s]") + offsets).astype("datetime64[us]")
        idx = np.searchsorted(ts, grid, side="right") - 1
        priced = idx >= 0
        if priced.sum() < 2:
            log.warning("day_skipped symbol=%s date=%s reason=insufficient_grid_prices",
                        ticks.symbol, day)
            continue
        logp = np.log(px[idx[priced]])
        out.append(ReturnGrid(ticks.symbol, day.astype(object), np.diff(logp), spacing))
    return out


MU1 = math.sqrt(2.0 / math.pi)  # E|Z| for standard normal Z


def bipower_variation(day: ReturnGrid) -> float:
    """Jump-robust daily variance estimate:
    ``mu1**-2 * sum(|r_t| * |r_{t-1}|)`` over adjacent intraday returns."""
    r = day.returns
    if len(r) < 2:
        raise DataError(f"{day.symbol} {day.trading_day}: insufficient intraday returns")
    a = np.abs(r)
    return float(np.sum(a[1:] * a[:-1]) / MU1**2)


# ---------------------------------------------------------------------------
# panel assembly
# ---------------------------------------------------------------------------

def _apply_transform(bpv: float, transform: str, symbol: str, day: dt.date) -> float:
    if transform == "raw":
        return bpv
    if bpv <= 0:
        raise DataError(f"{symbol} {day}: non-positive BPV {bpv!r} under {transform!r} transform")
    root = math.sqrt(bpv)
    return root if transform == "sqrt" else math.log(root)


def build_panel(
    per_symbol_daily: Mapping[str, Sequence[tuple[dt.date, float]]],
    transform: str = "log",
) -> VolatilityPanel:
    """Inner-join per-symbol daily series on dates and apply the cell-wise
    transform. ``log`` means log of the square root of BPV (volatility
    scale); see module docstring."""
    if transform not in TRANSFORMS:
        raise UsageError(f"transform must be one of {TRANSFORMS}, got {transform!r}")
    if len(per_symbol_daily) < 2:
        raise DataError("panel needs at least 2 symbols")
    symbols = tuple(per_symbol_daily)
    maps = {s: dict(rows) for s, rows in per_symbol_daily.items()}
    shared = set(maps[symbols[0]])
    for s in symbols[1:]:
        shared &= set(maps[s])
    if not shared:
        raise DataError("no dates shared by all symbols")
    dates = tuple(sorted(shared))
    values = np.empty((len(dates), len(symbols)))
    for j, s in enumerate(symbols):
        for i, d in enumerate(dates):
            values[i, j] = _apply_transform(maps[s][d], transform, s, d)
    return VolatilityPanel(dates, symbols, values, transform_tag=transform)


def summary_stats(panel: VolatilityPanel) -> PanelStats:
    """Per-symbol mean, median, sample std, skewness, and (non-excess)
    kurtosis. Zero-variance columns get NaN skewness/kurtosis."""
    x = panel.values
    if x.shape[0] < 2:
        raise DataError("summary statistics need T >= 2")
    mean = x.mean(axis=0)
    centered = x - mean
    m2 = (centered**2).mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        skew = np.where(m2 > 0, (centered**3).mean(axis=0) / m2**1.5, np.nan)
        kurt = np.where(m2 > 0, (centered**4).mean(axis=0) / m2**2, np.nan)
    return PanelStats(
        symbols=panel.symbols,
        mean=mean,
        median=np.median(x, axis=0),
        std=x.std(axis=0, ddof=1),
        skewness=skew,
        kurtosis=kurt,
    )


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

def synth_var_panel(
    model,
    n_periods: int,
    seed,
    start_date: dt.date = dt.date(2000, 1, 3),
    transform_tag: str = "log",
) -> VolatilityPanel:
    """Simulate a panel from a stable VAR with Gaussian innovations.

    Deterministic given ``seed``; a burn-in of ``max(1000, 10 p)`` draws is
    discarded. Dates are consecutive calendar days from ``start_date``.
    """
    from .varcore import stability  # local import to avoid a module cycle

    stable, radius = stability(model)
    if not stable:
        raise NumericError(f"generator VAR is unstable (spectral radius {radius:.6g})")
    values = simulate_var(model, n_periods, seed)
    dates = tuple(start_date + dt.timedelta(days=i) for i in range(n_periods))
    return VolatilityPanel(dates, model.variable_names, values, transform_tag=transform_tag)


def simulate_var(model, n_periods: int, seed) -> np.ndarray:
    """Simulate ``n_periods`` observations from a VAR after burn-in.

    ``seed`` may be anything accepted by ``numpy.random.default_rng``;
    replicate streams are derived by seeding with (seed, replicate) tuples
    upstream, so parallel execution never changes output.
    """
    try:
        chol = np.linalg.cholesky(model.sigma)
    except np.linalg.LinAlgError:
        raise NumericError("innovation covariance is not positive definite") from None
    burn = max(1000, 10 * model.p)
    total = burn + n_periods
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((total, model.k)) @ chol.T
    return _var_recursion(model, eps)[burn:]


def _var_recursion(model, eps: np.ndarray) -> np.ndarray:
    """Run x_t = c + sum_j Phi_j x_{t-j} + eps_t from a zero start.
    ``eps`` may be (T, k) or batched (T, reps, k)."""
    p, k = model.p, model.k
    total = eps.shape[0]
    x = np.zeros_like(eps)
    phi_t = [np.ascontiguousarray(m.T) for m in model.phi]
    c = model.intercept
    for t in range(total):
        acc = eps[t] + c
        for j in range(1, min(t, p) + 1):
            acc = acc + x[t - j] @ phi_t[j - 1]
        x[t] = acc
    return x


# ---------------------------------------------------------------------------
# panel CSV interface
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_panel_csv(panel: VolatilityPanel, path: str | Path) -> None:
    lines = ["date," + ",".join(panel.symbols)]
    for i, d in enumerate(panel.dates):
        lines.append(d.isoformat() + "," + ",".join(_fmt(v) for v in panel.values[i]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_panel_csv(path: str | Path, transform_tag: str = "log") -> VolatilityPanel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataError(f"{path}: empty panel file")
    header = lines[0].split(",")
    if header[0].strip().lower() != "date" or len(header) < 3:
        raise DataError(f"{path}: expected header 'date,<symbol>,...' with >= 2 symbols")
    symbols = tuple(s.strip() for s in header[1:])
    dates: list[dt.date] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise DataError(f"{path} line {lineno}: expected {len(header)} fields")
        try:
            dates.append(dt.date.fromisoformat(parts[0].strip()))
            rows.append([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise DataError(f"{path} line {lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return VolatilityPanel(tuple(dates), symbols, np.array(rows), transform_tag=transform_tag)
