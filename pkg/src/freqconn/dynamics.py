"""Rolling-window connectedness, parametric-bootstrap confidence bands,
event annotation, and short/long ratio series with linear trend fits.

Measure identifiers: time-domain measures are ``total``, ``from.<var>``,
``to.<var>``, ``net.<var>``, ``pairwise.<a>.<b>``; band-scoped measures
append ``@<band label>``, e.g. ``within_from.CO@1-5 days``. These keys name
the series in :class:`RollingResult` and in the long-format CSV.
"""

from __future__ import annotations

import datetime as dt
import logging
from bisect import bisect_left
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, NumericError, UsageError
from .freqdomain import BandSpec, band_measures, spectral_gfevd
from .ingest import VolatilityPanel, _var_recursion
from .timedomain import dy_measures, gfevd
from .varcore import VarModel, fit_var_values, stability, wold

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 500
DEFAULT_REPLICATIONS = 500
DEFAULT_SIGNIFICANCE = 0.10
ZERO_DENOM_TOL = 1e-12


@dataclass(frozen=True)
class BootstrapSpec:
    """Parametric bootstrap configuration. ``significance`` of 0.10 spans the
    5th-95th percentiles of the replicated measures."""

    replications: int = DEFAULT_REPLICATIONS
    significance: float = DEFAULT_SIGNIFICANCE
    seed: int = 0

    def __post_init__(self):
        if self.replications < 100:
            raise UsageError("bootstrap needs at least 100 replications")
        if not 0.0 < self.significance < 1.0:
            raise UsageError("significance must lie in (0, 1)")


@dataclass(frozen=True)
class EventGrid:
    """Dated event labels to pin against rolling anchor dates."""

    events: tuple[tuple[dt.date, str], ...]

    def __post_init__(self):
        for day, label in self.events:
            if not isinstance(day, dt.date):
                raise DataError(f"event date {day!r} is not a date")
            if not label:
                raise DataError(f"event on {day} has an empty label")


@dataclass(frozen=True)
class EventMarker:
    event_date: dt.date
    label: str
    anchor_date: dt.date | None
    placed: bool


@dataclass(frozen=True)
class TrendFit:
    """OLS of a series on its window index."""

    slope: float
    intercept: float
    r_squared: float

    def __post_init__(self):
        if not -1e-12 <= self.r_squared <= 1.0 + 1e-12:
            raise NumericError(f"r_squared {self.r_squared} outside [0, 1]")


@dataclass(frozen=True)
class MeasureSeries:
    """One measure across windows; bands are NaN where no bootstrap ran and
    at gap windows."""

    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        for name in ("point", "lower", "upper"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class RollingResult:
    window_length: int
    step: int
    anchor_dates: tuple[dt.date, ...]
    series: Mapping[str, MeasureSeries]
    bands_used: tuple[BandSpec, ...]
    bootstrap_meta: BootstrapSpec | None = None
    gaps: tuple[tuple[dt.date, str], ...] = ()
    annotations: tuple[EventMarker, ...] = ()

    def __post_init__(self):
        n = len(self.anchor_dates)
        if any(b <= a for a, b in zip(self.anchor_dates, self.anchor_dates[1:])):
            raise DataError("anchor dates must be strictly increasing")
        for key, s in self.series.items():
            if len(s.point) != n:
                raise DataError(f"series {key!r} length differs from window count")

    @property
    def n_windows(self) -> int:
        return len(self.anchor_dates)


# ---------------------------------------------------------------------------
# measure evaluation shared by rolling and bootstrap
# ---------------------------------------------------------------------------

def measure_ids(variable_names: Sequence[str], bands: Sequence[BandSpec]) -> list[str]:
    """Canonical ordering of every measure the rolling engine reports."""
    names = list(variable_names)
    ids = ["total"]
    ids += [f"from.{v}" for v in names]
    ids += [f"to.{v}" for v in names]
    ids += [f"net.{v}" for v in names]
    ids += [f"pairwise.{a}.{b}" for i, a in enumerate(names) for b in names[i + 1:]]
    for band in bands:
        suffix = "@" + band.label
        ids.append("within_total" + suffix)
        ids += [f"within_from.{v}" + suffix for v in names]
        ids += [f"within_to.{v}" + suffix for v in names]
        ids += [f"within_net.{v}" + suffix for v in names]
        ids += [f"within_pairwise.{a}.{b}" + suffix
                for i, a in enumerate(names) for b in names[i + 1:]]
        ids.append("gamma" + suffix)
        ids.append("abs_total" + suffix)
        ids += [f"abs_from.{v}" + suffix for v in names]
        ids += [f"abs_to.{v}" + suffix for v in names]
    return ids


def evaluate_measures(
    model: VarModel,
    bands: Sequence[BandSpec],
    h_trunc: int,
    n_freq: int,
) -> dict[str, float]:
    """Time-domain and per-band measures for one fitted model, keyed by
    measure identifier."""
    names = model.variable_names
    w = wold(model, h_trunc)
    dy = dy_measures(gfevd(model, w, h_trunc))
    out: dict[str, float] = {"total": dy.total}
    for i, v in enumerate(names):
        out[f"from.{v}"] = float(dy.from_others[i])
    for i, v in enumerate(names):
        out[f"to.{v}"] = float(dy.to_others[i])
    for i, v in enumerate(names):
        out[f"net.{v}"] = float(dy.net[i])
    for i, a in enumerate(names):
        for j in range(i + 1, len(names)):
            out[f"pairwise.{a}.{names[j]}"] = float(dy.pairwise[i, j])
    if bands:
        grid = spectral_gfevd(model, w, n_freq)
        for band in bands:
            bm = band_measures(grid, band)
            suffix = "@" + band.label
            out["within_total" + suffix] = bm.within_total
            for i, v in enumerate(names):
                out[f"within_from.{v}" + suffix] = float(bm.within_from[i])
            for i, v in enumerate(names):
                out[f"within_to.{v}" + suffix] = float(bm.within_to[i])
            for i, v in enumerate(names):
                out[f"within_net.{v}" + suffix] = float(bm.within_net[i])
            for i, a in enumerate(names):
                for j in range(i + 1, len(names)):
                    out[f"within_pairwise.{a}.{names[j]}" + suffix] = float(bm.within_pairwise[i, j])
            out["gamma" + suffix] = bm.gamma
            out["abs_total" + suffix] = bm.absolute_total
            for i, v in enumerate(names):
                out[f"abs_from.{v}" + suffix] = float(bm.absolute_from[i])
            for i, v in enumerate(names):
                out[f"abs_to.{v}" + suffix] = float(bm.absolute_to[i])
    return out


# ---------------------------------------------------------------------------
# rolling estimation
# ---------------------------------------------------------------------------

def rolling_connectedness(
    panel: VolatilityPanel,
    p: int = 2,
    window: int = DEFAULT_WINDOW,
    step: int = 1,
    bands: Sequence[BandSpec] = (),
    h_trunc: int = 100,
    n_freq: int = 512,
    include_intercept: bool = True,
    bootstrap: BootstrapSpec | None = None,
) -> RollingResult:
    """Re-estimate the VAR on a sliding window and evaluate every measure.

    Windows whose fit fails or is unstable become gaps (NaN with a reason
    code), never silent drops. With ``bootstrap`` set, each window also gets
    parametric-bootstrap quantile bands widened, if needed, to include the
    point estimate.
    """
    t_total, k = panel.shape
    if window > t_total:
        raise DataError(f"window {window} exceeds sample length {t_total}")
    if step < 1:
        raise UsageError("step must be >= 1")
    starts = range(0, t_total - window + 1, step)
    anchors = tuple(panel.dates[s + window - 1] for s in starts)
    ids = measure_ids(panel.symbols, bands)
    n_win = len(anchors)
    points = {m: np.full(n_win, np.nan) for m in ids}
    lowers = {m: np.full(n_win, np.nan) for m in ids}
    uppers = {m: np.full(n_win, np.nan) for m in ids}
    gaps: list[tuple[dt.date, str]] = []
    n_valid = 0

    for w_idx, start in enumerate(starts):
        values = panel.values[start:start + window]
        try:
            model = fit_var_values(values, p, include_intercept, panel.symbols)
        except (DataError, NumericError) as exc:
            gaps.append((anchors[w_idx], f"fit_failed: {exc}"))
            log.warning("window_gap anchor=%s reason=fit_failed", anchors[w_idx])
            continue
        stable, radius = stability(model)
        if not stable:
            gaps.append((anchors[w_idx], f"unstable: spectral radius {radius:.6g}"))
            log.warning("window_gap anchor=%s reason=unstable radius=%.6g",
                        anchors[w_idx], radius)
            continue
        measures = evaluate_measures(model, bands, h_trunc, n_freq)
        for m, v in measures.items():
            points[m][w_idx] = v
        n_valid += 1
        if bootstrap is not None:
            bands_by_measure = bootstrap_bands(
                model, window,
                bands=bands, h_trunc=h_trunc, n_freq=n_freq,
                replications=bootstrap.replications,
                significance=bootstrap.significance,
                seed=(bootstrap.seed, w_idx),
                include_intercept=include_intercept,
                measure_subset=ids,
            )
            for m, (lo, hi) in bands_by_measure.items():
                point = points[m][w_idx]
                lowers[m][w_idx] = min(lo, point) if np.isfinite(point) else lo
                uppers[m][w_idx] = max(hi, point) if np.isfinite(point) else hi

    if n_valid == 0:
        raise NumericError("no valid windows: every fit failed or was unstable")
    series = {m: MeasureSeries(points[m], lowers[m], uppers[m]) for m in ids}
    return RollingResult(
        window_length=window, step=step, anchor_dates=anchors, series=series,
        bands_used=tuple(bands), bootstrap_meta=bootstrap, gaps=tuple(gaps),
    )


# ---------------------------------------------------------------------------
# parametric bootstrap
# ---------------------------------------------------------------------------

def _simulate_replicates(model: VarModel, length: int, replications: int, seed) -> np.ndarray:
    """(replications, length, k) panels simulated from the fitted VAR.

    Innovation streams are drawn per replicate from rng((seed..., rep)) and
    the recursion runs batched over replicates, so output is independent of
    execution order.
    """
    try:
        chol = np.linalg.cholesky(model.sigma)
    except np.linalg.LinAlgError:
        raise NumericError("fitted covariance is not positive definite") from None
    burn = max(1000, 10 * model.p)
    total = burn + length
    seed_parts = tuple(np.atleast_1d(seed).tolist()) if not isinstance(seed, tuple) else seed
    eps = np.empty((total, replications, model.k))
    for rep in range(replications):
        rng = np.random.default_rng((*seed_parts, rep))
        eps[:, rep, :] = rng.standard_normal((total, model.k)) @ chol.T
    x = _var_recursion(model, eps)
    return x[burn:].transpose(1, 0, 2)


def bootstrap_bands(
    model: VarModel,
    window: int,
    bands: Sequence[BandSpec] = (),
    h_trunc: int = 100,
    n_freq: int = 512,
    replications: int = DEFAULT_REPLICATIONS,
    significance: float = DEFAULT_SIGNIFICANCE,
    seed=0,
    include_intercept: bool = True,
    measure_subset: Iterable[str] | None = None,
) -> dict[str, tuple[float, float]]:
    """Parametric-bootstrap quantile bands for connectedness measures.

    Simulates ``replications`` panels of length ``window`` from the fitted
    model, re-fits and re-evaluates each, and returns the empirical
    (significance/2, 1 - significance/2) quantiles per measure. Replicates
    whose re-fit is unstable are skipped; more than 20% skipped is an error.
    """
    if replications < 100:
        raise UsageError("bootstrap needs at least 100 replications")
    if not 0.0 < significance < 1.0:
        raise UsageError("significance must lie in (0, 1)")
    stable, radius = stability(model)
    if not stable:
        raise NumericError(f"cannot bootstrap an unstable model (radius {radius:.6g})")
    subset = set(measure_subset) if measure_subset is not None else None

    panels = _simulate_replicates(model, window, replications, seed)
    collected: dict[str, list[float]] = {}
    n_bad = 0
    for rep in range(replications):
        try:
            refit = fit_var_values(panels[rep], model.p, include_intercept,
                                   model.variable_names)
            if not refit.is_stable:
                raise NumericError("unstable replicate")
            measures = evaluate_measures(refit, bands, h_trunc, n_freq)
        except (DataError, NumericError):
            n_bad += 1
            continue
        for m, v in measures.items():
            if subset is not None and m not in subset:
                continue
            collected.setdefault(m, []).append(v)
    if n_bad > 0.2 * replications:
        raise NumericError(
            f"{n_bad}/{replications} bootstrap replicates were unstable; "
            "use a larger window"
        )
    q_lo, q_hi = significance / 2.0, 1.0 - significance / 2.0
    out: dict[str, tuple[float, float]] = {}
    for m, vals in collected.items():
        arr = np.asarray(vals)
        arr = arr[np.isfinite(arr)]
        if len(arr) == 0:
            out[m] = (np.nan, np.nan)
        else:
            lo, hi = np.quantile(arr, [q_lo, q_hi])
            out[m] = (float(lo), float(hi))
    return out


# ---------------------------------------------------------------------------
# ratios, trends, events
# ---------------------------------------------------------------------------

def ratio_series(
    result: RollingResult,
    numerator_id: str,
    denominator_id: str,
) -> list[tuple[dt.date, float]]:
    """Elementwise ratio of two measure series; denominators below 1e-12 in
    magnitude produce NaN gap markers."""
    for mid in (numerator_id, denominator_id):
        if mid not in result.series:
            raise UsageError(f"measure id {mid!r} not present in rolling result")
    num = result.series[numerator_id].point
    den = result.series[denominator_id].point
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(den) < ZERO_DENOM_TOL, np.nan, num / den)
    return list(zip(result.anchor_dates, (float(v) for v in ratio)))


def linear_trend(series: Sequence[tuple[dt.date, float]]) -> TrendFit:
    """OLS of the values on their 0-based series position, NaN gaps excluded.
    A constant series gets slope 0 and r_squared 0 by convention."""
    y = np.array([v for _, v in series], dtype=float)
    x = np.arange(len(y), dtype=float)
    keep = np.isfinite(y)
    if keep.sum() < 2:
        raise DataError("linear trend needs at least 2 non-gap points")
    x, y = x[keep], y[keep]
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    slope = float(xc @ yc / sxx)
    intercept = float(y.mean() - slope * x.mean())
    if syy <= 0.0:
        return TrendFit(slope=0.0, intercept=intercept, r_squared=0.0)
    r2 = min(1.0, max(0.0, slope * slope * sxx / syy))
    return TrendFit(slope=slope, intercept=intercept, r_squared=r2)


def annotate(result: RollingResult, events: EventGrid) -> RollingResult:
    """Attach each event to the nearest anchor date (ties go to the earlier
    anchor); events outside the anchor range are flagged unplaced. The
    numeric series are untouched."""
    anchors = result.anchor_dates
    markers: list[EventMarker] = []
    for day, label in events.events:
        if day < anchors[0] or day > anchors[-1]:
            markers.append(EventMarker(day, label, None, False))
            continue
        pos = bisect_left(anchors, day)
        if pos < len(anchors) and anchors[pos] == day:
            markers.append(EventMarker(day, label, day, True))
            continue
        before, after = anchors[pos - 1], anchors[pos]
        chosen = before if (day - before) <= (after - day) else after
        markers.append(EventMarker(day, label, chosen, True))
    return replace(result, annotations=tuple(markers))


def read_events_csv(path: str | Path) -> EventGrid:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip().lower() != "date,label":
        raise DataError(f"{path}: expected header 'date,label'")
    events = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        day_text, _, label = line.partition(",")
        try:
            day = dt.date.fromisoformat(day_text.strip())
        except ValueError:
            raise DataError(f"{path} line {lineno}: bad date {day_text!r}") from None
        events.append((day, label.strip()))
    return EventGrid(tuple(events))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _split_id(measure_id: str) -> tuple[str, str]:
    base, _, band = measure_id.rpartition("@")
    return (base, band) if base else (measure_id, "")


def _csv_value(x: float) -> str:
    return "" if not np.isfinite(x) else repr(float(x))


def write_rolling_csv(result: RollingResult, path: str | Path) -> None:
    """Long-format series: ``date,measure,band,value,lower,upper``."""
    lines = ["date,measure,band,value,lower,upper"]
    for mid, s in result.series.items():
        base, band = _split_id(mid)
        for i, day in enumerate(result.anchor_dates):
            lines.append(",".join((
                day.isoformat(), base, band,
                _csv_value(s.point[i]), _csv_value(s.lower[i]), _csv_value(s.upper[i]),
            )))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def rolling_meta_text(result: RollingResult) -> str:
    lines = [
        "format: freqconn-rolling-v1",
        f"window_length: {result.window_length}",
        f"step: {result.step}",
        f"n_windows: {result.n_windows}",
        "bands: " + "; ".join(b.label for b in result.bands_used),
    ]
    if result.bootstrap_meta is not None:
        bm = result.bootstrap_meta
        lines.append(
            f"bootstrap: replications={bm.replications} "
            f"significance={bm.significance!r} seed={bm.seed}"
        )
    else:
        lines.append("bootstrap: none")
    for day, reason in result.gaps:
        lines.append(f"gap: {day.isoformat()} {reason}")
    for mk in result.annotations:
        anchor = mk.anchor_date.isoformat() if mk.anchor_date else "unplaced"
        lines.append(f"event: {mk.event_date.isoformat()} -> {anchor} {mk.label}")
    return "\n".join(lines) + "\n"
