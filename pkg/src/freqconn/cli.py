"""Command-line front end wiring the pipeline end to end.

Subcommands: ``rv`` (ticks -> daily bi-power volatility), ``fit`` (panel ->
VAR model), ``connect`` (full-sample connectedness report), ``roll``
(rolling analysis with optional bootstrap bands, events, and ratio/trend
output), ``synth`` (synthetic panel plus a truth sidecar).

Configuration precedence: command-line flags beat the ``--config`` INI file
(section ``[freqconn]``), which beats built-in defaults. Every run echoes
its fully resolved configuration and a structured one-line-per-event run
log next to its outputs; given the same config and seed, re-runs are
byte-identical.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import datetime as dt
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import dynamics, freqdomain, ingest, timedomain, varcore
from .errors import DataError, NumericError, UsageError

log = logging.getLogger("freqconn.cli")  # stable name even under python -m

ENV_OUT_DIR = "FREQCONN_OUT"

DEFAULTS: dict[str, object] = {
    "lags": 2,            # VAR(2) with a constant
    "window": 500,        # rolling window length
    "step": 1,
    "htrunc": 100,
    "nfreq": 512,
    "bands": "1:5,5:inf",
    "boot": 0,
    "significance": 0.10,
    "seed": 0,
    "transform": "log",
    "spacing": 5,         # minutes
    "session": "00:00-24:00",
    "k": 3,
    "periods": 1000,
}

_INT_KEYS = {"lags", "window", "step", "htrunc", "nfreq", "boot", "seed", "spacing",
             "k", "periods"}
_FLOAT_KEYS = {"significance"}


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with status 2
        raise UsageError(message)


def _load_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise UsageError(f"config file {path!r} not found or unreadable")
    if not parser.has_section("freqconn"):
        raise UsageError(f"config file {path!r} lacks a [freqconn] section")
    return dict(parser.items("freqconn"))


def _coerce(key: str, value):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except (TypeError, ValueError):
        raise UsageError(f"config key {key!r} has non-numeric value {value!r}") from None
    return value


def resolve_config(args: argparse.Namespace) -> dict[str, object]:
    """flags > config file > defaults; also applies the output-dir env var."""
    file_cfg = _load_config_file(getattr(args, "config", None))
    resolved: dict[str, object] = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = _coerce(key, flag)
        elif key in file_cfg:
            resolved[key] = _coerce(key, file_cfg[key])
        else:
            resolved[key] = default
    out = getattr(args, "out", None) or file_cfg.get("out") or os.environ.get(ENV_OUT_DIR)
    resolved["out"] = out or "freqconn-out"
    for key in ("events", "model", "symbols", "holidays"):
        value = getattr(args, key, None)
        if value is None:
            value = file_cfg.get(key)
        if value is not None:
            resolved[key] = value
    _validate_ranges(resolved)
    return resolved


def _validate_ranges(cfg: dict[str, object]) -> None:
    checks = (
        ("lags", cfg["lags"] >= 1, ">= 1"),
        ("window", cfg["window"] >= 2, ">= 2"),
        ("step", cfg["step"] >= 1, ">= 1"),
        ("htrunc", cfg["htrunc"] >= 1, ">= 1"),
        ("nfreq", cfg["nfreq"] >= freqdomain.MIN_N_FREQ, f">= {freqdomain.MIN_N_FREQ}"),
        ("boot", cfg["boot"] >= 0, ">= 0"),
        ("significance", 0.0 < cfg["significance"] < 1.0, "in (0, 1)"),
        ("spacing", cfg["spacing"] >= 1, ">= 1"),
        ("k", cfg["k"] >= 2, ">= 2"),
        ("periods", cfg["periods"] >= 2, ">= 2"),
    )
    for key, ok, requirement in checks:
        if not ok:
            raise UsageError(f"{key} must be {requirement}, got {cfg[key]}")
    if cfg["transform"] not in ingest.TRANSFORMS:
        raise UsageError(f"transform must be one of {ingest.TRANSFORMS}")


def parse_band_string(text: str) -> list[freqdomain.BandSpec]:
    """Comma-separated ``short:long`` day pairs; ``inf`` allowed as long side."""
    bands = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        short_text, sep, long_text = piece.partition(":")
        if not sep:
            raise UsageError(f"band {piece!r} must look like 'short:long' in days")
        try:
            short = float(short_text)
            long_ = math.inf if long_text.strip().lower() == "inf" else float(long_text)
        except ValueError:
            raise UsageError(f"band {piece!r} has non-numeric day counts") from None
        bands.append(freqdomain.days_to_band(short, long_))
    if not bands:
        raise UsageError(f"band string {text!r} contains no bands")
    return bands


def parse_session(text: str) -> tuple[int, int]:
    try:
        start_text, end_text = text.split("-")
        sh, sm = (int(v) for v in start_text.split(":"))
        eh, em = (int(v) for v in end_text.split(":"))
    except ValueError:
        raise UsageError(f"session {text!r} must look like 'HH:MM-HH:MM'") from None
    return sh * 3600 + sm * 60, eh * 3600 + em * 60


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _prepare_out(cfg: dict[str, object]) -> Path:
    out = Path(str(cfg["out"]))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_config_echo(cfg: dict[str, object], out: Path, command: str, inputs: list[str]) -> None:
    lines = [f"command = {command}"]
    lines += [f"input = {p}" for p in inputs]
    lines += [f"{key} = {cfg[key]}" for key in sorted(cfg)]
    (out / "resolved_config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


class _RunLog:
    """Collects structured one-line events from the freqconn loggers and
    writes them to <out>/run.log (no timestamps, so runs stay reproducible)."""

    def __init__(self, out: Path):
        self.path = out / "run.log"
        self.handler = logging.FileHandler(self.path, mode="w", encoding="utf-8")
        self.handler.setFormatter(logging.Formatter("%(message)s"))
        self.logger = logging.getLogger("freqconn")

    def __enter__(self):
        self.prior_level = self.logger.level
        self.logger.setLevel(logging.INFO)
        self.logger.addHandler(self.handler)
        return self

    def __exit__(self, *exc):
        self.logger.removeHandler(self.handler)
        self.logger.setLevel(self.prior_level)
        self.handler.close()
        return False


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_rv(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _prepare_out(cfg)
    tick_paths = [Path(p) for p in args.ticks]
    if cfg.get("symbols"):
        symbols = [s.strip() for s in str(cfg["symbols"]).split(",") if s.strip()]
        if len(symbols) != len(tick_paths):
            raise UsageError(f"{len(symbols)} symbols given for {len(tick_paths)} tick files")
    else:
        symbols = [p.stem for p in tick_paths]
    if len(set(symbols)) != len(symbols):
        raise UsageError(f"duplicate symbols in {symbols}")
    holidays: list[dt.date] = []
    if cfg.get("holidays"):
        for lineno, line in enumerate(Path(str(cfg["holidays"])).read_text().splitlines(), 1):
            if line.strip():
                try:
                    holidays.append(dt.date.fromisoformat(line.strip()))
                except ValueError:
                    raise DataError(f"holidays line {lineno}: bad date {line.strip()!r}") from None
    rules = ingest.low_activity_rules(holidays)
    session = parse_session(str(cfg["session"]))
    spacing = dt.timedelta(minutes=int(cfg["spacing"]))

    _write_config_echo(cfg, out, "rv", [str(p) for p in tick_paths])
    with _RunLog(out):
        per_symbol: dict[str, list[tuple[dt.date, float]]] = {}
        for path, symbol in zip(tick_paths, symbols):
            ticks = ingest.load_ticks(path, symbol)
            log.info("ticks_loaded symbol=%s rows=%d", symbol, len(ticks))
            kept = ingest.filter_calendar(ticks, rules)
            log.info("calendar_excluded symbol=%s rows=%d", symbol, len(ticks) - len(kept))
            grids = ingest.resample_grid(kept, spacing=spacing, session=session)
            daily = [(g.trading_day, ingest.bipower_variation(g)) for g in grids]
            log.info("rv_days symbol=%s days=%d", symbol, len(daily))
            per_symbol[symbol] = daily
            lines = ["date,bpv"] + [f"{d.isoformat()},{_fmt(v)}" for d, v in daily]
            (out / f"rv_{symbol}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        if len(per_symbol) >= 2:
            panel = ingest.build_panel(per_symbol, transform=str(cfg["transform"]))
            ingest.write_panel_csv(panel, out / "panel.csv")
            log.info("panel_written days=%d symbols=%d transform=%s",
                     panel.shape[0], panel.shape[1], panel.transform_tag)
            try:
                stats = ingest.summary_stats(ingest.build_panel(per_symbol, transform="sqrt"))
                (out / "summary_stats.csv").write_text(stats.to_csv_text(), encoding="utf-8")
            except DataError as exc:
                log.info("summary_skipped reason=%s", exc)
        else:
            log.info("panel_skipped reason=needs_2_symbols")
    print(f"rv: wrote {len(per_symbol)} symbol file(s) to {out}")
    return 0


def _read_panel(args, cfg) -> ingest.VolatilityPanel:
    return ingest.read_panel_csv(args.panel, transform_tag=str(cfg["transform"]))


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _prepare_out(cfg)
    _write_config_echo(cfg, out, "fit", [args.panel])
    with _RunLog(out):
        panel = _read_panel(args, cfg)
        model = varcore.fit_var(panel, int(cfg["lags"]), include_intercept=not args.no_intercept)
        stable, radius = varcore.stability(model)
        log.info("fit k=%d p=%d n_obs=%d radius=%s stable=%s",
                 model.k, model.p, model.n_obs, _fmt(radius), str(stable).lower())
        (out / "var_model.txt").write_text(varcore.model_to_text(model), encoding="utf-8")
    print(f"fit: k={model.k} p={model.p} spectral_radius={radius:.6g} -> {out / 'var_model.txt'}")
    return 0


def cmd_connect(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _prepare_out(cfg)
    bands = parse_band_string(str(cfg["bands"]))
    _write_config_echo(cfg, out, "connect", [args.panel])
    with _RunLog(out):
        panel = _read_panel(args, cfg)
        model = varcore.fit_var(panel, int(cfg["lags"]), include_intercept=not args.no_intercept)
        h_trunc = int(cfg["htrunc"])
        w = varcore.wold(model, h_trunc)
        table = timedomain.gfevd(model, w, h_trunc)
        dy = timedomain.dy_measures(table)
        grid = freqdomain.spectral_gfevd(model, w, int(cfg["nfreq"]))
        measures = [freqdomain.band_measures(grid, band) for band in bands]

        (out / "connectedness_table.csv").write_text(table.to_csv_text(), encoding="utf-8")
        (out / "connectedness_table.txt").write_text(table.to_text(), encoding="utf-8")
        dy_lines = [
            f"total: {_fmt(dy.total)}",
            "from: " + " ".join(_fmt(v) for v in dy.from_others),
            "to: " + " ".join(_fmt(v) for v in dy.to_others),
            "net: " + " ".join(_fmt(v) for v in dy.net),
            "variable_names: " + " ".join(table.variable_names),
        ]
        (out / "dy_measures.txt").write_text("\n".join(dy_lines) + "\n", encoding="utf-8")
        (out / "band_measures.txt").write_text(
            "\n".join(freqdomain.band_measures_to_text(m) for m in measures), encoding="utf-8")
        csv_lines = ["band,measure,variable_i,variable_j,value"]
        for m in measures:
            csv_lines += [",".join(row) for row in freqdomain.band_measures_to_csv_rows(m)]
        (out / "band_measures.csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")

        report = [f"time_domain_total: {_fmt(dy.total)}"]
        for m in measures:
            report.append(f"band[{m.band.label}]: within_total={_fmt(m.within_total)} "
                          f"gamma={_fmt(m.gamma)} absolute_total={_fmt(m.absolute_total)}")
        if freqdomain.is_partition(bands):
            total_abs = sum(m.absolute_total for m in measures)
            residual = abs(total_abs - dy.total)
            report.append(f"sum_band_absolute_totals: {_fmt(total_abs)}")
            report.append(f"reconstruction_residual: {_fmt(residual)}")
            log.info("reconstruction residual=%s", _fmt(residual))
        else:
            report.append("reconstruction_residual: not_computed (bands do not partition (0, pi])")
            log.info("reconstruction skipped reason=bands_not_a_partition")
        (out / "report.txt").write_text("\n".join(report) + "\n", encoding="utf-8")
    print("\n".join(report))
    return 0


def cmd_roll(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _prepare_out(cfg)
    bands = parse_band_string(str(cfg["bands"]))
    _write_config_echo(cfg, out, "roll", [args.panel])
    with _RunLog(out):
        panel = _read_panel(args, cfg)
        bootstrap = None
        if int(cfg["boot"]) > 0:
            bootstrap = dynamics.BootstrapSpec(
                replications=int(cfg["boot"]),
                significance=float(cfg["significance"]),
                seed=int(cfg["seed"]),
            )
        result = dynamics.rolling_connectedness(
            panel,
            p=int(cfg["lags"]),
            window=int(cfg["window"]),
            step=int(cfg["step"]),
            bands=bands,
            h_trunc=int(cfg["htrunc"]),
            n_freq=int(cfg["nfreq"]),
            include_intercept=not args.no_intercept,
            bootstrap=bootstrap,
        )
        if cfg.get("events"):
            result = dynamics.annotate(result, dynamics.read_events_csv(str(cfg["events"])))
            for mk in result.annotations:
                log.info("event label=%r anchor=%s placed=%s", mk.label,
                         mk.anchor_date.isoformat() if mk.anchor_date else "none",
                         str(mk.placed).lower())
        dynamics.write_rolling_csv(result, out / "rolling.csv")
        (out / "rolling_meta.txt").write_text(dynamics.rolling_meta_text(result), encoding="utf-8")
        if args.ratios:
            _write_ratios(result, bands, panel.symbols, out)
    print(f"roll: {result.n_windows} windows, {len(result.gaps)} gaps -> {out / 'rolling.csv'}")
    return 0


def _write_ratios(result, bands, symbols, out: Path) -> None:
    """Short-band / long-band ratio series with linear trend fits for the
    within total and the per-variable within from/to measures."""
    if len(bands) != 2:
        raise UsageError(f"ratio output needs exactly 2 bands, got {len(bands)}")
    short = max(bands, key=lambda b: b.lower)
    long_ = min(bands, key=lambda b: b.lower)
    bases = ["within_total"]
    bases += [f"within_from.{s}" for s in symbols]
    bases += [f"within_to.{s}" for s in symbols]
    ratio_lines = ["date,measure,value"]
    trend_lines = ["measure,slope,intercept,r_squared"]
    for base in bases:
        series = dynamics.ratio_series(result, f"{base}@{short.label}", f"{base}@{long_.label}")
        for day, value in series:
            cell = "" if not np.isfinite(value) else _fmt(value)
            ratio_lines.append(f"{day.isoformat()},ratio.{base},{cell}")
        try:
            fit = dynamics.linear_trend(series)
            trend_lines.append(f"ratio.{base},{_fmt(fit.slope)},{_fmt(fit.intercept)},"
                               f"{_fmt(fit.r_squared)}")
        except DataError as exc:
            log.info("trend_skipped measure=%s reason=%s", base, exc)
    (out / "ratios.csv").write_text("\n".join(ratio_lines) + "\n", encoding="utf-8")
    (out / "trends.csv").write_text("\n".join(trend_lines) + "\n", encoding="utf-8")


def default_synth_model(k: int, p: int = 2) -> varcore.VarModel:
    """Built-in stable generating VAR: symmetric cross-lags and positively
    correlated innovations, spectral radius about 0.73 for any k."""
    eye = np.eye(k)
    ones = np.ones((k, k))
    phi1 = 0.35 * eye + 0.1 * (ones - eye) / (k - 1)
    phi = [phi1] + [0.2 * eye if j == 2 else np.zeros((k, k)) for j in range(2, p + 1)]
    sigma = 0.6 * eye + 0.4 * ones
    names = tuple(f"V{i + 1}" for i in range(k))
    return varcore.VarModel(k=k, p=p, intercept=np.zeros(k), phi=tuple(phi[:p]),
                            sigma=sigma, n_obs=0, variable_names=names)


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _prepare_out(cfg)
    bands = parse_band_string(str(cfg["bands"]))
    _write_config_echo(cfg, out, "synth", [])
    with _RunLog(out):
        if cfg.get("model"):
            model = varcore.model_from_text(Path(str(cfg["model"])).read_text(encoding="utf-8"))
        else:
            model = default_synth_model(int(cfg["k"]), int(cfg["lags"]))
        panel = ingest.synth_var_panel(model, int(cfg["periods"]), int(cfg["seed"]),
                                       transform_tag=str(cfg["transform"]))
        ingest.write_panel_csv(panel, out / "panel.csv")
        log.info("synth_panel days=%d symbols=%d seed=%d",
                 panel.shape[0], panel.shape[1], int(cfg["seed"]))

        h_trunc = int(cfg["htrunc"])
        truth = dynamics.evaluate_measures(model, bands, h_trunc, int(cfg["nfreq"]))
        lines = [varcore.model_to_text(model).rstrip("\n"), f"h_trunc: {h_trunc}"]
        lines += [f"truth: {mid} {_fmt(value)}" for mid, value in truth.items()]
        if freqdomain.is_partition(bands):
            total_abs = sum(truth[f"abs_total@{b.label}"] for b in bands)
            lines.append(f"truth_reconstruction_residual: {_fmt(abs(total_abs - truth['total']))}")
        (out / "truth.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"synth: wrote panel ({panel.shape[0]} x {panel.shape[1]}) and truth sidecar to {out}")
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="freqconn",
                     description="Volatility connectedness across frequency bands")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI config file with a [freqconn] section")
    common.add_argument("--lags", type=int, help="VAR lag order (default 2)")
    common.add_argument("--window", type=int, help="rolling window length (default 500)")
    common.add_argument("--step", type=int, help="rolling step (default 1)")
    common.add_argument("--bands", help="day bands, e.g. '1:5,5:inf'")
    common.add_argument("--htrunc", type=int, help="MA truncation horizon (default 100)")
    common.add_argument("--nfreq", type=int, help="frequency grid size (default 512)")
    common.add_argument("--boot", type=int, help="bootstrap replications, 0 = off")
    common.add_argument("--significance", type=float,
                        help="bootstrap band significance (default 0.10 -> 5th-95th pct)")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--events", help="events CSV (date,label) for annotation")
    common.add_argument("--out", help=f"output directory (default ${ENV_OUT_DIR} or freqconn-out)")
    common.add_argument("--transform", choices=ingest.TRANSFORMS,
                        help="volatility transform (default log)")
    common.add_argument("--no-intercept", action="store_true",
                        help="drop the VAR constant term")

    subs = parser.add_subparsers(dest="command", required=True)

    rv = subs.add_parser("rv", parents=[common],
                         help="compute daily bi-power volatility from tick CSVs")
    rv.add_argument("ticks", nargs="+", help="tick CSV files (header timestamp,price)")
    rv.add_argument("--symbols", help="comma-separated symbols (default: file stems)")
    rv.add_argument("--spacing", type=int, help="grid spacing in minutes (default 5)")
    rv.add_argument("--session", help="trading session, e.g. 00:00-24:00 (default)")
    rv.add_argument("--holidays", help="file of ISO dates to exclude, one per line")
    rv.set_defaults(func=cmd_rv)

    fit = subs.add_parser("fit", parents=[common], help="fit a VAR to a panel CSV")
    fit.add_argument("panel", help="panel CSV (header date,<symbol>,...)")
    fit.set_defaults(func=cmd_fit)

    connect = subs.add_parser("connect", parents=[common],
                              help="full-sample connectedness report")
    connect.add_argument("panel")
    connect.set_defaults(func=cmd_connect)

    roll = subs.add_parser("roll", parents=[common], help="rolling-window analysis")
    roll.add_argument("panel")
    roll.add_argument("--ratios", action="store_true",
                      help="emit short/long ratio series and trend fits (needs 2 bands)")
    roll.set_defaults(func=cmd_roll)

    synth = subs.add_parser("synth", parents=[common],
                            help="generate a synthetic panel with truth sidecar")
    synth.add_argument("--k", type=int, help="number of variables (default 3)")
    synth.add_argument("--periods", type=int, help="panel length (default 1000)")
    synth.add_argument("--model", help="VAR model text file to simulate instead of the default")
    synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
