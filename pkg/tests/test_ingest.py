import datetime as dt
import io
import math

import numpy as np
import pytest

from freqconn.errors import DataError, NumericError, UsageError
from freqconn.ingest import (
    CalendarRules,
    ReturnGrid,
    bipower_variation,
    build_panel,
    filter_calendar,
    load_ticks,
    low_activity_rules,
    read_panel_csv,
    resample_grid,
    summary_stats,
    synth_var_panel,
    write_panel_csv,
)
from helpers import make_model


def ticks_csv(rows):
    return io.StringIO("timestamp,price\n" + "\n".join(rows) + "\n")


class TestLoadTicks:
    def test_parses_increasing_rows(self):
        ts = load_ticks(ticks_csv([
            "2001-03-05T10:00:00+00:00,50.0",
            "2001-03-05T10:00:05+00:00,50.5",
            "2001-03-05T10:01:00+00:00,51.0",
        ]), "CO")
        assert len(ts) == 3
        assert ts.prices.tolist() == [50.0, 50.5, 51.0]

    def test_duplicate_timestamp_keeps_last_price(self):
        ts = load_ticks(ticks_csv([
            "2001-03-05T10:00:00+00:00,50.0",
            "2001-03-05T10:00:00+00:00,51.0",
        ]), "CO")
        assert len(ts) == 1
        assert ts.prices[0] == 51.0

    def test_negative_price_names_line(self):
        with pytest.raises(DataError, match="line 3"):
            load_ticks(ticks_csv([
                "2001-03-05T10:00:00+00:00,50.0",
                "2001-03-05T10:00:01+00:00,-1.0",
            ]), "CO")

    def test_out_of_order_row_rejected_with_line(self):
        with pytest.raises(DataError, match="line 3.*out-of-order"):
            load_ticks(ticks_csv([
                "2001-03-05T10:00:05+00:00,50.0",
                "2001-03-05T10:00:00+00:00,51.0",
            ]), "CO")

    def test_empty_input_rejected(self):
        with pytest.raises(DataError, match="empty|no data"):
            load_ticks(io.StringIO("timestamp,price\n"), "CO")

    def test_crlf_and_zulu_accepted(self):
        raw = io.BytesIO(b"timestamp,price\r\n2001-03-05T10:00:00Z,50.0\r\n")
        ts = load_ticks(raw, "CO")
        assert len(ts) == 1

    def test_offset_normalized_to_utc(self):
        ts = load_ticks(ticks_csv(["2001-03-05T10:00:00+02:00,50.0"]), "CO")
        assert ts.timestamps[0] == np.datetime64("2001-03-05T08:00:00", "us")


class TestFilterCalendar:
    def test_saturday_removed(self):
        ts = load_ticks(ticks_csv([
            "2001-03-02T10:00:00+00:00,50.0",   # Friday
            "2001-03-03T10:00:00+00:00,51.0",   # Saturday
        ]), "CO")
        kept = filter_calendar(ts, CalendarRules(weekend_exclusion=True))
        assert len(kept) == 1
        assert kept.prices[0] == 50.0

    def test_fixed_window_removes_christmas(self):
        ts = load_ticks(ticks_csv([
            "2001-12-20T10:00:00+00:00,50.0",   # Thursday
            "2001-12-25T10:00:00+00:00,51.0",   # Tuesday, inside Dec 24-26
        ]), "CO")
        kept = filter_calendar(ts, low_activity_rules())
        assert kept.timestamps.tolist() == [np.datetime64("2001-12-20T10:00:00", "us")]

    def test_year_wrap_window(self):
        rules = low_activity_rules()
        assert rules.excludes(dt.date(2001, 12, 31))
        assert rules.excludes(dt.date(2002, 1, 2))
        assert not rules.excludes(dt.date(2002, 1, 3))

    def test_empty_rules_identity(self):
        ts = load_ticks(ticks_csv([
            "2001-03-03T10:00:00+00:00,50.0",
            "2001-12-25T10:00:00+00:00,51.0",
        ]), "CO")
        kept = filter_calendar(ts, CalendarRules(weekend_exclusion=False))
        assert np.array_equal(kept.prices, ts.prices)

    def test_idempotent(self):
        ts = load_ticks(ticks_csv([
            "2001-03-02T10:00:00+00:00,50.0",
            "2001-03-03T10:00:00+00:00,51.0",
            "2001-12-25T10:00:00+00:00,52.0",
        ]), "CO")
        once = filter_calendar(ts, low_activity_rules())
        twice = filter_calendar(once, low_activity_rules())
        assert np.array_equal(once.prices, twice.prices)
        assert np.array_equal(once.timestamps, twice.timestamps)


def minute_ticks(pairs, day="2001-03-05"):
    rows = [f"{day}T{hhmmss}+00:00,{price!r}" for hhmmss, price in pairs]
    return load_ticks(ticks_csv(rows), "CO")


class TestResampleGrid:
    def test_constant_price_gives_zero_returns(self):
        ts = minute_ticks([("00:01:00", 100.0), ("12:00:00", 100.0)])
        (grid,) = resample_grid(ts)
        assert len(grid.returns) > 0
        assert (grid.returns == 0.0).all()

    def test_single_return_across_one_boundary(self):
        ts = minute_ticks([("00:02:00", 100.0), ("00:06:00", 100.0 * math.exp(0.01))])
        (grid,) = resample_grid(ts, spacing=dt.timedelta(minutes=5), session=(0, 600))
        assert grid.returns.shape == (1,)
        assert grid.returns[0] == pytest.approx(0.01, abs=1e-12)

    def test_tick_exactly_on_grid_point(self):
        ts = minute_ticks([("00:05:00", 100.0), ("00:07:00", 200.0)])
        (grid,) = resample_grid(ts, spacing=dt.timedelta(minutes=5), session=(0, 900))
        # grid prices: 00:05 -> 100 (at-or-before), 00:10 and 00:15 -> 200
        assert grid.returns == pytest.approx([math.log(2.0), 0.0])

    def test_prices_already_on_grid_reproduce_returns(self):
        prices = [100.0, 101.0, 99.5, 102.0]
        times = ["00:00:00", "00:05:00", "00:10:00", "00:15:00"]
        ts = minute_ticks(list(zip(times, prices)))
        (grid,) = resample_grid(ts, spacing=dt.timedelta(minutes=5), session=(0, 900))
        expected = np.diff(np.log(prices))
        assert np.array_equal(grid.returns, expected)

    def test_thin_day_skipped_with_warning(self, caplog):
        ts = minute_ticks([("23:58:00", 100.0)])
        with caplog.at_level("WARNING", logger="freqconn.ingest"):
            grids = resample_grid(ts)
        assert grids == []
        assert any("day_skipped" in rec.message for rec in caplog.records)

    def test_spacing_must_divide_session(self):
        ts = minute_ticks([("00:01:00", 100.0)])
        with pytest.raises(UsageError, match="divide"):
            resample_grid(ts, spacing=dt.timedelta(minutes=7), session=(0, 600))


def day_of(returns):
    return ReturnGrid("CO", dt.date(2001, 3, 5), np.asarray(returns, dtype=float))


class TestBipowerVariation:
    def test_constant_returns_closed_form(self):
        n, c = 78, 0.01
        bpv = bipower_variation(day_of([c] * n))
        assert bpv == pytest.approx((math.pi / 2) * (n - 1) * c**2, rel=1e-13)

    def test_zero_interleaved_returns_give_zero(self):
        assert bipower_variation(day_of([0.01, 0.0, 0.01])) == 0.0

    def test_isolated_jump_gives_zero(self):
        assert bipower_variation(day_of([0.0, 0.0, 5.0, 0.0, 0.0])) == 0.0

    def test_too_few_returns(self):
        with pytest.raises(DataError, match="insufficient intraday returns"):
            bipower_variation(day_of([0.01]))

    def test_sign_flip_invariance(self):
        rng = np.random.default_rng(7)
        r = rng.standard_normal(78) * 0.01
        assert bipower_variation(day_of(r)) == bipower_variation(day_of(-r))

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(8)
        r = rng.standard_normal(78) * 0.01
        assert bipower_variation(day_of(3.0 * r)) == pytest.approx(
            9.0 * bipower_variation(day_of(r)), rel=1e-12)


class TestBuildPanel:
    def make_inputs(self):
        d = [dt.date(2001, 3, i) for i in range(5, 9)]
        return {
            "CO": [(d[0], 1e-4), (d[1], 2e-4), (d[2], 3e-4), (d[3], 4e-4)],
            "HO": [(d[0], 2e-4), (d[1], 1e-4), (d[3], 5e-4)],
        }

    def test_inner_join_on_dates(self):
        panel = build_panel(self.make_inputs(), transform="raw")
        assert panel.shape == (3, 2)
        assert panel.dates == (dt.date(2001, 3, 5), dt.date(2001, 3, 6), dt.date(2001, 3, 8))

    def test_raw_transform_is_identity(self):
        panel = build_panel(self.make_inputs(), transform="raw")
        assert panel.values[0].tolist() == [1e-4, 2e-4]
        assert panel.transform_tag == "raw"

    def test_log_transform_is_log_of_sqrt(self):
        panel = build_panel(self.make_inputs(), transform="log")
        assert panel.values[0, 0] == pytest.approx(math.log(0.01), abs=1e-12)

    def test_log_of_nonpositive_names_cell(self):
        bad = self.make_inputs()
        bad["CO"][1] = (dt.date(2001, 3, 6), 0.0)
        with pytest.raises(DataError, match="CO 2001-03-06"):
            build_panel(bad, transform="log")

    def test_empty_intersection(self):
        with pytest.raises(DataError, match="no dates shared"):
            build_panel({
                "CO": [(dt.date(2001, 3, 5), 1e-4)],
                "HO": [(dt.date(2001, 3, 6), 1e-4)],
            })

    def test_needs_two_symbols(self):
        with pytest.raises(DataError, match="2 symbols"):
            build_panel({"CO": [(dt.date(2001, 3, 5), 1e-4)]})


class TestSummaryStats:
    def test_constant_column_markers(self):
        dates = tuple(dt.date(2001, 3, 5 + i) for i in range(3))
        panel = build_panel({
            "A": [(d, 2.0) for d in dates],
            "B": [(d, float(v)) for d, v in zip(dates, (1, 2, 3))],
        }, transform="raw")
        stats = summary_stats(panel)
        assert stats.mean.tolist() == [2.0, 2.0]
        assert stats.median.tolist() == [2.0, 2.0]
        assert stats.std[0] == 0.0
        assert math.isnan(stats.skewness[0]) and math.isnan(stats.kurtosis[0])
        assert not math.isnan(stats.skewness[1])

    def test_raw_moments_match_direct_computation(self):
        rng = np.random.default_rng(11)
        dates = tuple(dt.date(2001, 3, 1) + dt.timedelta(days=i) for i in range(200))
        cols = {s: [(d, float(v)) for d, v in zip(dates, rng.lognormal(size=200))]
                for s in ("A", "B")}
        panel = build_panel(cols, transform="raw")
        stats = summary_stats(panel)
        x = panel.values
        assert stats.mean == pytest.approx(x.mean(axis=0), rel=1e-12)
        assert stats.std == pytest.approx(x.std(axis=0, ddof=1), rel=1e-12)
        m = x - x.mean(axis=0)
        skew = (m**3).mean(axis=0) / ((m**2).mean(axis=0)) ** 1.5
        kurt = (m**4).mean(axis=0) / ((m**2).mean(axis=0)) ** 2
        assert stats.skewness == pytest.approx(skew, rel=1e-12)
        assert stats.kurtosis == pytest.approx(kurt, rel=1e-12)


class TestSynthVarPanel:
    def test_white_noise_covariance(self):
        model = make_model(np.zeros((2, 2)), np.eye(2))
        panel = synth_var_panel(model, 50_000, seed=3)
        cov = np.cov(panel.values.T)
        assert np.abs(cov - np.eye(2)).max() < 0.02

    def test_same_seed_bit_identical(self):
        model = make_model([[0.5, 0.2], [0.1, 0.5]], np.eye(2))
        a = synth_var_panel(model, 500, seed=42)
        b = synth_var_panel(model, 500, seed=42)
        assert np.array_equal(a.values, b.values)
        assert a.dates == b.dates

    def test_lyapunov_oracle(self):
        from oracles import lyapunov_cov

        phi1 = np.array([[0.5, 0.2], [0.1, 0.5]])
        model = make_model(phi1, np.eye(2))
        panel = synth_var_panel(model, 100_000, seed=5)
        x = panel.values - panel.values.mean(axis=0)
        gamma0 = x.T @ x / len(x)
        truth = lyapunov_cov(phi1, np.eye(2))
        assert np.abs(gamma0 - truth).max() / np.abs(truth).max() < 0.02
        gamma1 = x[1:].T @ x[:-1] / (len(x) - 1)
        assert np.abs(gamma1 - phi1 @ truth).max() / np.abs(truth).max() < 0.02

    def test_unstable_generator_rejected(self):
        model = make_model(np.eye(2), np.eye(2))
        with pytest.raises(NumericError, match="unstable"):
            synth_var_panel(model, 100, seed=0)


class TestPanelCsv:
    def test_round_trip(self, tmp_path):
        model = make_model([[0.5, 0.2], [0.1, 0.5]], np.eye(2), names=("CO", "HO"))
        panel = synth_var_panel(model, 50, seed=9)
        path = tmp_path / "panel.csv"
        write_panel_csv(panel, path)
        back = read_panel_csv(path)
        assert back.symbols == panel.symbols
        assert back.dates == panel.dates
        assert np.array_equal(back.values, panel.values)

    def test_rejects_single_symbol(self, tmp_path):
        path = tmp_path / "panel.csv"
        path.write_text("date,CO\n2001-03-05,1.0\n")
        with pytest.raises(DataError):
            read_panel_csv(path)
