import logging

import numpy as np
import pytest

from qrcvol.errors import IngestionError, InputShapeError, InsufficientDataError
from qrcvol.pipeline import (
    PriceSeries,
    ReturnSeries,
    load_prices,
    log_returns,
    normalize_and_label,
    prepare_dataset,
    read_dataset,
    rolling_volatility,
    windowize,
    write_dataset,
)


def make_csv(tmp_path, rows, header="date,ticker,adj_close"):
    path = tmp_path / "prices.csv"
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


class TestLoadPrices:
    def test_minimal_file(self, tmp_path):
        path = make_csv(tmp_path, ["2020-01-01,A,100", "2020-01-02,A,110"])
        series = load_prices(path)
        assert len(series) == 1
        assert series[0].ticker == "A"
        assert np.array_equal(series[0].prices, [100.0, 110.0])

    def test_out_of_order_dates_sorted_with_warning(self, tmp_path, caplog):
        path = make_csv(tmp_path, ["2020-01-02,A,110", "2020-01-01,A,100"])
        with caplog.at_level(logging.WARNING):
            series = load_prices(path)
        assert series[0].dates == ["2020-01-01", "2020-01-02"]
        assert any("out of order" in r.message for r in caplog.records)

    def test_nonpositive_price_rejected_with_row_diagnostic(self, tmp_path, caplog):
        path = make_csv(
            tmp_path, ["2020-01-01,A,100", "2020-01-02,A,0", "2020-01-03,A,101"]
        )
        with caplog.at_level(logging.WARNING):
            series = load_prices(path)
        assert len(series[0].prices) == 2
        assert any("row 3" in r.getMessage() for r in caplog.records)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            load_prices(tmp_path / "nope.csv")

    def test_bad_header(self, tmp_path):
        path = make_csv(tmp_path, ["2020-01-01,A,1"], header="a,b,c")
        with pytest.raises(IngestionError):
            load_prices(path)

    def test_ticker_filter(self, tmp_path):
        path = make_csv(
            tmp_path,
            ["2020-01-01,A,1", "2020-01-01,B,2", "2020-01-02,A,1", "2020-01-02,B,2"],
        )
        series = load_prices(path, tickers=["B"])
        assert [s.ticker for s in series] == ["B"]


class TestLogReturns:
    def test_exact_logs(self):
        p = PriceSeries("T", ["d1", "d2", "d3"], [1.0, np.e, np.e**2])
        r = log_returns(p)
        assert np.max(np.abs(r.returns - 1.0)) < 1e-12

    def test_constant_prices(self):
        p = PriceSeries("T", ["d1", "d2", "d3"], [5.0, 5.0, 5.0])
        assert np.array_equal(log_returns(p).returns, [0.0, 0.0])

    def test_ten_percent(self):
        p = PriceSeries("T", ["d1", "d2"], [100.0, 110.0])
        assert abs(log_returns(p).returns[0] - 0.0953102) < 1e-6

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            log_returns(PriceSeries("T", ["d1"], [1.0]))


class TestRollingVolatility:
    def test_constant_returns(self):
        v = rolling_volatility(ReturnSeries("T", np.full(10, 0.3)), w=3)
        assert np.max(np.abs(v.raw)) < 1e-15

    def test_one_two_three(self):
        v = rolling_volatility(ReturnSeries("T", np.array([1.0, 2.0, 3.0])), w=3)
        assert abs(v.raw[0] - 1.0) < 1e-12

    def test_zero_zero_two(self):
        v = rolling_volatility(ReturnSeries("T", np.array([0.0, 0.0, 2.0])), w=3)
        assert abs(v.raw[0] - 2.0 / np.sqrt(3.0)) < 1e-12

    def test_alignment(self):
        v = rolling_volatility(ReturnSeries("T", np.arange(6.0)), w=3)
        assert v.start_index == 2
        assert len(v.raw) == 4

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            rolling_volatility(ReturnSeries("T", np.array([1.0, 2.0])), w=3)

    def test_w_below_two(self):
        with pytest.raises(InputShapeError):
            rolling_volatility(ReturnSeries("T", np.arange(5.0)), w=1)


class TestNormalizeAndLabel:
    def test_degenerate_all_equal(self):
        v = rolling_volatility(ReturnSeries("T", np.full(10, 0.1)), w=3)
        labels, _ = normalize_and_label(v, lam=1.0)
        assert np.array_equal(labels, np.zeros(8, dtype=int))
        assert np.array_equal(v.normalized, np.zeros(8))

    def test_single_outlier_labeled(self):
        from qrcvol.pipeline import VolatilitySeries

        v = VolatilitySeries(raw=np.array([1.0, 1.0, 1.0, 1.0, 5.0]), start_index=2)
        labels, tau = normalize_and_label(v, lam=1.0)
        assert np.array_equal(labels, [0, 0, 0, 0, 1])
        # z-score of the outlier is 3.2/sqrt(3.2) ~ 1.789 > tau = 1
        assert abs(v.normalized[-1] - 3.2 / np.sqrt(3.2)) < 1e-12
        assert abs(tau - 1.0) < 1e-12

    def test_huge_lambda_all_zero(self):
        from qrcvol.pipeline import VolatilitySeries

        v = VolatilitySeries(raw=np.array([1.0, 2.0, 3.0, 9.0]), start_index=0)
        labels, _ = normalize_and_label(v, lam=1e9)
        assert labels.sum() == 0

    def test_normalized_mean_zero_std_one(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            from qrcvol.pipeline import VolatilitySeries

            v = VolatilitySeries(raw=np.abs(rng.normal(size=50)), start_index=0)
            normalize_and_label(v, lam=1.0)
            assert abs(v.normalized.mean()) < 1e-8
            assert abs(v.normalized.std(ddof=1) - 1.0) < 1e-8

    def test_tau_equals_lambda_identity(self):
        # threshold rule on normalized vols == z-score rule on raw vols
        rng = np.random.default_rng(9)
        for _ in range(100):
            from qrcvol.pipeline import VolatilitySeries

            raw = np.abs(rng.normal(size=int(rng.integers(5, 80))))
            lam = float(rng.uniform(0.2, 2.5))
            v = VolatilitySeries(raw=raw.copy(), start_index=0)
            labels, tau = normalize_and_label(v, lam)
            z = (raw - raw.mean()) / raw.std(ddof=1)
            assert abs(tau - lam) < 1e-8
            assert np.array_equal(labels, (z > lam).astype(int))


class TestWindowize:
    def test_two_windows_split_one(self):
        r = ReturnSeries("T", np.arange(10.0))
        labels = np.array([0, 1])
        ds = windowize(r, labels, w=9)
        assert len(ds.labels) == 2
        assert ds.split_index == 1
        assert np.array_equal(ds.windows[0], np.arange(9.0))
        assert np.array_equal(ds.windows[1], np.arange(1.0, 10.0))
        assert np.array_equal(ds.labels, [0, 1])

    def test_stride_equals_w_disjoint(self):
        r = ReturnSeries("T", np.arange(20.0))
        labels = np.zeros(18, dtype=int)
        ds = windowize(r, labels, w=3, stride=3)
        assert np.array_equal(ds.t_index, [2, 5, 8, 11, 14, 17])
        starts = ds.t_index - 2
        assert np.array_equal(starts, [0, 3, 6, 9, 12, 15])

    def test_window_width_is_w(self):
        r = ReturnSeries("T", np.arange(30.0))
        ds = windowize(r, np.zeros(22, dtype=int), w=9)
        assert ds.windows.shape[1] == 9

    def test_label_count_mismatch(self):
        with pytest.raises(InputShapeError):
            windowize(ReturnSeries("T", np.arange(10.0)), np.zeros(5, dtype=int), w=9)

    def test_chronological_split_no_leakage(self):
        r = ReturnSeries("T", np.arange(40.0))
        ds = windowize(r, np.zeros(32, dtype=int), w=9)
        train_t = ds.t_index[: ds.split_index]
        test_t = ds.t_index[ds.split_index :]
        assert train_t.max() < test_t.min()


class TestPrepareDataset:
    def test_nonlinearity_witness(self):
        # two windows with identical means but different labels
        w = 4
        quiet = [0.01, -0.01] * 2
        wild = [0.5, -0.5] * 2
        returns = np.array(quiet * 6 + wild)
        prices = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(returns)]))
        dates = [f"2020-01-{d:02d}" for d in range(1, len(prices) + 1)]
        ds = prepare_dataset(PriceSeries("T", dates, prices), w=w, lam=1.0)
        means = ds.windows.mean(axis=1)
        same_mean = [
            (i, j)
            for i in range(len(means))
            for j in range(i + 1, len(means))
            if abs(means[i] - means[j]) < 1e-12 and ds.labels[i] != ds.labels[j]
        ]
        assert same_mean, "expected equal-mean windows with different labels"

    def test_cache_roundtrip(self, tmp_path):
        rng = np.random.default_rng(21)
        prices = 100.0 * np.exp(np.cumsum(rng.normal(0, 0.01, size=60)))
        dates = [f"2020-{1 + d // 28:02d}-{1 + d % 28:02d}" for d in range(60)]
        ds = prepare_dataset(PriceSeries("T", dates, prices), w=9, lam=1.0)
        path = tmp_path / "T.dataset.csv"
        write_dataset(ds, path)
        back = read_dataset(path)
        assert back.ticker == ds.ticker
        assert back.split_index == ds.split_index
        assert back.lam == ds.lam
        assert np.array_equal(back.windows, ds.windows)
        assert np.array_equal(back.labels, ds.labels)
        assert np.array_equal(back.t_index, ds.t_index)
