"""Price ingestion, log returns, rolling volatility, labels and windows.

The labeling pipeline is:
  prices -> log returns r_t -> rolling sample std sigma_t^w ->
  z-normalized sigma~_t -> threshold tau = mu~ + lambda * std~ ->
  binary regime label c_t = [sigma~_t > tau].

Because the normalization is an exact z-score, tau equals lambda and the
label rule is identical to "raw z-score > lambda"; both forms are kept
and tested as an invariant.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import IngestionError, InsufficientDataError, InputShapeError

log = logging.getLogger(__name__)

DEGENERATE_SCALE = 1e-12


@dataclass
class PriceSeries:
    ticker: str
    dates: list  # ISO-8601 strings, strictly increasing
    prices: np.ndarray  # strictly positive

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=float)
        if len(self.dates) != len(self.prices):
            raise InputShapeError("dates and prices differ in length")
        if np.any(self.prices <= 0):
            raise InputShapeError("prices must be strictly positive")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise InputShapeError("dates must be strictly increasing")


@dataclass
class ReturnSeries:
    ticker: str
    returns: np.ndarray


@dataclass
class VolatilitySeries:
    """Rolling vols; raw[k] belongs to return index start_index + k."""

    raw: np.ndarray
    start_index: int
    normalized: np.ndarray = None
    stats: tuple = None  # (mu_raw, scale, mu_norm, std_norm)


@dataclass
class WindowedDataset:
    ticker: str
    windows: np.ndarray  # (m, w) return windows ending at t_index[k]
    labels: np.ndarray  # (m,) in {0, 1}
    t_index: np.ndarray  # (m,) return index of each window's last element
    split_index: int  # first test row
    threshold: float
    lam: float
    stride: int = 1

    @property
    def w(self) -> int:
        return self.windows.shape[1]

    def train_rows(self):
        return self.windows[: self.split_index], self.labels[: self.split_index]

    def test_rows(self):
        return self.windows[self.split_index :], self.labels[self.split_index :]


def load_prices(path, tickers=None) -> list:
    """Read a `date,ticker,adj_close` CSV into per-ticker series.

    Rows with missing fields or non-positive/unparseable prices are
    rejected with a logged row-level diagnostic.  Out-of-order dates are
    sorted with a warning.
    """
    wanted = set(tickers) if tickers else None
    rows_by_ticker = {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"date", "ticker", "adj_close"} <= set(
            reader.fieldnames
        ):
            raise IngestionError(
                f"{path}: expected header date,ticker,adj_close, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            date = (row.get("date") or "").strip()
            ticker = (row.get("ticker") or "").strip()
            raw_price = (row.get("adj_close") or "").strip()
            if not date or not ticker or not raw_price:
                log.warning("%s row %d: missing field, row rejected", path, lineno)
                continue
            if wanted is not None and ticker not in wanted:
                continue
            try:
                price = float(raw_price)
            except ValueError:
                log.warning("%s row %d: unparseable price %r, row rejected", path, lineno, raw_price)
                continue
            if not np.isfinite(price) or price <= 0:
                log.warning("%s row %d: non-positive price %s, row rejected", path, lineno, price)
                continue
            rows_by_ticker.setdefault(ticker, []).append((date, price))
    if not rows_by_ticker:
        raise IngestionError(f"{path}: no usable rows")

    series = []
    for ticker in sorted(rows_by_ticker):
        rows = rows_by_ticker[ticker]
        if any(a[0] >= b[0] for a, b in zip(rows, rows[1:])):
            log.warning("ticker %s: dates out of order, sorting", ticker)
            rows.sort(key=lambda r: r[0])
        dupes = {d for (d, _), (d2, _) in zip(rows, rows[1:]) if d == d2}
        if dupes:
            raise IngestionError(f"ticker {ticker}: duplicate dates {sorted(dupes)}")
        series.append(
            PriceSeries(ticker, [d for d, _ in rows], np.array([p for _, p in rows]))
        )
    return series


def log_returns(p: PriceSeries) -> ReturnSeries:
    """r_t = ln(p_t / p_{t-1})."""
    if len(p.prices) < 2:
        raise InsufficientDataError(f"ticker {p.ticker}: need >= 2 prices")
    return ReturnSeries(p.ticker, np.diff(np.log(p.prices)))


def rolling_volatility(r: ReturnSeries, w: int) -> VolatilitySeries:
    """Sample std (divisor w-1) of each trailing window of size w."""
    if w < 2:
        raise InputShapeError("window size must be >= 2")
    m = len(r.returns)
    if m < w:
        raise InsufficientDataError(
            f"ticker {r.ticker}: {m} returns < window size {w}"
        )
    # sliding windows: raw[k] covers returns[k : k+w], ending at index k+w-1
    strided = np.lib.stride_tricks.sliding_window_view(r.returns, w)
    raw = strided.std(axis=1, ddof=1)
    return VolatilitySeries(raw=raw, start_index=w - 1)


def normalize_and_label(v: VolatilitySeries, lam: float):
    """Z-normalize rolling vols and threshold at tau = mu~ + lam * std~.

    Returns (labels, tau).  Fills v.normalized and v.stats in place.
    A degenerate series (scale below 1e-12) yields all-zero normalized
    values and all-zero labels rather than an exception.
    """
    raw = np.asarray(v.raw, dtype=float)
    mu = float(raw.mean())
    scale = float(raw.std(ddof=1)) if len(raw) > 1 else 0.0
    if scale < DEGENERATE_SCALE:
        v.normalized = np.zeros_like(raw)
        v.stats = (mu, scale, 0.0, 0.0)
        return np.zeros(len(raw), dtype=int), float(lam)
    norm = (raw - mu) / scale
    mu_n = float(norm.mean())
    std_n = float(norm.std(ddof=1))
    tau = mu_n + lam * std_n
    labels = (norm > tau).astype(int)
    v.normalized = norm
    v.stats = (mu, scale, mu_n, std_n)
    return labels, float(tau)


def windowize(
    r: ReturnSeries,
    labels: np.ndarray,
    w: int,
    stride: int = 1,
    threshold: float = None,
    lam: float = 1.0,
    train_fraction: float = 0.8,
) -> WindowedDataset:
    """Pair each return window with the regime label at its final index.

    labels[k] must correspond to return index w-1+k (where rolling vol is
    defined).  The chronological split index is floor(train_fraction * m)
    over the m emitted windows.
    """
    if stride < 1:
        raise InputShapeError("stride must be >= 1")
    m_ret = len(r.returns)
    if len(labels) != m_ret - w + 1:
        raise InputShapeError(
            f"expected {m_ret - w + 1} labels for {m_ret} returns at w={w}, got {len(labels)}"
        )
    t_index = np.arange(w - 1, m_ret, stride)
    if len(t_index) == 0:
        raise InsufficientDataError("no complete windows")
    windows = np.stack([r.returns[t - w + 1 : t + 1] for t in t_index])
    lab = labels[t_index - (w - 1)]
    split = int(np.floor(train_fraction * len(t_index)))
    return WindowedDataset(
        ticker=r.ticker,
        windows=windows,
        labels=lab,
        t_index=t_index,
        split_index=split,
        threshold=float(lam) if threshold is None else float(threshold),
        lam=float(lam),
        stride=stride,
    )


def prepare_dataset(p: PriceSeries, w: int = 9, lam: float = 1.0, stride: int = 1) -> WindowedDataset:
    """Full pipeline: prices -> labeled, chronologically split windows."""
    r = log_returns(p)
    v = rolling_volatility(r, w)
    labels, tau = normalize_and_label(v, lam)
    return windowize(r, labels, w, stride=stride, threshold=tau, lam=lam)


# --- dataset cache: columnar text, one row per window -------------------

def write_dataset(ds: WindowedDataset, path) -> None:
    """Write a dataset cache file (t, w returns, label, test flag)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# ticker={ds.ticker}\n")
        fh.write(f"# w={ds.w} lambda={ds.lam:.17g} stride={ds.stride}\n")
        fh.write(f"# split_index={ds.split_index} threshold={ds.threshold:.17g}\n")
        cols = ["t"] + [f"r{k}" for k in range(ds.w)] + ["label", "is_test"]
        fh.write(",".join(cols) + "\n")
        for k in range(len(ds.labels)):
            vals = [str(int(ds.t_index[k]))]
            vals += [f"{x:.17g}" for x in ds.windows[k]]
            vals.append(str(int(ds.labels[k])))
            vals.append(str(int(k >= ds.split_index)))
            fh.write(",".join(vals) + "\n")


def read_dataset(path) -> WindowedDataset:
    """Read a dataset cache file written by write_dataset."""
    meta = {}
    rows = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    with fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for part in line[1:].split():
                    if "=" in part:
                        k, _, val = part.partition("=")
                        meta[k] = val
                continue
            if line.startswith("t,"):
                continue
            rows.append(line.split(","))
    if not rows or "ticker" not in meta:
        raise IngestionError(f"{path}: not a dataset cache file")
    w = int(meta["w"])
    t_index = np.array([int(r[0]) for r in rows])
    windows = np.array([[float(x) for x in r[1 : 1 + w]] for r in rows])
    labels = np.array([int(r[1 + w]) for r in rows])
    return WindowedDataset(
        ticker=meta["ticker"],
        windows=windows,
        labels=labels,
        t_index=t_index,
        split_index=int(meta["split_index"]),
        threshold=float(meta["threshold"]),
        lam=float(meta["lambda"]),
        stride=int(meta["stride"]),
    )
