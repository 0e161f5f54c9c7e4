"""Statistical layer: power-law degree fits, edge-vs-node power-model fits,
relative growth rates, and price correlation.

The degree-distribution model is f(x) = C x^(-alpha) for x >= x_min with
C = (alpha - 1) * x_min^(alpha - 1).  The tail exponent is estimated by the
closed-form discrete maximum-likelihood approximation

    alpha = 1 + n / sum(ln(x_i / (x_min - 1/2)))

over the tail x_i >= x_min.  Note the estimator's range is capped at
1 + 1/ln(x_min/(x_min - 1/2)); at x_min = 1 no integer data can produce an
estimate above ~2.44, so recovering steep exponents from heavy-tailed
samples requires the x_min scan (:func:`scan_power_law`), which picks the
threshold by Kolmogorov-Smirnov distance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping, Sequence

import numpy as np

from .errors import InputError, UndefinedMetricError
from .ingest import YearMonth


@dataclass(frozen=True)
class PowerLawFit:
    """Fitted tail exponent with diagnostics.

    ``log_likelihood`` is evaluated under the C x^(-alpha) density at this
    fit's (alpha, x_min).  ``ks_distance`` is populated by the scan mode.
    """

    alpha: float
    x_min: int
    n_tail: int
    log_likelihood: float
    ks_distance: float | None = None

    @property
    def normalization(self) -> float:
        """The constant C = (alpha - 1) * x_min^(alpha - 1)."""
        return (self.alpha - 1.0) * self.x_min ** (self.alpha - 1.0)


@dataclass(frozen=True)
class PowerModelFit:
    """E = a * V^b fitted in log-log space."""

    a: float
    b: float
    adjusted_r2: float
    n_points: int


@dataclass(frozen=True)
class GrowthRate:
    """Relative growth rate (ln s2 - ln s1)/(t2 - t1), per month."""

    rgr: float
    t1: int
    t2: int
    s1: float
    s2: float


def _tail(degrees, x_min: int) -> np.ndarray:
    x = np.asarray(degrees, dtype=np.float64).ravel()
    if x.size and x.min() <= 0:
        raise InputError("degrees must be positive; drop zero-degree nodes first")
    if x_min < 1:
        raise InputError(f"x_min must be >= 1, got {x_min}")
    return x[x >= x_min]


def power_law_log_likelihood(tail: np.ndarray, alpha: float, x_min: int) -> float:
    n = len(tail)
    return n * (math.log(alpha - 1.0) + (alpha - 1.0) * math.log(x_min)) - alpha * float(
        np.sum(np.log(tail))
    )


def fit_power_law(degrees, x_min: int = 1) -> PowerLawFit:
    """Fit the tail exponent at a fixed threshold.

    Raises :class:`UndefinedMetricError` when the tail has fewer than 2
    observations or no spread (all values equal).
    """
    tail = _tail(degrees, x_min)
    n = len(tail)
    if n < 2:
        raise UndefinedMetricError(f"power-law tail too small: {n} observations")
    if tail.min() == tail.max():
        raise UndefinedMetricError("power-law fit degenerate: single distinct tail value")
    denom = float(np.sum(np.log(tail / (x_min - 0.5))))
    alpha = 1.0 + n / denom
    return PowerLawFit(
        alpha=alpha,
        x_min=x_min,
        n_tail=n,
        log_likelihood=power_law_log_likelihood(tail, alpha, x_min),
    )


def _ks_distance(tail_sorted: np.ndarray, alpha: float, x_min: int) -> float:
    # Empirical CDF at each distinct value against the fitted model CDF,
    # evaluated at the half-step above the value so integer data binned by
    # rounding compares cleanly against the continuous form.
    n = len(tail_sorted)
    vals = np.unique(tail_sorted)
    ecdf = np.searchsorted(tail_sorted, vals, side="right") / n
    mcdf = 1.0 - ((vals + 0.5) / (x_min - 0.5)) ** (1.0 - alpha)
    return float(np.max(np.abs(ecdf - mcdf)))


def scan_power_law(degrees, *, min_tail: int = 10, max_x_min: int | None = None) -> PowerLawFit:
    """Fit at every candidate threshold and keep the best by KS distance.

    Candidates are the distinct degree values (bounded by ``max_x_min``)
    whose tail keeps at least ``min_tail`` observations and more than one
    distinct value.
    """
    x = _tail(degrees, 1)
    if len(x) < 2:
        raise UndefinedMetricError(f"power-law tail too small: {len(x)} observations")
    x.sort()
    best: PowerLawFit | None = None
    for cand in np.unique(x):
        cand = int(cand)
        if max_x_min is not None and cand > max_x_min:
            break
        tail = x[np.searchsorted(x, cand) :]
        if len(tail) < min_tail:
            break
        if tail[0] == tail[-1]:
            continue
        n = len(tail)
        denom = float(np.sum(np.log(tail / (cand - 0.5))))
        alpha = 1.0 + n / denom
        ks = _ks_distance(tail, alpha, cand)
        if best is None or ks < best.ks_distance:
            best = PowerLawFit(
                alpha=alpha,
                x_min=cand,
                n_tail=n,
                log_likelihood=power_law_log_likelihood(tail, alpha, cand),
                ks_distance=ks,
            )
    if best is None:
        raise UndefinedMetricError("power-law scan found no usable threshold")
    return best


def adjusted_r2(r2: float, n: int, p: int) -> float:
    """1 - (1 - r2)(n - 1)/(n - p - 1)."""
    if not 0.0 <= r2 <= 1.0:
        raise InputError(f"r2 must be within [0, 1], got {r2}")
    if n <= p + 1:
        raise UndefinedMetricError(f"adjusted R^2 undefined for n={n}, p={p}")
    return 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)


def fit_power_model(points: Sequence[tuple[float, float]]) -> PowerModelFit:
    """Least squares for E = a * V^b on (ln V, ln E).

    ``points`` are (n_nodes, n_edges) pairs, at least 3 of them with
    n_nodes >= 2 and n_edges >= 1.
    """
    if len(points) < 3:
        raise UndefinedMetricError(f"power model needs >= 3 points, got {len(points)}")
    v = np.asarray([p[0] for p in points], dtype=np.float64)
    e = np.asarray([p[1] for p in points], dtype=np.float64)
    if np.any(v < 2) or np.any(e < 1):
        raise InputError("power model needs n_nodes >= 2 and n_edges >= 1 per point")
    lv = np.log(v)
    le = np.log(e)
    dx = lv - lv.mean()
    dy = le - le.mean()
    sxx = float(np.dot(dx, dx))
    if sxx <= 0.0:
        raise UndefinedMetricError("power model undefined: zero variance in ln V")
    b = float(np.dot(dx, dy)) / sxx
    a = math.exp(float(le.mean() - b * lv.mean()))
    resid = dy - b * dx
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(dy, dy))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return PowerModelFit(
        a=a, b=b, adjusted_r2=adjusted_r2(r2, len(points), 1), n_points=len(points)
    )


def rgr(s1: float, t1: int, s2: float, t2: int) -> GrowthRate:
    """Relative growth rate of a size series between two month indices."""
    if s1 <= 0 or s2 <= 0:
        raise InputError(f"sizes must be positive, got {s1}, {s2}")
    if t2 <= t1:
        raise InputError(f"need t2 > t1, got {t1}, {t2}")
    value = (math.log(s2) - math.log(s1)) / (t2 - t1)
    return GrowthRate(rgr=value, t1=t1, t2=t2, s1=s1, s2=s2)


def pearson(x, y) -> float:
    """Pearson correlation of two aligned series (length >= 3)."""
    xa = np.asarray(x, dtype=np.float64).ravel()
    ya = np.asarray(y, dtype=np.float64).ravel()
    if len(xa) != len(ya):
        raise InputError(f"series lengths differ: {len(xa)} vs {len(ya)}")
    if len(xa) < 3:
        raise UndefinedMetricError(f"correlation undefined for {len(xa)} points")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    vx = float(np.dot(dx, dx))
    vy = float(np.dot(dy, dy))
    if vx <= 0.0 or vy <= 0.0:
        raise UndefinedMetricError("correlation undefined: zero variance")
    r = float(np.dot(dx, dy)) / math.sqrt(vx * vy)
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class PriceSeries:
    """Monthly prices keyed by calendar month."""

    prices: Mapping[YearMonth, float]

    def __post_init__(self):
        for ym, price in self.prices.items():
            if price <= 0:
                raise InputError(f"price for {ym} must be positive, got {price}")

    @classmethod
    def from_csv(cls, stream: IO[str]) -> "PriceSeries":
        reader = csv.reader(stream)
        header = next(reader, None)
        if header != ["month", "price"]:
            raise InputError(f"expected header month,price, got {header!r}")
        prices: dict[YearMonth, float] = {}
        for row in reader:
            if len(row) != 2:
                raise InputError(f"bad price row: {row!r}")
            ym = YearMonth.parse(row[0])
            if ym in prices:
                raise InputError(f"duplicate price month: {ym}")
            prices[ym] = float(row[1])
        return cls(prices=prices)

    @classmethod
    def load(cls, path: str | Path) -> "PriceSeries":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return cls.from_csv(fh)


@dataclass(frozen=True)
class AlignedSeries:
    months: tuple[YearMonth, ...]
    metric: np.ndarray
    price: np.ndarray
    dropped: int  # months present on only one side


def align_with_price(
    metric_series: Mapping[YearMonth, float], price: PriceSeries
) -> AlignedSeries:
    """Inner join of a metric series and a price series on calendar month."""
    common = sorted(set(metric_series) & set(price.prices))
    if not common:
        raise UndefinedMetricError("no overlapping months between metric and price")
    dropped = (len(metric_series) - len(common)) + (len(price.prices) - len(common))
    return AlignedSeries(
        months=tuple(common),
        metric=np.asarray([metric_series[m] for m in common], dtype=np.float64),
        price=np.asarray([price.prices[m] for m in common], dtype=np.float64),
        dropped=dropped,
    )
