"""Poisson arrivals with light-tailed, bounded-Pareto or empirical flow sizes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Sequence

import numpy as np

from .model import Flow, NetworkGraph

MIN_SIZE = 2.0
MAX_SIZE = 500.0


class CdfTable:
    """Piecewise-linear flow size CDF given as (size, cumulative probability) rows."""

    def __init__(self, rows: Sequence[tuple[float, float]]):
        if not rows:
            raise ValueError("CDF table is empty")
        sizes = np.array([float(r[0]) for r in rows])
        probs = np.array([float(r[1]) for r in rows])
        if np.any(np.diff(sizes) <= 0):
            raise ValueError("CDF sizes must be strictly increasing")
        if np.any(np.diff(probs) < 0):
            raise ValueError("CDF probabilities must be non-decreasing")
        if probs[0] < 0 or abs(probs[-1] - 1.0) > 1e-12:
            raise ValueError("CDF probabilities must lie in [0, 1] and end at 1")
        if sizes[0] < 0:
            raise ValueError("flow sizes must be non-negative")
        self.sizes = sizes
        self.probs = probs

    @classmethod
    def from_csv(cls, path: str | FsPath) -> "CdfTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or len(header) < 2:
                raise ValueError(f"{path}: expected a header row with two columns")
            try:
                header_floats = [float(h) for h in header[:2]]
            except ValueError:
                header_floats = None
            if header_floats is not None:
                raise ValueError(f"{path}: header row required (got numeric first row)")
            rows = [(float(r[0]), float(r[1])) for r in reader if r and r[0].strip()]
        return cls(rows)

    def __len__(self):
        return len(self.sizes)

    def quantile(self, u):
        """Inverse of the interpolated CDF; mass below the first row sits on the first size."""
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(self.probs, u, side="left")
        idx = np.clip(idx, 0, len(self.sizes) - 1)
        lo = np.maximum(idx - 1, 0)
        p0, p1 = self.probs[lo], self.probs[idx]
        s0, s1 = self.sizes[lo], self.sizes[idx]
        span = np.where(p1 > p0, p1 - p0, 1.0)
        frac = np.clip((u - p0) / span, 0.0, 1.0)
        out = np.where(idx == 0, self.sizes[0], s0 + frac * (s1 - s0))
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.sizes, self.probs)
        return np.where(x < self.sizes[0], 0.0, out)


# -- bounded Pareto ------------------------------------------------------------

def bounded_pareto_mean(alpha: float, low: float = MIN_SIZE, high: float = MAX_SIZE) -> float:
    if abs(alpha - 1.0) < 1e-12:
        return high * low / (high - low) * math.log(high / low)
    ratio = (low / high) ** alpha
    return (alpha / (alpha - 1.0)) * low * (1.0 - (low / high) ** (alpha - 1.0)) / (1.0 - ratio)


def pareto_shape_for_mean(mean: float, low: float = MIN_SIZE, high: float = MAX_SIZE,
                          lo: float = 0.05, hi: float = 20.0, tol: float = 1e-9) -> float:
    """Shape whose bounded-Pareto mean equals ``mean`` (bisection; the mean falls as shape grows)."""
    if not low < mean < high:
        raise ValueError(f"mean {mean} must lie strictly between {low} and {high}")
    m_lo, m_hi = bounded_pareto_mean(lo, low, high), bounded_pareto_mean(hi, low, high)
    if not m_hi <= mean <= m_lo:
        raise ValueError(f"no shape in ({lo}, {hi}) gives mean {mean} (reachable: [{m_hi:.4g}, {m_lo:.4g}])")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        m = bounded_pareto_mean(mid, low, high)
        if abs(m - mean) <= tol:
            return mid
        if m > mean:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _pareto_from_uniform(u, alpha, low, high):
    return low / (1.0 - u * (1.0 - (low / high) ** alpha)) ** (1.0 / alpha)


def sample_bounded_pareto(mean: float, low: float = MIN_SIZE, high: float = MAX_SIZE, seed=None, size=None):
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    alpha = pareto_shape_for_mean(mean, low, high)
    x = _pareto_from_uniform(rng.random(size), alpha, low, high)
    return np.clip(x, low, high) if size is not None else float(min(max(x, low), high))


def sample_empirical(table: CdfTable, seed=None, size=None):
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return table.quantile(rng.random(size))


def sample_light_tailed(mean: float, high: float = MAX_SIZE, seed=None, size=None):
    """Exponential sizes, redrawn while above ``high``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = 1 if size is None else size
    out = rng.exponential(mean, n)
    bad = (out > high) | (out <= 0)
    while bad.any():
        out[bad] = rng.exponential(mean, int(bad.sum()))
        bad = (out > high) | (out <= 0)
    return float(out[0]) if size is None else out


def truncated_exponential_mean(mean: float, high: float = MAX_SIZE) -> float:
    q = math.exp(-high / mean)
    return mean - high * q / (1.0 - q)


# -- patterns -------------------------------------------------------------------

@dataclass
class TrafficPattern:
    """Flow size model plus Poisson arrival rate and flow count.

    ``kind`` is one of ``light``, ``heavy`` or ``empirical``.
    """

    kind: str = "heavy"
    mean: float = 50.0
    arrival_rate: float = 1.0
    flow_count: int = 500
    cdf: CdfTable | None = field(default=None, repr=False)
    cdf_source: str | None = None

    KINDS = {"light": "light", "light-tailed": "light", "exponential": "light",
             "heavy": "heavy", "heavy-tailed": "heavy", "pareto": "heavy",
             "empirical": "empirical", "cdf": "empirical"}

    def __post_init__(self):
        kind = self.KINDS.get(str(self.kind).lower())
        if kind is None:
            raise ValueError(f"unknown traffic pattern {self.kind!r}")
        self.kind = kind
        if not self.arrival_rate > 0:
            raise ValueError("arrival rate must be positive")
        if int(self.flow_count) < 1:
            raise ValueError("flow count must be positive")
        self.flow_count = int(self.flow_count)
        if kind == "empirical":
            if self.cdf is None and self.cdf_source:
                self.cdf = CdfTable.from_csv(self.cdf_source)
            if self.cdf is None:
                raise ValueError("empirical pattern needs a CDF table")
            if self.cdf.sizes[-1] <= 0:
                raise ValueError("empirical CDF must put mass on positive sizes")
        else:
            if not self.mean > 0:
                raise ValueError("mean flow size must be positive")
            if kind == "heavy":
                pareto_shape_for_mean(self.mean)

    @property
    def label(self) -> str:
        if self.kind == "empirical":
            return f"empirical({FsPath(self.cdf_source).stem if self.cdf_source else 'table'})"
        return f"{self.kind}(mu={self.mean:g})"

    def sample_sizes(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "light":
            return sample_light_tailed(self.mean, seed=rng, size=n)
        if self.kind == "heavy":
            return sample_bounded_pareto(self.mean, seed=rng, size=n)
        sizes = sample_empirical(self.cdf, seed=rng, size=n)
        # zero-size draws are possible if the table starts at 0; resample them
        while np.any(sizes <= 0):
            bad = sizes <= 0
            sizes[bad] = sample_empirical(self.cdf, seed=rng, size=int(bad.sum()))
        return sizes


def generate_arrivals(pattern: TrafficPattern, graph: NetworkGraph, seed) -> list[Flow]:
    """``flow_count`` flows with exponential inter-arrival gaps and uniform endpoints."""
    if graph.num_nodes < 2:
        raise ValueError("graph needs at least two nodes")
    rng = np.random.default_rng(seed)
    n = pattern.flow_count
    times = np.cumsum(rng.exponential(1.0 / pattern.arrival_rate, n))
    sizes = pattern.sample_sizes(rng, n)
    nodes = np.array(graph.nodes)
    src_idx = rng.integers(0, len(nodes), n)
    # uniform over ordered pairs with s != t
    dst_idx = rng.integers(0, len(nodes) - 1, n)
    dst_idx = dst_idx + (dst_idx >= src_idx)
    return [
        Flow(i, int(nodes[s]), int(nodes[d]), float(t), float(v))
        for i, (t, v, s, d) in enumerate(zip(times, sizes, src_idx, dst_idx))
    ]
