import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bwr.model import SAMPLE_DIR, resolve_topology
from bwr.traffic import (
    MAX_SIZE, MIN_SIZE, CdfTable, TrafficPattern, bounded_pareto_mean, generate_arrivals,
    pareto_shape_for_mean, sample_bounded_pareto, sample_empirical, sample_light_tailed,
    truncated_exponential_mean,
)

N = 100_000
PLACEHOLDER = SAMPLE_DIR / "cache_follower_placeholder.csv"


def ks_distance(samples, table):
    """sup |F_n - F| on a dense grid that includes every table row (atoms sit on rows)."""
    x = np.sort(samples)
    grid = np.union1d(np.linspace(table.sizes[0], table.sizes[-1], 50_001), table.sizes)
    emp = np.searchsorted(x, grid, side="right") / len(x)
    return float(np.max(np.abs(emp - table.cdf(grid))))


# -- arrivals --------------------------------------------------------------------

def test_mean_interarrival():
    g = resolve_topology("gscale")
    flows = generate_arrivals(TrafficPattern("heavy", 50.0, 1.0, N), g, seed=0)
    t = np.array([f.arrival_time for f in flows])
    gaps = np.diff(np.concatenate([[0.0], t]))
    assert 0.99 <= gaps.mean() <= 1.01
    assert np.all(gaps > 0)


def test_arrival_rate_scales_gaps():
    g = resolve_topology("gscale")
    flows = generate_arrivals(TrafficPattern("heavy", 50.0, 4.0, 20_000), g, seed=2)
    assert flows[-1].arrival_time / len(flows) == pytest.approx(0.25, rel=0.03)


def test_endpoints_uniform_over_ordered_pairs():
    g = resolve_topology("gscale")
    flows = generate_arrivals(TrafficPattern("light", 50.0, 1.0, 132_000), g, seed=4)
    counts = np.zeros((12, 12))
    for f in flows:
        counts[f.source, f.destination] += 1
    assert np.all(np.diag(counts) == 0)
    off = counts[~np.eye(12, dtype=bool)]
    # 132 ordered pairs, expected 1000 each; 5 sigma band
    assert off.min() > 1000 - 5 * math.sqrt(1000) and off.max() < 1000 + 5 * math.sqrt(1000)


@pytest.mark.parametrize("kind", ["light", "heavy"])
def test_arrivals_deterministic(kind):
    g = resolve_topology("gscale")
    p = TrafficPattern(kind, 50.0, 1.0, 300)
    a = generate_arrivals(p, g, seed=9)
    b = generate_arrivals(p, g, seed=9)
    c = generate_arrivals(p, g, seed=10)
    key = lambda fs: [(f.id, f.source, f.destination, f.arrival_time, f.total_volume) for f in fs]
    assert key(a) == key(b)
    assert key(a) != key(c)
    assert all(x.arrival_time < y.arrival_time for x, y in zip(a, a[1:]))
    assert all(f.total_volume > 0 for f in a)


@pytest.mark.parametrize("kwargs", [
    {"kind": "uniform"}, {"arrival_rate": 0.0}, {"flow_count": 0}, {"mean": -1.0},
    {"kind": "heavy", "mean": 600.0}, {"kind": "empirical"},
])
def test_invalid_patterns(kwargs):
    with pytest.raises(ValueError):
        TrafficPattern(**kwargs)


def test_pattern_label():
    assert TrafficPattern("pareto", 50.0).label == "heavy(mu=50)"
    assert TrafficPattern("exponential", 12.5).label == "light(mu=12.5)"


# -- light tailed ----------------------------------------------------------------

def test_light_tailed_mean():
    x = sample_light_tailed(50.0, seed=1, size=N)
    assert x.max() <= MAX_SIZE and x.min() > 0
    target = truncated_exponential_mean(50.0)
    assert abs(x.mean() - target) <= 3 * x.std(ddof=1) / math.sqrt(N)
    # the cut at 500 shifts the mean by 500 e^-10 / (1 - e^-10), about 0.045%
    assert 50.0 - target == pytest.approx(500 * math.exp(-10) / (1 - math.exp(-10)))
    assert 50.0 - target < 0.0005 * 50.0


def test_truncated_mean_by_quadrature():
    mu, h = 200.0, MAX_SIZE
    xs = np.linspace(0, h, 200_001)
    dens = np.exp(-xs / mu)
    assert truncated_exponential_mean(mu, h) == pytest.approx(np.trapezoid(xs * dens, xs) / np.trapezoid(dens, xs), rel=1e-6)


# -- bounded Pareto --------------------------------------------------------------

def test_pareto_solved_shape():
    alpha = pareto_shape_for_mean(50.0)
    assert bounded_pareto_mean(alpha) == pytest.approx(50.0, abs=1e-6)


def test_pareto_mean_formula_by_quadrature():
    for alpha in (0.5, 1.0, 1.3, 2.5):
        xs = np.geomspace(MIN_SIZE, MAX_SIZE, 400_001)
        dens = xs ** (-alpha - 1)
        want = np.trapezoid(xs * dens, xs) / np.trapezoid(dens, xs)
        assert bounded_pareto_mean(alpha) == pytest.approx(want, rel=1e-6)


def test_pareto_sample_mean():
    x = sample_bounded_pareto(50.0, seed=3, size=N)
    assert x.min() >= MIN_SIZE and x.max() <= MAX_SIZE
    assert abs(x.mean() - 50.0) <= 3 * x.std(ddof=1) / math.sqrt(N)


@given(st.floats(2.2, 82.0), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_pareto_support(mean, seed):
    x = sample_bounded_pareto(mean, seed=seed, size=200)
    assert np.all((x >= MIN_SIZE) & (x <= MAX_SIZE))
    assert bounded_pareto_mean(pareto_shape_for_mean(mean)) == pytest.approx(mean, abs=1e-6)


def test_pareto_reachable_means():
    # shapes in (0.05, 20) cover means from about 2.105 to 82.33
    assert bounded_pareto_mean(20.0) == pytest.approx(2.0 * 20 / 19, rel=1e-9)
    assert 82.0 < bounded_pareto_mean(0.05) < 82.5


@pytest.mark.parametrize("mean", [2.0, 1.0, 2.05, 90.0, 500.0, 900.0])
def test_pareto_mean_out_of_range(mean):
    with pytest.raises(ValueError):
        pareto_shape_for_mean(mean)


# -- empirical -------------------------------------------------------------------

def test_point_mass():
    t = CdfTable([(7.0, 1.0)])
    assert set(sample_empirical(t, seed=0, size=1000)) == {7.0}


def test_interpolation_midpoint():
    t = CdfTable([(0.0, 0.0), (10.0, 1.0)])
    assert t.quantile(0.5) == pytest.approx(5.0)


def test_two_row_table_support():
    t = CdfTable([(2.0, 0.5), (500.0, 1.0)])
    x = sample_empirical(t, seed=5, size=N)
    assert x.min() >= 2.0 and x.max() <= 500.0
    assert np.mean(x == 2.0) == pytest.approx(0.5, abs=0.01)


def test_ks_against_placeholder_table():
    t = CdfTable.from_csv(PLACEHOLDER)
    x = sample_empirical(t, seed=6, size=N)
    assert ks_distance(x, t) < 0.02


def test_ks_random_tables():
    rng = np.random.default_rng(8)
    for _ in range(5):
        k = int(rng.integers(2, 12))
        sizes = np.sort(rng.choice(np.arange(1, 1000), k, replace=False)).astype(float)
        probs = np.sort(rng.random(k))
        probs[-1] = 1.0
        t = CdfTable(list(zip(sizes, probs)))
        assert ks_distance(sample_empirical(t, seed=rng, size=N), t) < 0.02


@pytest.mark.parametrize("rows", [
    [], [(2, 0.5), (1, 1.0)], [(1, 0.6), (2, 0.5), (3, 1.0)], [(1, 0.2), (2, 0.9)], [(-1, 0.5), (2, 1.0)],
])
def test_bad_tables(rows):
    with pytest.raises(ValueError):
        CdfTable(rows)


def test_csv_needs_header(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("2,0.5\n500,1\n")
    with pytest.raises(ValueError, match="header"):
        CdfTable.from_csv(p)
    p.write_text("size,cumulative_probability\n2,0.5\n500,1\n")
    assert len(CdfTable.from_csv(p)) == 2


def test_empirical_pattern_arrivals():
    g = resolve_topology("gscale")
    p = TrafficPattern("empirical", arrival_rate=1.0, flow_count=500,
                       cdf_source=str(PLACEHOLDER))
    flows = generate_arrivals(p, g, seed=1)
    assert all(MIN_SIZE <= f.total_volume <= MAX_SIZE for f in flows)
