import csv
import io
import math

import numpy as np
import pytest

from slicegrad import bench
from slicegrad import distributions as dist
from slicegrad.bench import BenchConfig, QuadraticProblem, quad_phi
from slicegrad.errors import ConfigError, DomainError
from slicegrad.estimators import PhiOracle, WRG_CONSTANT, estimate_gradient
from slicegrad.streams import substream


def noise_only(problem):
    return PhiOracle(lambda X, n: problem.noise_sigma * n, noisy=True)


def test_quad_phi_examples():
    p = QuadraticProblem.standard(5)
    assert quad_phi(p, p.a) == 0.0
    for dim in (1, 7, 1000):
        assert quad_phi(QuadraticProblem.standard(dim), np.zeros(dim)) == pytest.approx(1.0)
    p2 = QuadraticProblem(2, np.array([1.0, 1.0]))
    assert quad_phi(p2, np.array([1.0, 3.0])) == 1.0
    with pytest.raises(DomainError):
        quad_phi(p2, np.zeros(3))


def test_quad_phi_matches_dense_form():
    rng = np.random.default_rng(0)
    p = QuadraticProblem(6, rng.standard_normal(6), 0.5)
    X = rng.standard_normal((20, 6))
    n = rng.standard_normal(20)
    d = X - p.a
    dense = np.einsum("ni,ij,nj->n", d, p.Q, d) + 0.5 * n
    np.testing.assert_allclose(quad_phi(p, X, n), dense, rtol=1e-13)


def test_quad_oracle_gradient():
    p = QuadraticProblem.standard(4)
    X = np.random.default_rng(1).standard_normal((3, 4))
    g = bench.quad_oracle(p).grad(X)
    np.testing.assert_allclose(g, 2 * (X - p.a) @ p.Q, rtol=1e-13)


def test_bench_config_validation():
    with pytest.raises(ConfigError):
        BenchConfig(samples_per_estimate=99)
    with pytest.raises(ConfigError):
        BenchConfig(dims=[0])
    with pytest.raises(ConfigError):
        BenchConfig(estimators=["bogus"])
    cfg = BenchConfig()
    assert cfg.repeats_for(100) == 5000 and cfg.repeats_for(1000) == 1000
    assert [str(e) for e in cfg.estimators] == ["glr", "slrg", "trrg:0.5", "brg:1.5"]


def test_wrong_gradient_kind_rejected():
    with pytest.raises(ConfigError):
        bench.run_variance_bench(BenchConfig(dims=[1], repeats=10, estimators=["wrg"]))
    with pytest.raises(ConfigError):
        bench.run_sigma_bench(BenchConfig(dims=[1], repeats=10, estimators=["glr"]))


def test_noise_only_floor():
    # 1000 coordinates, each eps (n+ - n-)/2 per pair: 1000 * 0.5 / 50
    cfg = BenchConfig(dims=[1000], repeats=1000, estimators=["glr"], threads=4)
    (r,) = bench.run_variance_bench(cfg, 1.0, phi_for=noise_only)
    assert r.variance == pytest.approx(10.0, rel=0.02)
    assert r.ci_low <= r.variance <= r.ci_high


def test_reports_and_ci():
    cfg = BenchConfig(dims=[1, 10], repeats=300, estimators=["glr", "slrg"])
    reps = bench.run_variance_bench(cfg, 1.0)
    assert [(str(r.estimator), r.dim) for r in reps] == [("glr", 1), ("glr", 10), ("slrg", 1), ("slrg", 10)]
    for r in reps:
        assert r.ci_low <= r.variance <= r.ci_high
        assert r.repeats == 300 and r.samples == 100 and r.noise_sigma == 1.0


def test_deterministic_and_thread_independent():
    cfg = lambda t: BenchConfig(dims=[3, 20], repeats=64, estimators=["glr", "brg:1.5", "drg"], seed=42,
                                threads=t)
    a = bench.write_variance_csv(bench.run_variance_bench(cfg(1), 1.0))
    b = bench.write_variance_csv(bench.run_variance_bench(cfg(4), 1.0))
    assert a == b
    c = bench.write_variance_csv(bench.run_variance_bench(
        BenchConfig(dims=[3, 20], repeats=64, estimators=["glr", "brg:1.5", "drg"], seed=43), 1.0))
    assert a != c


def test_noise_does_not_change_sampled_points():
    # same x stream with and without noise: noisy minus clean gradient is pure noise
    p_clean = QuadraticProblem.standard(5, 0.0)
    p_noisy = QuadraticProblem.standard(5, 1.0)
    g0 = estimate_gradient("glr", 5, 0.0, 1.0, bench.quad_oracle(p_clean), 100, substream(0, "r"))
    g1 = estimate_gradient("glr", 5, 0.0, 1.0, bench.quad_oracle(p_noisy), 100, substream(0, "r"),
                           noise_rng=substream(0, "n"))
    gn = estimate_gradient("glr", 5, 0.0, 1.0, noise_only(p_noisy), 100, substream(0, "r"),
                           noise_rng=substream(0, "n"))
    np.testing.assert_allclose(g1.grad - g0.grad, gn.grad, atol=1e-12)


def test_csv_format():
    cfg = BenchConfig(dims=[2], repeats=20, estimators=["trrg:0.5"], seed=7)
    text = bench.write_variance_csv(bench.run_variance_bench(cfg, 0.0))
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == list(bench.VARIANCE_COLUMNS)
    assert rows[1][0] == "trrg:0.5" and rows[1][1] == "2" and rows[1][-1] == "7"
    assert float(rows[1][3]) >= 0


def test_bootstrap_ci():
    rng = substream(0, "boot")
    lo, hi = bench.bootstrap_ci(np.full(50, 3.0), 200, rng)
    assert lo == hi == 0.0
    x = rng.standard_normal(1000) * 2.0
    lo, hi = bench.bootstrap_ci(x, 2000, rng)
    v = np.var(x, ddof=1)
    assert lo <= v <= hi
    # sd of a sample variance of normals is sqrt(2/(n-1)) var
    assert (hi - lo) / 2 == pytest.approx(math.sqrt(2 / 999) * v, rel=0.2)
    with pytest.raises(DomainError):
        bench.bootstrap_ci([1.0], 10, rng)


def test_bootstrap_matches_naive_resampling():
    rng = np.random.default_rng(5)
    G = rng.standard_normal((40, 3))
    lo, hi = bench.bootstrap_ci(G, 500, np.random.default_rng(9))
    # same resamples drawn explicitly
    r2 = np.random.default_rng(9)
    C = r2.multinomial(40, np.full(40, 1 / 40), size=500)
    stats_ = [np.repeat(G, c, axis=0).var(axis=0, ddof=1).sum() for c in C]
    sd = np.std(stats_, ddof=1)
    v = G.var(axis=0, ddof=1).sum()
    assert lo == pytest.approx(v - sd, rel=1e-10)
    assert hi == pytest.approx(v + sd, rel=1e-10)


def test_crossover_small_dims():
    cfg = BenchConfig(dims=[1, 10, 100], repeats=1000, estimators=["glr", "slrg"])
    noisy = {(str(r.estimator), r.dim): r.variance for r in bench.run_variance_bench(cfg, 1.0)}
    for d in (1, 10, 100):
        assert noisy[("slrg", d)] < noisy[("glr", d)]


def test_sigma_bench_noise_only_ratio():
    # per pair, GLR-sigma gives (eps^2 - 1)(n+ + n-)/2 and WRG gives +-K (n+ + n-)/2
    n = 2 * 10**6
    phi = PhiOracle(lambda X, e: e, noisy=True)
    slr = estimate_gradient("glr_sigma", 1, 0.0, 1.0, phi, n, substream(1), noise_rng=substream(2))
    wrg = estimate_gradient("wrg", 1, 0.0, 1.0, phi, n, substream(3), noise_rng=substream(4))
    expected = WRG_CONSTANT**2 / 2.0
    assert wrg.variance / slr.variance == pytest.approx(expected, rel=0.02)
    assert expected == pytest.approx(4 / (math.e * math.pi))


def test_sigma_bench_constant_phi():
    cfg = BenchConfig(dims=[1, 5], repeats=50, estimators=["glr_sigma", "wrg"])
    zero = lambda p: PhiOracle(lambda X: np.zeros(X.shape[0]))
    for r in bench.run_sigma_bench(cfg, 0.0, phi_for=zero):
        assert r.variance == 0.0


def test_sigma_bench_wrg_wins_noisy_high_dim():
    cfg = BenchConfig(dims=[1000], repeats=200, estimators=["glr_sigma", "wrg"], threads=4)
    r = {str(x.estimator): x.variance for x in bench.run_sigma_bench(cfg, 1.0)}
    assert r["wrg"] < r["glr_sigma"]


def test_sigma_bench_default_estimators():
    cfg = BenchConfig(dims=[2], repeats=10)
    assert [str(r.estimator) for r in bench.run_sigma_bench(cfg, 1.0)] == ["glr_sigma", "wrg"]


def test_alternatives_low_dim():
    cfg = BenchConfig(dims=[1], repeats=2000, estimators=["glr", "slrg", "drg", "dlrg", "lrg"])
    r = {str(x.estimator): x for x in bench.run_alternatives_bench(cfg, 0.0)}
    assert r["dlrg"].variance * 10 <= r["glr"].variance
    assert r["lrg"].variance * 10 <= r["glr"].variance
    # at D = 1 the DRG proposal is the B-distribution and its weight the SLRG constant
    s, d = r["slrg"], r["drg"]
    assert abs(s.variance - d.variance) <= 2 * ((s.ci_high - s.ci_low) / 2 + (d.ci_high - d.ci_low) / 2)


def test_conformance_reports():
    for d in (dist.bdist(), dist.wdist()):
        rep = bench.dist_conformance_report(d, 10**5, 100, substream(0, "conf", d.tag.value))
        assert rep.p_value > 1e-3
        mass = np.sum(rep.empirical_density * np.diff(rep.edges))
        assert abs(mass - 1.0) < 1e-12
    text = bench.write_conformance_csv(rep)
    assert text.splitlines()[0] == "x,empirical_density,analytic_pdf"
    assert len(text.splitlines()) == 101


def test_conformance_detects_wrong_sampler():
    # samples from the B-distribution scored against the L-distribution pdf
    d = dist.bdist()
    rng = substream(1, "wrong")
    wrong = dist.ldist()
    samples = dist.sample(d, dist.draw_uniforms(d, rng, 10**5))
    counts, edges = np.histogram(samples, bins=50)
    probs = bench._bin_probabilities(wrong, edges)
    exp_ = probs / probs.sum() * 10**5
    chi2 = np.sum((counts - exp_) ** 2 / np.maximum(exp_, 1e-300))
    assert chi2 > 1000
