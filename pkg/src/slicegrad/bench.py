"""Variance benchmarks on a quadratic objective, plus sampler conformance reports.

The objective is phi(x) = (x - a)^T Q (x - a) with Q = ones / D^2, optionally
with additive Gaussian noise on each evaluation.  Because Q has rank one it is
evaluated as s^2 / D^2 with s = sum(x - a), which keeps D = 1000 cheap.

Every repeat draws from its own substream keyed by (seed, estimator, dim,
repeat), so results do not depend on how many threads run them.
"""

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from . import distributions as dist
from .errors import ConfigError, DomainError
from .estimators import EstimatorKind, PhiOracle, estimate_gradient
from .streams import substream

__all__ = [
    "QuadraticProblem",
    "BenchConfig",
    "VarianceReport",
    "ConformanceReport",
    "quad_phi",
    "quad_oracle",
    "run_variance_bench",
    "run_sigma_bench",
    "run_alternatives_bench",
    "bootstrap_ci",
    "summed_variance",
    "dist_conformance_report",
    "write_variance_csv",
    "write_conformance_csv",
    "write_csv",
    "VARIANCE_COLUMNS",
]

VARIANCE_COLUMNS = ("estimator", "dim", "noise_sigma", "variance", "ci_low", "ci_high",
                    "samples", "repeats", "seed")

DEFAULT_ESTIMATORS = ("glr", "slrg", "trrg:0.5", "brg:1.5")
SIGMA_ESTIMATORS = ("glr_sigma", "wrg")
ALT_ESTIMATORS = ("glr", "slrg", "trrg:0.5", "brg:1.5", "lrg", "drg", "dlrg")


@dataclass(frozen=True)
class QuadraticProblem:
    dim: int
    a: np.ndarray
    noise_sigma: float = 0.0

    def __post_init__(self):
        a = np.broadcast_to(np.asarray(self.a, dtype=float), (self.dim,)).copy()
        object.__setattr__(self, "a", a)
        if not self.noise_sigma >= 0:
            raise DomainError("noise_sigma must be >= 0")

    @classmethod
    def standard(cls, dim, noise_sigma=0.0, center=1.0):
        """Center a = center * ones, so that phi(0) = center^2."""
        return cls(int(dim), np.full(int(dim), float(center)), float(noise_sigma))

    @property
    def Q(self):
        """Dense Q; only meant for cross-checks at small D."""
        return np.full((self.dim, self.dim), 1.0 / self.dim**2)


def quad_phi(p, x, noise_draw=0.0):
    """(x - a)^T Q (x - a) + noise_sigma * noise_draw, for one x or a batch of rows."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.dim:
        raise DomainError(f"expected length {p.dim}, got {x.shape[-1]}")
    s = (x - p.a).sum(axis=-1)
    out = s * s / (p.dim * p.dim) + p.noise_sigma * np.asarray(noise_draw, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def quad_oracle(p):
    grad = lambda X: np.repeat((2.0 * (X - p.a).sum(axis=1) / p.dim**2)[:, None], p.dim, axis=1)
    if p.noise_sigma > 0:
        return PhiOracle(lambda X, n: quad_phi(p, X, n), grad=lambda X, n: grad(X), noisy=True)
    return PhiOracle(lambda X: quad_phi(p, X), grad=grad)


@dataclass
class BenchConfig:
    dims: list = field(default_factory=lambda: [1, 10, 100, 1000])
    samples_per_estimate: int = 100
    repeats: int = None
    estimators: list = field(default_factory=lambda: list(DEFAULT_ESTIMATORS))
    seed: int = 0
    bootstrap_resamples: int = 1000
    threads: int = 1

    def __post_init__(self):
        self.estimators = [e if isinstance(e, EstimatorKind) else EstimatorKind.parse(str(e))
                           for e in self.estimators]
        self.dims = [int(d) for d in self.dims]
        if not self.dims or min(self.dims) < 1:
            raise ConfigError("dims must be positive integers")
        if self.samples_per_estimate < 2 or self.samples_per_estimate % 2:
            raise ConfigError("samples_per_estimate must be even (antithetic pairs)")
        if self.repeats is not None and self.repeats < 2:
            raise ConfigError("repeats must be at least 2")
        if self.bootstrap_resamples < 1:
            raise ConfigError("bootstrap_resamples must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be positive")

    def repeats_for(self, dim):
        if self.repeats is not None:
            return self.repeats
        return 5000 if dim <= 100 else 1000


@dataclass(frozen=True)
class VarianceReport:
    estimator: EstimatorKind
    dim: int
    variance: float
    ci_low: float
    ci_high: float
    noise_sigma: float = 0.0
    samples: int = 100
    repeats: int = 0
    seed: int = 0


def summed_variance(G):
    """Sum over columns of the ddof=1 variance of the rows of G."""
    G = np.asarray(G, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    return float(G.var(axis=0, ddof=1).sum())


def bootstrap_ci(values, resamples, rng):
    """One-standard-deviation bootstrap interval for the (summed) variance statistic.

    ``values`` holds one row per repeat (a 1-D vector is a single column).
    Resampled variances are formed from a multinomial count matrix, so the
    cost is one (resamples x n) by (n x d) product.
    """
    G = np.asarray(values, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    n = G.shape[0]
    if n < 2:
        raise DomainError("bootstrap_ci needs at least 2 values")
    stat = summed_variance(G)
    C = rng.multinomial(n, np.full(n, 1.0 / n), size=resamples).astype(float)
    Gc = G - G.mean(axis=0)
    m1 = C @ Gc / n
    m2 = C @ (Gc * Gc) / n
    boot = ((m2 - m1 * m1).sum(axis=1)) * (n / (n - 1.0))
    sd = float(boot.std(ddof=1)) if resamples > 1 else 0.0
    return stat - sd, stat + sd


def _repeat_grads(kind, dim, problem, phi, samples, repeats, seed, threads, mu, sigma, label):
    def one(r):
        rng = substream(seed, label, str(kind), dim, r, "x")
        noise = substream(seed, label, str(kind), dim, r, "noise") if phi.noisy else None
        return estimate_gradient(kind, dim, mu, sigma, phi, samples, rng, noise_rng=noise).grad

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(repeats)))
    else:
        rows = [one(r) for r in range(repeats)]
    return np.vstack(rows)


def _report(kind, dim, G, problem, cfg, repeats, label):
    lo, hi = bootstrap_ci(G, cfg.bootstrap_resamples,
                          substream(cfg.seed, label, str(kind), dim, "bootstrap"))
    return VarianceReport(kind, dim, summed_variance(G), lo, hi, problem.noise_sigma,
                          cfg.samples_per_estimate, repeats, cfg.seed)


def _family(problem_family):
    if callable(problem_family):
        return problem_family
    noise = float(problem_family)
    return lambda d: QuadraticProblem.standard(d, noise)


def _run(cfg, problem_family, label, allowed=None, phi_for=None):
    family = _family(problem_family)
    out = []
    for kind in cfg.estimators:
        if allowed is not None and kind.wrt != allowed:
            raise ConfigError(f"{kind} estimates the {kind.wrt}-gradient, this bench needs {allowed}")
        for dim in cfg.dims:
            problem = family(dim)
            phi = phi_for(problem) if phi_for else quad_oracle(problem)
            reps = cfg.repeats_for(dim)
            G = _repeat_grads(kind, dim, problem, phi, cfg.samples_per_estimate, reps,
                              cfg.seed, cfg.threads, 0.0, 1.0, label)
            out.append(_report(kind, dim, G, problem, cfg, reps, label))
    return out


def run_variance_bench(cfg, problem_family=1.0, phi_for=None):
    """Variance of the 100-sample mu-gradient at mu = 0, sigma = 1, per (estimator, dim).

    ``problem_family`` is a noise level (standard problem, a = ones) or a
    callable dim -> QuadraticProblem.  ``phi_for`` optionally replaces the
    quadratic oracle (e.g. pure noise).
    """
    return _run(cfg, problem_family, "quad", "mu", phi_for)


def run_sigma_bench(cfg, problem_family=1.0, phi_for=None):
    """As run_variance_bench but for the sigma-gradient (GLR-sigma vs WRG)."""
    if cfg.estimators == [EstimatorKind.parse(e) for e in DEFAULT_ESTIMATORS]:
        cfg.estimators = [EstimatorKind.parse(e) for e in SIGMA_ESTIMATORS]
    return _run(cfg, problem_family, "sigma", "sigma", phi_for)


def run_alternatives_bench(cfg, problem_family=1.0, phi_for=None):
    """Same protocol including LRG, DRG and DLRG."""
    if cfg.estimators == [EstimatorKind.parse(e) for e in DEFAULT_ESTIMATORS]:
        cfg.estimators = [EstimatorKind.parse(e) for e in ALT_ESTIMATORS]
    return _run(cfg, problem_family, "alt", "mu", phi_for)


@dataclass
class ConformanceReport:
    edges: np.ndarray
    centers: np.ndarray
    empirical_density: np.ndarray
    analytic_pdf: np.ndarray
    chi_square: float
    dof: int
    p_value: float


def _bin_probabilities(d, edges):
    lo, hi = dist.support(d)
    f = lambda t: float(dist.pdf(d, t))
    inner = np.array([integrate.quad(f, a, b, limit=200)[0] for a, b in zip(edges[:-1], edges[1:])])
    # tails beyond the observed range go to the outer bins
    if edges[0] > lo:
        inner[0] += integrate.quad(f, lo, edges[0], limit=200)[0]
    if edges[-1] < hi:
        inner[-1] += integrate.quad(f, edges[-1], hi, limit=200)[0]
    return inner


def dist_conformance_report(d, n, bins, rng, min_expected=5.0):
    """Histogram of n direct samples against the analytic pdf, with a chi-square test.

    Bins span the observed sample range; adjacent bins are merged for the
    test until each expected count reaches ``min_expected``.
    """
    if n < 2 or bins < 2:
        raise DomainError("need n >= 2 and bins >= 2")
    x = dist.sample(d, dist.draw_uniforms(d, rng, (n,)))
    counts, edges = np.histogram(x, bins=bins)
    widths = np.diff(edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    empirical = counts / (n * widths)
    analytic = dist.pdf(d, centers)
    probs = _bin_probabilities(d, edges)
    probs = probs / probs.sum()
    obs_m, exp_m = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(counts, probs * n):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs_m.append(acc_o)
            exp_m.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if exp_m:
            obs_m[-1] += acc_o
            exp_m[-1] += acc_e
        else:
            obs_m.append(acc_o)
            exp_m.append(acc_e)
    obs_m = np.array(obs_m)
    exp_m = np.array(exp_m)
    chi2 = float(((obs_m - exp_m) ** 2 / exp_m).sum())
    dof = max(len(obs_m) - 1, 1)
    return ConformanceReport(edges, centers, empirical, analytic, chi2, dof,
                             float(stats.chi2.sf(chi2, dof)))


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_csv(rows, header, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if out is None:
        return text
    if hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def write_variance_csv(reports, out=None):
    """Write reports as CSV to a path or text stream; returns the text."""
    rows = [(str(r.estimator), r.dim, float(r.noise_sigma), r.variance, r.ci_low, r.ci_high,
             r.samples, r.repeats, r.seed) for r in reports]
    return write_csv(rows, VARIANCE_COLUMNS, out)


def write_conformance_csv(report, out=None):
    rows = zip(report.centers.astype(float), report.empirical_density.astype(float),
               report.analytic_pdf.astype(float))
    return write_csv(rows, ("x", "empirical_density", "analytic_pdf"), out)
