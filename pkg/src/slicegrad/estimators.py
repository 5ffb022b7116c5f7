"""Gradient estimators for d/dtheta E_{x ~ p(x; theta)}[phi(x)].

Every estimator here weights function values.  The likelihood-ratio kinds
(GLR, BLR) sample from the base distribution itself; the slice-ratio kinds
(SLRG, WRG, LRG, TRRG, BRG, DRG, DLRG) importance-sample from a
distribution shaped like |dp/dtheta| so that the weight (dp/dtheta)/q has
small (often constant) magnitude.  RP differentiates through x = mu + sigma*eps.

Parameters are a mean vector ``mu`` and per-coordinate scale ``sigma``.  For
the Beta kinds ``sigma`` is the standard deviation the stretched base
distribution is given (stretch k = 2 sigma sqrt(2 alpha + 1)).

In more than one dimension the factorized slice-ratio kinds by default use
the per-dimension scheme: coordinate i of the gradient carries only
coordinate i's weight, and the product of the other coordinates' ratios
p_j/q_j is replaced by its expectation, 1.
"""

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import distributions as dist
from .errors import ConfigError, DegenerateError, DomainError
from .specfn import log_beta

__all__ = [
    "Kind",
    "EstimatorKind",
    "GradientEstimate",
    "PhiOracle",
    "Draw",
    "score_weight_gaussian_mu",
    "score_weight_gaussian_sigma",
    "score_weight_beta_mu",
    "is_weight",
    "antithetic_reflect",
    "optimal_baseline",
    "general_slice_weight",
    "draw",
    "pair_contributions",
    "estimate_gradient",
    "rp_gradient",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
SLRG_CONSTANT = 2.0 / _SQRT_2PI
WRG_CONSTANT = 2.0 * math.sqrt(2.0) / math.sqrt(math.e * math.pi)

# rows per chunk in estimate_gradient; fixed so RNG consumption never depends on n
_CHUNK = 1 << 15


class Kind(enum.Enum):
    GLR_mu = "glr"
    GLR_sigma = "glr_sigma"
    BLR_mu = "blr"
    RP = "rp"
    SLRG = "slrg"
    WRG = "wrg"
    LRG = "lrg"
    TRRG = "trrg"
    BRG = "brg"
    DRG = "drg"
    DLRG = "dlrg"


_DEFAULT_PARAM = {Kind.TRRG: 0.5, Kind.BRG: 1.5, Kind.BLR_mu: 1.5}
_ALIASES = {"glr_mu": "glr", "slr": "glr_sigma", "blr_mu": "blr"}
_SIGMA_KINDS = {Kind.GLR_sigma, Kind.WRG}
_DIRECTIONAL = {Kind.DRG, Kind.DLRG}


@dataclass(frozen=True)
class EstimatorKind:
    """An estimator identity plus its parameter (c for TRRG, alpha for BRG/BLR)."""

    tag: Kind
    param: Optional[float] = None

    def __post_init__(self):
        tag = Kind(self.tag)
        object.__setattr__(self, "tag", tag)
        if tag in _DEFAULT_PARAM:
            p = _DEFAULT_PARAM[tag] if self.param is None else float(self.param)
            object.__setattr__(self, "param", p)
            if tag is Kind.TRRG and not p >= 0:
                raise ConfigError(f"TRRG offset c must be >= 0, got {p}")
            if tag in (Kind.BRG, Kind.BLR_mu) and not p > 1:
                raise ConfigError(f"{tag.value} needs alpha > 1, got {p}")
        elif self.param is not None:
            raise ConfigError(f"{tag.value} takes no parameter")

    @classmethod
    def parse(cls, text):
        """Parse spellings like ``glr``, ``trrg:0.5``, ``brg:1.5``."""
        name, _, arg = text.strip().lower().partition(":")
        name = _ALIASES.get(name, name)
        try:
            tag = Kind(name)
        except ValueError:
            raise ConfigError(f"unknown estimator {text!r}") from None
        if arg and tag not in _DEFAULT_PARAM:
            raise ConfigError(f"{name} takes no parameter")
        try:
            return cls(tag, float(arg) if arg else None)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad estimator parameter in {text!r}") from None

    def __str__(self):
        if self.param is None:
            return self.tag.value
        return f"{self.tag.value}:{self.param!r}"

    @property
    def wrt(self):
        """``"mu"`` or ``"sigma"``: which parameter the estimator differentiates."""
        return "sigma" if self.tag in _SIGMA_KINDS else "mu"

    @property
    def directional(self):
        return self.tag in _DIRECTIONAL

    @property
    def beta_base(self):
        return self.tag in (Kind.BRG, Kind.BLR_mu)


def _kind(kind):
    if isinstance(kind, EstimatorKind):
        return kind
    if isinstance(kind, Kind):
        return EstimatorKind(kind)
    return EstimatorKind.parse(str(kind))


@dataclass
class GradientEstimate:
    """A gradient estimate.

    ``coord_variance`` is the estimated variance of each coordinate of
    ``grad`` (per-unit sample variance over the number of independent units,
    pairs when antithetic); ``variance`` is its sum.
    """

    grad: np.ndarray
    n_samples: int
    variance: float
    coord_variance: np.ndarray = None

    @property
    def std_error(self):
        return np.sqrt(self.coord_variance)


@dataclass
class PhiOracle:
    """Function under the expectation.

    ``f`` maps a batch ``X`` of shape (n, dim) to n values.  A noisy oracle
    (``noisy=True``) is called as ``f(X, noise)`` with one explicit standard
    normal per row, keeping it deterministic given its inputs.  ``grad``
    (batch -> (n, dim)) is only needed for RP.
    """

    f: Callable
    grad: Optional[Callable] = None
    noisy: bool = False

    def __call__(self, X, noise=None):
        if self.noisy:
            if noise is None:
                raise ConfigError("noisy oracle called without a noise draw")
            return np.asarray(self.f(X, noise), dtype=float)
        return np.asarray(self.f(X), dtype=float)


def score_weight_gaussian_mu(x, mu=0.0, sigma=1.0):
    """d log N(x; mu, sigma) / d mu."""
    return (np.asarray(x, dtype=float) - mu) / (sigma * sigma)


def score_weight_gaussian_sigma(x, mu=0.0, sigma=1.0):
    """d log N(x; mu, sigma) / d sigma."""
    s = (np.asarray(x, dtype=float) - mu) / sigma
    return (s * s - 1.0) / sigma


def score_weight_beta_mu(eps_beta, alpha, k=1.0):
    """d log p / d mu for the shifted symmetric Beta, given eps_beta = t - 1/2.

    Diverges at the support edges |eps_beta| -> 1/2, which is what makes the
    plain likelihood-ratio estimator for this family so noisy.
    """
    e = np.asarray(eps_beta, dtype=float)
    if np.any(~(np.abs(e) < 0.5)):
        raise DomainError("score_weight_beta_mu requires |eps_beta| < 0.5")
    if not alpha > 1:
        raise DomainError("alpha must exceed 1")
    out = 2.0 * e * (alpha - 1.0) / ((0.25 - e * e) * k)
    return float(out) if out.ndim == 0 else out


def beta_slice_constant(alpha, k=1.0):
    """|weight| of the Beta slice-ratio estimator: 2 * 0.25^(alpha-1) / (B(alpha, alpha) k)."""
    return 2.0 * math.exp((alpha - 1.0) * math.log(0.25) - log_beta(alpha, alpha)) / k


def trrg_constant(c):
    """(1 - Phi(c)) / exp(-c^2/2)."""
    return float(1.0 / dist.trunc_ratio_constant(c))


def drg_constant(dim):
    """sqrt(2) Gamma((D+1)/2) / Gamma(D/2)."""
    if dim == 1:
        # Gamma(1) / Gamma(1/2) = 1 / sqrt(pi), correctly rounded
        return math.sqrt(2.0 / math.pi)
    if dim < 340:
        return math.sqrt(2.0) * math.gamma((dim + 1) / 2.0) / math.gamma(dim / 2.0)
    return math.sqrt(2.0) * math.exp(math.lgamma((dim + 1) / 2.0) - math.lgamma(dim / 2.0))


def _require(aux, key, kind):
    if aux is None or key not in aux:
        raise DomainError(f"{kind} weight needs aux[{key!r}]")
    return np.asarray(aux[key], dtype=float)


def is_weight(kind, x, mu=0.0, sigma=1.0, aux=None):
    """Weight (dp/dtheta)/q(x) that multiplies phi(x) for a draw x from ``kind``'s q.

    ``aux`` carries sampler intermediates: ``eps_c`` (TRRG), ``radius``
    (LRG; |x-mu|/sigma), ``z`` (DRG, DLRG; chi radius).  For DRG/DLRG ``x``
    has the dimension on its last axis and the result is a vector per draw.
    For the likelihood-ratio kinds this is simply the score.
    """
    k = _kind(kind)
    tag = k.tag
    x = np.asarray(x, dtype=float)
    if tag is Kind.GLR_mu:
        return score_weight_gaussian_mu(x, mu, sigma)
    if tag is Kind.GLR_sigma:
        return score_weight_gaussian_sigma(x, mu, sigma)
    if tag is Kind.BLR_mu:
        kk = 2.0 * sigma * math.sqrt(2.0 * k.param + 1.0)
        return score_weight_beta_mu((x - mu) / kk, k.param, kk)
    if tag is Kind.RP:
        raise ConfigError("RP does not weight function values")
    s = (x - mu) / sigma
    if tag is Kind.SLRG:
        return np.sign(s) * SLRG_CONSTANT / sigma
    if tag is Kind.BRG:
        kk = 2.0 * sigma * math.sqrt(2.0 * k.param + 1.0)
        return np.sign(s) * beta_slice_constant(k.param, kk)
    if tag is Kind.TRRG:
        eps_c = _require(aux, "eps_c", tag.value)
        return np.sign(s) * 2.0 * eps_c / sigma * trrg_constant(k.param)
    if tag is Kind.WRG:
        return np.sign(s * s - 1.0) * WRG_CONSTANT / sigma
    if tag is Kind.LRG:
        r = _require(aux, "radius", tag.value)
        return np.sign(s) / (sigma * r)
    if tag in _DIRECTIONAL:
        z = _require(aux, "z", tag.value)[..., None]
        dim = x.shape[-1]
        r_hat = s / z
        if tag is Kind.DRG:
            return r_hat / sigma * drg_constant(dim)
        return dim * r_hat / (z * sigma)
    raise ConfigError(f"no weight for {k}")  # pragma: no cover


def general_slice_weight(dpdmu_sign, H):
    """Slice-ratio weight sgn(dp/dmu) * H for an arbitrary density.

    ``H`` is the total length of the density's projection onto the height
    axis (2 * max density for a unimodal one).
    """
    if not np.all(np.isfinite(H)):
        raise DomainError("projected height H must be finite")
    return np.sign(dpdmu_sign) * H


def antithetic_reflect(x, center):
    """Reflect x through center: ``2 * center - x``."""
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    if x.shape[-1:] != center.shape[-1:] and center.ndim > 0:
        raise DomainError("antithetic_reflect: length mismatch")
    return 2.0 * center - x


def optimal_baseline(weights, phis):
    """Variance-minimizing constant baseline sum(w^2 phi) / sum(w^2)."""
    w = np.asarray(weights, dtype=float)
    f = np.asarray(phis, dtype=float)
    if w.shape != f.shape or w.size == 0:
        raise DomainError("weights and phis must be nonempty and of equal length")
    w2 = w * w
    total = w2.sum()
    if total == 0.0:
        raise DegenerateError("all weights are zero")
    return float((w2 * f).sum() / total)


@dataclass
class Draw:
    """A batch of draws from an estimator's sampling distribution.

    x, w : (n, dim) arrays of points and per-coordinate weights.
    log_ratio : (n, dim) log p_i(x_i) - log q_i(x_i), or None when q = p
        or the kind is not factorized.
    parity : -1 if reflecting x through mu negates the weight, +1 if it keeps it.
    """

    x: np.ndarray
    w: np.ndarray
    log_ratio: Optional[np.ndarray]
    parity: int


def _unit_spec(k):
    tag = k.tag
    if tag in (Kind.GLR_mu, Kind.GLR_sigma):
        return dist.gaussian()
    if tag is Kind.BLR_mu:
        return dist.DistSpec(dist.DistTag.SymBeta, dist.SymBetaParams.matched(k.param))
    if tag is Kind.SLRG:
        return dist.bdist()
    if tag is Kind.WRG:
        return dist.wdist()
    if tag is Kind.LRG:
        return dist.ldist()
    if tag is Kind.TRRG:
        return dist.trunc_ratio(k.param)
    if tag is Kind.BRG:
        return dist.DistSpec(dist.DistTag.BetaSlice, dist.SymBetaParams.matched(k.param))
    raise ConfigError(f"{k} has no per-coordinate sampler")


def _base_spec(k):
    if k.beta_base:
        return dist.DistSpec(dist.DistTag.SymBeta, dist.SymBetaParams.matched(k.param))
    return dist.gaussian()


def draw(kind, rng, n, mu, sigma, log_ratio=False):
    """Draw n points (rows) from ``kind``'s sampling distribution with their weights.

    Factorized kinds sample each coordinate independently in standardized
    form and rescale, so ``mu`` and ``sigma`` may differ per coordinate.
    DRG/DLRG sample the whole vector (spherical ``sigma`` only).
    """
    k = _kind(kind)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), mu.shape)
    dim = mu.shape[0]
    if k.tag is Kind.RP:
        raise ConfigError("RP draws are handled by rp_gradient")
    if k.directional:
        if not np.all(sigma == sigma[0]):
            raise ConfigError(f"{k} requires a spherical Gaussian (one shared sigma)")
        s0 = float(sigma[0])
        offset = 1 if k.tag is Kind.DRG else 2
        normals = rng.standard_normal((n, dim + offset))
        xs, aux = dist.directional_sample(dim, offset, s0, normals, return_aux=True)
        x = mu + xs
        w = is_weight(k, x, mu, s0, aux)
        return Draw(x, w, None, -1)

    spec = _unit_spec(k)
    u = dist.draw_uniforms(spec, rng, (n, dim))
    s, aux = dist.sample(spec, u, return_aux=True)
    x = mu + sigma * s
    tag = k.tag
    if tag is Kind.GLR_mu:
        w = s / sigma
    elif tag is Kind.GLR_sigma:
        w = (s * s - 1.0) / sigma
    elif tag is Kind.BLR_mu:
        kk = 2.0 * math.sqrt(2.0 * k.param + 1.0)
        e = aux["eps_beta"]
        w = 2.0 * e * (k.param - 1.0) / ((0.25 - e * e) * kk * sigma)
    elif tag is Kind.LRG:
        w = np.sign(s) / (sigma * aux["radius"])
    else:
        w = is_weight(k, s, 0.0, 1.0, aux) / sigma
    parity = 1 if k.wrt == "sigma" else -1
    lr = None
    if log_ratio and tag not in (Kind.GLR_mu, Kind.GLR_sigma, Kind.BLR_mu):
        with np.errstate(divide="ignore"):
            lr = np.log(dist.pdf(_base_spec(k), s)) - np.log(dist.pdf(spec, s))
    return Draw(x, w, lr, parity)


def pair_contributions(w, parity, f_plus, f_minus):
    """Per-pair gradient contributions (w+ f+ + w- f-) / 2 for antithetic pairs.

    For odd weights this is ``w * (f+ - f-) / 2``, computed from the raw
    difference so that a common additive constant in f cancels before it is
    ever multiplied by a weight.
    """
    f_plus = np.asarray(f_plus, dtype=float)[:, None]
    f_minus = np.asarray(f_minus, dtype=float)[:, None]
    if parity < 0:
        return w * ((f_plus - f_minus) * 0.5)
    return w * ((f_plus + f_minus) * 0.5)


def _as_mu_sigma(dim, mu, sigma):
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (dim,)).copy()
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (dim,)).copy()
    if np.any(~(sigma > 0)):
        raise DomainError("sigma must be positive")
    return mu, sigma


class _Moments:
    """Chunked mean / M2 accumulator (Chan et al. pairwise update)."""

    def __init__(self, dim):
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def add(self, c):
        m = c.shape[0]
        if m == 0:
            return
        cm = c.mean(axis=0)
        c2 = ((c - cm) ** 2).sum(axis=0)
        if self.n == 0:
            self.n, self.mean, self.m2 = m, cm, c2
            return
        tot = self.n + m
        delta = cm - self.mean
        self.mean = self.mean + delta * (m / tot)
        self.m2 = self.m2 + c2 + delta * delta * (self.n * m / tot)
        self.n = tot

    def variance_of_mean(self):
        if self.n < 2:
            return np.full_like(self.mean, math.nan)
        return self.m2 / (self.n - 1) / self.n

    def result(self, n_samples):
        cv = self.variance_of_mean()
        return GradientEstimate(self.mean, n_samples, float(cv.sum()), cv)


def _baseline_value(baseline, w, values):
    if baseline is None:
        return 0.0
    if baseline == "mean":
        return float(values.mean())
    if baseline == "optimal":
        w2 = w * w
        denom = w2.sum(axis=0)
        if np.any(denom == 0):
            raise DegenerateError("optimal baseline undefined: zero weights")
        return (w2 * values[:, None]).sum(axis=0) / denom
    return float(baseline)


def estimate_gradient(kind, dim, mu, sigma, phi, n_samples, rng, *, antithetic=True,
                      per_dim_scheme=None, noise_rng=None, baseline=None):
    """Monte Carlo estimate of the mu- (or sigma-) gradient of E[phi(x)].

    Parameters
    ----------
    kind : EstimatorKind, Kind or str
    dim : int
    mu, sigma : float or (dim,) array
    phi : PhiOracle
    n_samples : int
        Number of function evaluations; must be even when ``antithetic``.
    rng : numpy Generator
        Stream for the x draws.
    antithetic : bool
        Consume draws in pairs reflected through mu sharing one weight
        magnitude.
    per_dim_scheme : bool or None
        For factorized slice-ratio kinds: drop the other coordinates'
        importance ratios (default) or keep them (``False``; exact but its
        variance grows exponentially with dim).
    noise_rng : numpy Generator, optional
        Stream for the oracle's noise draws when ``phi.noisy``.
    baseline : None, float, "mean" or "optimal"
        Constant subtracted from phi before weighting.

    Returns
    -------
    GradientEstimate
    """
    k = _kind(kind)
    if not isinstance(phi, PhiOracle):
        phi = PhiOracle(phi)
    if k.tag is Kind.RP:
        return rp_gradient(phi, mu, sigma, n_samples, rng, dim=dim, antithetic=antithetic,
                           noise_rng=noise_rng)
    if dim < 1:
        raise ConfigError("dim must be >= 1")
    if antithetic and n_samples % 2:
        raise ConfigError("n_samples must be even with antithetic sampling")
    if n_samples < 1:
        raise ConfigError("n_samples must be positive")
    if k.directional and per_dim_scheme:
        raise ConfigError(f"{k} samples the full vector; the per-dimension scheme does not apply")
    full_weights = per_dim_scheme is False and not k.directional
    mu, sigma = _as_mu_sigma(dim, mu, sigma)
    if phi.noisy and noise_rng is None:
        noise_rng = rng.spawn(1)[0]

    units = n_samples // 2 if antithetic else n_samples
    acc = _Moments(dim)
    done = 0
    while done < units:
        m = min(_CHUNK, units - done)
        dr = draw(k, rng, m, mu, sigma, log_ratio=full_weights)
        w = dr.w
        if full_weights and dr.log_ratio is not None:
            total = dr.log_ratio.sum(axis=1, keepdims=True)
            w = w * np.exp(total - dr.log_ratio)
        if antithetic:
            X = np.concatenate([dr.x, antithetic_reflect(dr.x, mu)], axis=0)
        else:
            X = dr.x
        noise = noise_rng.standard_normal(X.shape[0]) if phi.noisy else None
        values = phi(X, noise)
        if antithetic:
            f_plus, f_minus = values[:m], values[m:]
            if baseline is not None and dr.parity > 0:
                ww = np.concatenate([w, w], axis=0)
                b = _baseline_value(baseline, ww, values)
                c = w * (((f_plus[:, None] - b) + (f_minus[:, None] - b)) * 0.5)
            else:
                c = pair_contributions(w, dr.parity, f_plus, f_minus)
        else:
            b = _baseline_value(baseline, w, values)
            c = w * (values[:, None] - b)
        acc.add(c)
        done += m
    return acc.result(n_samples)


def rp_gradient(phi, mu, sigma, n, rng, *, dim=None, wrt="mu", antithetic=False, noise_rng=None):
    """Reparameterization gradient with x = mu + sigma * eps.

    The per-sample estimate is dphi/dx (for mu) or dphi/dx * eps (for sigma).
    """
    if not isinstance(phi, PhiOracle):
        raise ConfigError("rp_gradient needs a PhiOracle with a gradient")
    if phi.grad is None:
        raise ConfigError("RP requires the oracle's gradient")
    if wrt not in ("mu", "sigma"):
        raise ConfigError("wrt must be 'mu' or 'sigma'")
    if dim is None:
        dim = np.atleast_1d(mu).shape[0]
    mu, sigma = _as_mu_sigma(dim, mu, sigma)
    if antithetic and n % 2:
        raise ConfigError("n must be even with antithetic sampling")
    units = n // 2 if antithetic else n
    acc = _Moments(dim)
    done = 0
    while done < units:
        m = min(_CHUNK, units - done)
        eps = rng.standard_normal((m, dim))
        if antithetic:
            eps = np.concatenate([eps, -eps], axis=0)
        X = mu + sigma * eps
        if phi.noisy:
            noise_rng = noise_rng if noise_rng is not None else rng.spawn(1)[0]
            g = np.asarray(phi.grad(X, noise_rng.standard_normal(X.shape[0])), dtype=float)
        else:
            g = np.asarray(phi.grad(X), dtype=float)
        c = g if wrt == "mu" else g * eps
        if antithetic:
            c = 0.5 * (c[:m] + c[m:])
        acc.add(c)
        done += m
    return acc.result(n)
