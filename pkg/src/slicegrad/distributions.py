"""Densities and exact samplers for the base and importance-sampling distributions.

Samplers are deterministic maps from explicitly passed uniforms, normals and
sign/branch bits, so that a given draw can be replayed exactly (antithetic
partners, common random numbers across estimators).  ``draw_uniforms``
produces the inputs a sampler expects from a numpy ``Generator``.

Input tuples consumed by :func:`sample`, by tag:

==========  ==========================================
Gaussian    ``(normal,)``
SymBeta     ``(uniform,)``                  (inverse cdf)
BDist       ``(eps_h, sign)``
WDist       ``(eps_h, sign, lower_branch)``
LDist       ``(eps_h, normal, sign)``
TruncRatio  ``(uniform, sign)``
BetaSlice   ``(eps_h, sign)``
Chi         ``(normals,)``                 last axis has length k
==========  ==========================================

``sign`` entries are +1/-1; ``lower_branch`` is boolean (True selects the
-1 branch of Lambert W).
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateError, DomainError
from .specfn import Branch, lambert_w, log_beta, sample_truncated_normal

__all__ = [
    "GaussianParams",
    "SymBetaParams",
    "TruncRatioParams",
    "ChiParams",
    "DistTag",
    "DistSpec",
    "gaussian",
    "sym_beta",
    "bdist",
    "wdist",
    "ldist",
    "trunc_ratio",
    "beta_slice",
    "chi",
    "pdf",
    "sample",
    "draw_uniforms",
    "support",
    "unit_sphere_sample",
    "directional_sample",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianParams:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class SymBetaParams:
    """Symmetric Beta(alpha, alpha) shifted to ``mu`` and stretched by ``k``.

    A unit-interval draw t maps to ``k * (t - 0.5) + mu``; the defaults give
    the plain distribution on [0, 1].
    """

    alpha: float
    mu: float = 0.5
    k: float = 1.0

    def __post_init__(self):
        if not self.alpha > 1:
            raise DomainError(f"alpha must exceed 1, got {self.alpha}")
        if not self.k > 0:
            raise DomainError(f"stretch k must be positive, got {self.k}")

    @classmethod
    def matched(cls, alpha, mu=0.0, sigma=1.0):
        """Stretch chosen so that the standard deviation equals ``sigma``."""
        return cls(alpha, mu, 2.0 * sigma * math.sqrt(2.0 * alpha + 1.0))

    @property
    def std(self):
        return self.k / (2.0 * math.sqrt(2.0 * self.alpha + 1.0))


@dataclass(frozen=True)
class TruncRatioParams:
    c: float
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.c >= 0:
            raise DomainError(f"offset c must be >= 0, got {self.c}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class ChiParams:
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"chi degrees of freedom must be a positive integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))


class DistTag(enum.Enum):
    Gaussian = "gaussian"
    SymBeta = "symbeta"
    BDist = "bdist"
    WDist = "wdist"
    LDist = "ldist"
    TruncRatio = "truncratio"
    BetaSlice = "betaslice"
    Chi = "chi"


_PARAM_TYPE = {
    DistTag.Gaussian: GaussianParams,
    DistTag.SymBeta: SymBetaParams,
    DistTag.BDist: GaussianParams,
    DistTag.WDist: GaussianParams,
    DistTag.LDist: GaussianParams,
    DistTag.TruncRatio: TruncRatioParams,
    DistTag.BetaSlice: SymBetaParams,
    DistTag.Chi: ChiParams,
}


@dataclass(frozen=True)
class DistSpec:
    tag: DistTag
    params: object

    def __post_init__(self):
        want = _PARAM_TYPE[self.tag]
        if not isinstance(self.params, want):
            raise TypeError(f"{self.tag.name} takes {want.__name__}, got {type(self.params).__name__}")


def gaussian(mu=0.0, sigma=1.0):
    return DistSpec(DistTag.Gaussian, GaussianParams(mu, sigma))


def sym_beta(alpha, mu=0.5, k=1.0):
    return DistSpec(DistTag.SymBeta, SymBetaParams(alpha, mu, k))


def bdist(mu=0.0, sigma=1.0):
    return DistSpec(DistTag.BDist, GaussianParams(mu, sigma))


def wdist(mu=0.0, sigma=1.0):
    return DistSpec(DistTag.WDist, GaussianParams(mu, sigma))


def ldist(mu=0.0, sigma=1.0):
    return DistSpec(DistTag.LDist, GaussianParams(mu, sigma))


def trunc_ratio(c, mu=0.0, sigma=1.0):
    return DistSpec(DistTag.TruncRatio, TruncRatioParams(c, mu, sigma))


def beta_slice(alpha, mu=0.5, k=1.0):
    return DistSpec(DistTag.BetaSlice, SymBetaParams(alpha, mu, k))


def chi(k):
    return DistSpec(DistTag.Chi, ChiParams(k))


def support(d):
    """Closed support interval ``(lo, hi)``; may be infinite."""
    p = d.params
    if d.tag in (DistTag.SymBeta, DistTag.BetaSlice):
        return (p.mu - 0.5 * p.k, p.mu + 0.5 * p.k)
    if d.tag is DistTag.Chi:
        return (0.0, math.inf)
    return (-math.inf, math.inf)


def trunc_ratio_constant(c):
    """``exp(-c^2/2) / (1 - Phi(c))``, evaluated without underflow."""
    return 2.0 / special.erfcx(np.asarray(c, dtype=float) / math.sqrt(2.0))


def _beta_slice_unit_pdf(t, alpha):
    inside = (t > 0.0) & (t < 1.0)
    tt = np.where(inside, t, 0.5)
    log_norm = math.log(alpha - 1.0) - math.log(2.0) - (alpha - 1.0) * math.log(0.25)
    with np.errstate(divide="ignore"):
        val = np.exp(log_norm + (alpha - 2.0) * np.log(tt - tt * tt)) * np.abs(1.0 - 2.0 * tt)
    return np.where(inside, val, 0.0)


def pdf(d, x):
    """Probability density of ``d`` at ``x`` (0 outside the support)."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    p = d.params
    tag = d.tag
    if tag is DistTag.Chi:
        k = p.k
        pos = x >= 0
        z = np.where(pos, x, 0.0)
        log_norm = -(k / 2.0 - 1.0) * math.log(2.0) - special.gammaln(k / 2.0)
        with np.errstate(divide="ignore"):
            val = np.exp(log_norm + (k - 1) * np.log(z) - 0.5 * z * z) if k > 1 else \
                np.exp(log_norm - 0.5 * z * z)
        out = np.where(pos, val, 0.0)
    elif tag in (DistTag.SymBeta, DistTag.BetaSlice):
        t = (x - p.mu) / p.k + 0.5
        if tag is DistTag.SymBeta:
            inside = (t > 0.0) & (t < 1.0)
            tt = np.where(inside, t, 0.5)
            val = np.exp((p.alpha - 1.0) * np.log(tt - tt * tt) - log_beta(p.alpha, p.alpha))
            out = np.where(inside, val, 0.0) / p.k
        else:
            out = _beta_slice_unit_pdf(t, p.alpha) / p.k
    else:
        s = (x - p.mu) / p.sigma
        g = np.exp(-0.5 * s * s)
        if tag is DistTag.Gaussian:
            out = g / (_SQRT_2PI * p.sigma)
        elif tag is DistTag.BDist:
            out = np.abs(s) * g / (2.0 * p.sigma)
        elif tag is DistTag.WDist:
            out = math.sqrt(math.e) / (4.0 * p.sigma) * g * np.abs(s * s - 1.0)
        elif tag is DistTag.LDist:
            out = s * s * g / (_SQRT_2PI * p.sigma)
        elif tag is DistTag.TruncRatio:
            c = p.c
            if c == 0.0:
                ratio = np.ones_like(s)
            else:
                ratio = np.abs(s) / np.sqrt(s * s + c * c)
            out = trunc_ratio_constant(c) / (2.0 * p.sigma * _SQRT_2PI) * ratio * g
        else:  # pragma: no cover
            raise ValueError(tag)
    return float(out) if scalar else out


def _check_sign(sign):
    sign = np.asarray(sign, dtype=float)
    if np.any(np.abs(sign) != 1.0):
        raise DomainError("sign bits must be +1 or -1")
    return sign


def _check_open_unit(u, name, allow_zero=False, allow_one=True):
    u = np.asarray(u, dtype=float)
    lo_ok = (u >= 0.0) if allow_zero else (u > 0.0)
    hi_ok = (u <= 1.0) if allow_one else (u < 1.0)
    if np.any(~(lo_ok & hi_ok)):
        raise DomainError(f"{name} must lie in {'[' if allow_zero else '('}0, 1{']' if allow_one else ')'}")
    return u


def sample(d, u, return_aux=False):
    """Map the input tuple ``u`` (see module docstring) to draws from ``d``.

    With ``return_aux=True`` a dict of intermediates is returned as well:
    ``eps_c`` for TruncRatio, ``radius`` (|x - mu| / sigma) for the
    Gaussian-family slice distributions, ``z`` for Chi.
    """
    p = d.params
    tag = d.tag
    aux = {}
    if tag is DistTag.Gaussian:
        (eps,) = u
        eps = np.asarray(eps, dtype=float)
        x = p.mu + p.sigma * eps
        aux["eps"] = eps
    elif tag is DistTag.SymBeta:
        (uu,) = u
        uu = _check_open_unit(uu, "uniform", allow_zero=True)
        t = special.betaincinv(p.alpha, p.alpha, uu)
        x = p.mu + p.k * (t - 0.5)
        aux["eps_beta"] = t - 0.5
    elif tag is DistTag.BDist:
        eps_h, sign = u
        eps_h = _check_open_unit(eps_h, "eps_h")
        r = np.sqrt(-2.0 * np.log(eps_h))
        x = p.mu + _check_sign(sign) * p.sigma * r
        aux["radius"] = r
    elif tag is DistTag.WDist:
        eps_h, sign, lower = u
        eps_h = np.asarray(eps_h, dtype=float)
        lower = np.asarray(lower, dtype=bool)
        eps_h, lower = np.broadcast_arrays(eps_h, lower)
        _check_open_unit(eps_h, "eps_h", allow_zero=True)
        if np.any(lower & (eps_h == 0.0)):
            raise DomainError("eps_h = 0 on the -1 branch sends the sample to infinity")
        arg = -(eps_h * eps_h) / math.e
        w = np.empty(eps_h.shape)
        if lower.any():
            w[lower] = lambert_w(Branch.NegOne, arg[lower])
        if (~lower).any():
            w[~lower] = lambert_w(Branch.Principal, arg[~lower])
        r = np.sqrt(np.maximum(-w, 0.0))
        x = p.mu + _check_sign(sign) * p.sigma * r
        aux["radius"] = r
    elif tag is DistTag.LDist:
        eps_h, eps_x, sign = u
        eps_h = _check_open_unit(eps_h, "eps_h")
        eps_x = np.asarray(eps_x, dtype=float)
        r = np.sqrt(-2.0 * np.log(eps_h) + eps_x * eps_x)
        x = p.mu + _check_sign(sign) * p.sigma * r
        aux["radius"] = r
    elif tag is DistTag.TruncRatio:
        uu, sign = u
        uu = _check_open_unit(uu, "uniform", allow_zero=True, allow_one=False)
        eps_c = sample_truncated_normal(uu, p.c, math.inf)
        r = np.sqrt(np.maximum(np.square(eps_c) - p.c * p.c, 0.0))
        x = p.mu + _check_sign(sign) * p.sigma * r
        aux["eps_c"] = np.asarray(eps_c, dtype=float)
        aux["radius"] = r
    elif tag is DistTag.BetaSlice:
        eps_h, sign = u
        eps_h = _check_open_unit(eps_h, "eps_h", allow_zero=True)
        half = 0.5 * np.sqrt(1.0 - eps_h ** (1.0 / (p.alpha - 1.0)))
        sign = _check_sign(sign)
        x = p.mu + p.k * sign * half
        aux["eps_beta"] = sign * half
    elif tag is DistTag.Chi:
        (normals,) = u
        normals = np.asarray(normals, dtype=float)
        if normals.shape[-1] != p.k:
            raise DomainError(f"Chi({p.k}) needs {p.k} normals along the last axis")
        x = np.sqrt(np.sum(normals * normals, axis=-1))
        aux["z"] = x
    else:  # pragma: no cover
        raise ValueError(tag)
    if np.ndim(x) == 0:
        x = float(x)
    return (x, aux) if return_aux else x


def draw_uniforms(d, rng, size=()):
    """Draw the input tuple :func:`sample` needs for ``d`` from ``rng``."""
    size = (int(size),) if np.ndim(size) == 0 and size != () else tuple(size)

    def sign():
        return rng.integers(0, 2, size=size) * 2.0 - 1.0

    def open_unit():
        # (0, 1]: safe under log
        return 1.0 - rng.random(size)

    tag = d.tag
    if tag is DistTag.Gaussian:
        return (rng.standard_normal(size),)
    if tag is DistTag.SymBeta:
        return (rng.random(size),)
    if tag in (DistTag.BDist, DistTag.BetaSlice):
        return (open_unit(), sign())
    if tag is DistTag.WDist:
        return (open_unit(), sign(), rng.integers(0, 2, size=size).astype(bool))
    if tag is DistTag.LDist:
        return (open_unit(), rng.standard_normal(size), sign())
    if tag is DistTag.TruncRatio:
        return (rng.random(size), sign())
    if tag is DistTag.Chi:
        return (rng.standard_normal(size + (d.params.k,)),)
    raise ValueError(tag)  # pragma: no cover


def unit_sphere_sample(dim, normals):
    """Normalize a vector of ``dim`` standard normals onto the unit sphere.

    Works row-wise on stacked inputs of shape ``(..., dim)``.
    """
    normals = np.asarray(normals, dtype=float)
    if normals.shape[-1] != dim:
        raise DomainError(f"expected {dim} normals along the last axis, got {normals.shape[-1]}")
    norm = np.sqrt(np.sum(normals * normals, axis=-1, keepdims=True))
    if np.any(norm < 1e-300):
        raise DegenerateError("cannot normalize a (near) zero vector")
    return normals / norm


def directional_sample(dim, dof_offset, sigma, u, return_aux=False):
    """Draw ``sigma * z * r_hat`` with r_hat uniform on the sphere and z ~ Chi(dim + offset).

    ``u`` holds ``dim + dof_offset`` standard normals on its last axis.  The
    first ``dim`` give the direction; the radius is the norm of all of them.
    Since a Gaussian vector's norm and direction are independent, z is
    Chi(dim + offset) distributed and independent of the direction.
    """
    if dof_offset not in (1, 2):
        raise DomainError("dof_offset must be 1 or 2")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != dim + dof_offset:
        raise DomainError(f"expected {dim + dof_offset} normals along the last axis")
    r_hat = unit_sphere_sample(dim, u[..., :dim])
    z = np.sqrt(np.sum(u * u, axis=-1, keepdims=True))
    x = sigma * z * r_hat
    if return_aux:
        return x, {"z": z[..., 0], "direction": r_hat}
    return x
