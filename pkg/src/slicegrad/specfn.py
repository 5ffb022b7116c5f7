"""Special functions and the low-level samplers built on them.

All functions accept scalars or array-likes and broadcast in the numpy way.
Scalar inputs give Python floats back.
"""

import enum
import math

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError

__all__ = [
    "Branch",
    "std_normal_pdf",
    "std_normal_cdf",
    "std_normal_sf",
    "std_normal_inv_cdf",
    "normal_hazard",
    "log_gamma",
    "log_beta",
    "lambert_w",
    "sample_truncated_normal",
]

# 1/e split into a double and its rounding residual, so x + 1/e can be
# formed accurately near the branch point of W.
_INV_E_HI = 0.36787944117144233
_INV_E_LO = -1.2428753672788363e-17
_EPS = np.finfo(float).eps

# Puiseux coefficients of W around -1/e in p = +-sqrt(2(e x + 1)).
_BRANCH_SERIES = (-1.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0,
                  769.0 / 17280.0, -221.0 / 8505.0)


class Branch(enum.Enum):
    """Real branches of the Lambert W function."""

    Principal = 0
    NegOne = -1


def _out(arr, scalar):
    return float(arr) if scalar else arr


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return _out(np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi), x.ndim == 0)


def std_normal_cdf(x):
    """Unit normal cdf; saturates to exactly 0 or 1 far in the tails."""
    x = np.asarray(x, dtype=float)
    return _out(special.ndtr(x), x.ndim == 0)


def std_normal_sf(x):
    """``1 - std_normal_cdf(x)`` without cancellation for large x."""
    x = np.asarray(x, dtype=float)
    return _out(special.ndtr(-x), x.ndim == 0)


def std_normal_inv_cdf(p):
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise DomainError("std_normal_inv_cdf requires 0 < p < 1")
    return _out(special.ndtri(p), p.ndim == 0)


def normal_hazard(c):
    """Inverse Mills ratio N(c) / (1 - Phi(c)), stable for large c."""
    c = np.asarray(c, dtype=float)
    return _out(math.sqrt(2.0 / math.pi) / special.erfcx(c / math.sqrt(2.0)), c.ndim == 0)


def log_gamma(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0.0)):
        raise DomainError("log_gamma requires x > 0")
    return _out(special.gammaln(x), x.ndim == 0)


def log_beta(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0.0)) or np.any(~(b > 0.0)):
        raise DomainError("log_beta requires a > 0 and b > 0")
    return _out(special.betaln(a, b), a.ndim == 0 and b.ndim == 0)


def _branch_point_series(p):
    w = np.zeros_like(p)
    for coef in reversed(_BRANCH_SERIES):
        w = w * p + coef
    return w


def lambert_w(branch, x, *, max_iter=50, tol=1e-14):
    """Real Lambert W on the given branch, by Halley iteration.

    Parameters
    ----------
    branch : Branch
        ``Branch.Principal`` (W >= -1, defined for x >= -1/e) or
        ``Branch.NegOne`` (W <= -1, defined for -1/e <= x < 0).
    x : float or array_like

    Returns
    -------
    float or ndarray
        w with ``w * exp(w) == x``.

    Raises
    ------
    DomainError
        If any x lies outside the branch domain.
    NumericalError
        If the iteration does not settle within ``max_iter`` steps.
    """
    branch = Branch(branch)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(np.isnan(x)):
        raise DomainError("lambert_w: NaN input")
    # distance to the branch point -1/e, carried in extra precision
    dist = (x + _INV_E_HI) + _INV_E_LO
    if np.any(dist < -4 * _EPS * _INV_E_HI):
        raise DomainError("lambert_w: x < -1/e")
    if branch is Branch.NegOne and np.any(x >= 0.0):
        raise DomainError("lambert_w: the -1 branch needs -1/e <= x < 0")
    dist = np.maximum(dist, 0.0)
    at_branch_point = dist <= 4 * _EPS * _INV_E_HI

    p = np.sqrt(2.0 * math.e * dist)
    w = np.empty_like(x)
    if branch is Branch.Principal:
        near = x < -0.25
        w[near] = _branch_point_series(p[near])
        big = x > math.e
        L1 = np.log(x[big])
        L2 = np.log(L1)
        w[big] = L1 - L2 + L2 / L1
        mid = ~near & ~big
        w[mid] = np.log1p(x[mid])
    else:
        near = x < -0.25
        w[near] = _branch_point_series(-p[near])
        far = ~near
        L1 = np.log(-x[far])
        L2 = np.log(-L1)
        w[far] = L1 - L2 + L2 / L1
    w[at_branch_point] = -1.0

    active = ~at_branch_point & (x != 0.0)
    w[x == 0.0] = 0.0
    for _ in range(max_iter):
        if not active.any():
            break
        wa = w[active]
        xa = x[active]
        ew = np.exp(wa)
        f = wa * ew - xa
        wp1 = wa + 1.0
        denom = ew * wp1 - (wa + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w_new = wa - step
        settled = (np.abs(step) <= tol * np.abs(w_new)) | (
            np.abs(f) <= 4 * _EPS * np.maximum(np.abs(xa), np.abs(wa * ew)))
        w[active] = w_new
        idx = np.flatnonzero(active)
        active[idx[settled]] = False
    else:
        if active.any():
            raise NumericalError("lambert_w did not converge")
    if branch is Branch.Principal:
        w = np.maximum(w, -1.0)
    else:
        w = np.minimum(w, -1.0)
    return float(w[0]) if scalar else w


def sample_truncated_normal(u, a, b=math.inf):
    """Map uniforms u to the unit normal truncated to [a, b] by inverse cdf.

    Upper-tail intervals are handled through the survival function, so
    truncation points several standard deviations out keep full precision.
    """
    u = np.asarray(u, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a < b)):
        raise DomainError("sample_truncated_normal requires a < b")
    scalar = u.ndim == 0 and a.ndim == 0 and b.ndim == 0
    u, a, b = np.broadcast_arrays(u, a, b)
    upper = a >= 0.0
    sa = special.ndtr(-a)
    sb = special.ndtr(-b)
    ca = special.ndtr(a)
    cb = special.ndtr(b)
    mass = np.where(upper, sa - sb, cb - ca)
    if np.any(mass < 1e-300):
        raise NumericalError("truncated normal interval carries less than 1e-300 mass")
    with np.errstate(divide="ignore"):
        x = np.where(upper, -special.ndtri(sa - u * mass), special.ndtri(ca + u * mass))
    x = np.clip(x, a, b)
    return float(x) if scalar else x
