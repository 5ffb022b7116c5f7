"""Accuracy and variance of the truncated-ratio estimator as functions of c.

With sigma = 1, ``accuracy_t(c)`` is the factor by which the TRRG weight's
second moment is smaller than the plain likelihood-ratio one (t(0) = 1,
rising to pi/2), and ``variance_scale_v(c)`` is Var[x] under the
truncated-ratio distribution (v(0) = 1, rising to 2).  A larger spread of q
adds interference noise from the other D - 1 coordinates, which is what
``suggest_c`` trades against the accuracy gain.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = ["CGuidelineRow", "accuracy_t", "variance_scale_v", "suggest_c", "guideline_table",
           "TABLE_C"]

TABLE_C = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0)
_C_MAX = 10.0


def _hazard(c):
    return math.sqrt(2.0 / math.pi) / special.erfcx(c / math.sqrt(2.0))


def _check(c):
    c = np.asarray(c, dtype=float)
    if np.any(~(c >= 0)) or np.any(~np.isfinite(c)):
        raise DomainError("c must be finite and >= 0")
    return c


def accuracy_t(c):
    """t(c) = exp(-c^2) / (4 (1 - Phi(c))^2 (1 + c h(c))), h the normal hazard."""
    c = _check(c)
    e = special.erfcx(c / math.sqrt(2.0))
    # pi h^2 / 2 = 1 / erfcx^2, exact at c = 0
    t = 1.0 / (e * e * (1.0 + c * _hazard(c)))
    return float(t) if t.ndim == 0 else t


def variance_scale_v(c):
    """v(c) = 1 + c h(c) - c^2."""
    c = _check(c)
    v = 1.0 + c * _hazard(c) - c * c
    return float(v) if v.ndim == 0 else v


def _excess(c):
    return variance_scale_v(c) / accuracy_t(c) - 1.0


def suggest_c(dim, tol=1e-9):
    """Offset c solving (v(c)/t(c) - 1)(dim - 1) = 1, by bisection on [0, 10].

    The left side increases with c but saturates at (4/pi - 1)(dim - 1), so
    below dim = 5 there is no root; the interference term never dominates
    and the upper end of the bracket is returned.
    """
    if int(dim) != dim or dim < 2:
        raise DomainError("suggest_c needs an integer dim >= 2")
    target = 1.0 / (dim - 1)
    lo, hi = 0.0, _C_MAX
    if _excess(hi) < target:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _excess(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class CGuidelineRow:
    c: float
    dim_minus_one: float
    accuracy_t: float

    def __post_init__(self):
        if not self.dim_minus_one > 0:
            raise DomainError("dim_minus_one must be positive")
        if not 1.0 <= self.accuracy_t < math.pi / 2:
            raise DomainError("accuracy_t must lie in [1, pi/2)")


def guideline_table(cs=TABLE_C):
    """Rows (c, 1/(v/t - 1), t) for the standard grid of offsets."""
    return [CGuidelineRow(float(c), 1.0 / _excess(c), accuracy_t(c)) for c in cs]
