"""PAC-style sample-complexity and recognition-probability bounds.

The label stage is a nearest-neighbour search in attribute space. With ``R``
the CDF of the distance from a mapped point to a random class point and ``n``
candidate classes, the nearest-neighbour distance has CDF
``G(z) = 1 - (1 - R(z))^n``. The largest distance ``g`` with ``G(g) <= gamma``
is the total number of attribute mistakes that can be tolerated, which fixes
the per-classifier error ``eps = g / M``, the training-set size needed for a
``(1 - delta)`` PAC guarantee on each classifier, and the probability that the
whole pipeline recognizes an unseen sample.

The complementary-attribute variants double the number of classifiers and the
tolerated distance together.
"""

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ._io import fmt, parse_float, read_rows, to_csv
from .errors import DataError, EmptyCdf, ParseError, ZeroTolerance

FLOOR_EPS = 1e-9
_EXACT_COMB_LIMIT = 5000


class ToleranceWarning(UserWarning):
    """The nearest-neighbour CDF already exceeds ``gamma`` at every grid point."""


@dataclass(frozen=True, eq=False)
class RelativeCdf:
    """Piecewise-constant CDF ``R(z)`` evaluated on a finite, sorted support grid."""

    support: np.ndarray
    cdf: np.ndarray

    def __post_init__(self):
        z = np.array(self.support, dtype=np.float64)
        c = np.array(self.cdf, dtype=np.float64)
        if z.size == 0:
            raise EmptyCdf("CDF has no support points")
        if z.shape != c.shape or z.ndim != 1:
            raise DataError("support and cdf must be 1-D and equally long")
        if np.any(np.diff(z) <= 0):
            raise DataError("support must be strictly increasing")
        if np.any(np.diff(c) < 0) or c[0] < 0 or c[-1] > 1 + 1e-12:
            raise DataError("cdf must be non-decreasing within [0, 1]")
        z.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "support", z)
        object.__setattr__(self, "cdf", np.minimum(c, 1.0))

    @classmethod
    def from_distances(cls, distances):
        """Empirical CDF of a distance sample.

        Integral samples (Hamming distances) get the full integer grid from 0
        to the maximum; otherwise the grid is 0 plus the distinct distances.
        """
        d = np.sort(np.asarray(distances, dtype=np.float64))
        if d.size == 0:
            raise EmptyCdf("no distances")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise DataError("distances must be finite and non-negative")
        if np.all(d == np.round(d)):
            grid = np.arange(0.0, d[-1] + 1.0)
        else:
            grid = np.unique(np.concatenate([[0.0], d]))
        cdf = np.searchsorted(d, grid, side="right") / d.size
        return cls(grid, cdf)

    def __call__(self, z):
        idx = np.searchsorted(self.support, z, side="right") - 1
        return np.where(idx >= 0, self.cdf[np.maximum(idx, 0)], 0.0)


def gp_from_rp(rp, n_unseen, z=None):
    """Nearest-neighbour CDF ``G(z)``.

    ``rp`` is either a :class:`RelativeCdf` (evaluated at ``z``) or the value(s)
    ``R(z)`` directly.
    """
    rp_z = rp(z) if isinstance(rp, RelativeCdf) else rp
    rp_z = np.asarray(rp_z, dtype=np.float64)
    out = 1.0 - (1.0 - rp_z) ** n_unseen
    return float(out) if out.ndim == 0 else out


def gp_inverse(rp, n_unseen, gamma):
    """Largest support point with ``G(z) <= gamma``; 0 (with a warning) when none qualifies."""
    if not 0 < gamma < 1:
        raise DataError("gamma must lie in (0, 1)")
    if rp.support.size == 0:
        raise EmptyCdf("CDF has no support points")
    g = gp_from_rp(rp.cdf, n_unseen)
    ok = np.flatnonzero(np.atleast_1d(g) <= gamma)
    if ok.size == 0:
        warnings.warn("nearest-neighbour CDF exceeds gamma everywhere; tolerance is 0", ToleranceWarning, stacklevel=2)
        return 0.0
    return float(rp.support[ok[-1]])


def _log_comb(n, j):
    if n <= _EXACT_COMB_LIMIT:
        return np.array([math.log(math.comb(n, k)) for k in j])
    return np.array([math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1) for k in j])


def _pmf_terms(j, n, p):
    j = np.asarray(j, dtype=np.int64)
    if p == 0.0:
        return (j == 0).astype(np.float64)
    if p == 1.0:
        return (j == n).astype(np.float64)
    logs = _log_comb(n, j) + j * math.log(p) + (n - j) * math.log1p(-p)
    return np.exp(logs)


def binocdf(k, n_trials, p):
    """P(X <= k) for X ~ Binomial(n_trials, p), real ``k`` floored; terms built in log space."""
    n_trials = int(n_trials)
    if n_trials < 0 or not 0.0 <= p <= 1.0:
        raise DataError("need n_trials >= 0 and p in [0, 1]")
    if k < 0:
        return 0.0
    if k >= n_trials:
        return 1.0
    top = int(math.floor(k))
    # rounded pmf terms can sum an ulp past 1; clamp so the CDF stays monotone up to k = n
    return min(1.0, float(math.fsum(_pmf_terms(np.arange(top + 1), n_trials, p))))


def binosf(k, n_trials, p):
    """P(X > k), summed over the upper tail directly."""
    n_trials = int(n_trials)
    if k < 0:
        return 1.0
    if k >= n_trials:
        return 0.0
    top = int(math.floor(k))
    return min(1.0, float(math.fsum(_pmf_terms(np.arange(top + 1, n_trials + 1), n_trials, p))))


def _floor(x):
    # M * (1 - eps) lands a few ulps below an integer for values like 10 * 0.8
    return math.floor(x + FLOOR_EPS)


@dataclass(frozen=True)
class BoundInput:
    M: int
    d: int
    n_unseen: int
    gamma: float
    delta: float
    rp: RelativeCdf = None
    g_inv: float = None

    def __post_init__(self):
        if self.M < 1 or self.d < 1 or self.n_unseen < 1:
            raise DataError("M, d and n_unseen must be positive integers")
        if not 0 < self.gamma < 1 or not 0 < self.delta < 1:
            raise DataError("gamma and delta must lie in (0, 1)")
        if (self.rp is None) == (self.g_inv is None):
            raise DataError("give exactly one of rp (a distance CDF) or g_inv")
        if self.g_inv is not None and self.g_inv < 0:
            raise DataError("g_inv must be non-negative")


@dataclass(frozen=True)
class BoundReport:
    g_inv_gamma: float
    epsilon: float
    N_delta: float
    P_att: float
    P_zsl: float
    N_delta_ca: float
    P_att_ca: float
    P_zsl_ca: float
    strict_2m: bool = False

    def as_dict(self):
        return asdict(self)


def sample_complexity(n_classifiers, tolerated, delta, d):
    """Training samples for each classifier to reach error ``tolerated / n_classifiers``."""
    ratio = n_classifiers / tolerated
    return ratio * (4.0 * math.log(2.0 / delta) + 8.0 * (d + 1) * math.log(13.0 * n_classifiers / tolerated))


def attribute_success(n_classifiers, epsilon):
    """P(more than n(1 - eps) of n classifiers are right) under Binomial(n, 1 - eps)."""
    k = _floor(n_classifiers * (1.0 - epsilon))
    return 1.0 - binocdf(k, n_classifiers, 1.0 - epsilon)


def bound_report(inp, strict_2m=False):
    """All bound quantities for the original and the complementary-expanded attribute sets.

    The expanded variant uses ``2M`` classifiers and tolerates ``2g`` mistakes.
    Its overall probability keeps the ``(1 - delta)^M`` factor unless
    ``strict_2m`` asks for ``(1 - delta)^(2M)``.
    """
    g = inp.g_inv if inp.g_inv is not None else gp_inverse(inp.rp, inp.n_unseen, inp.gamma)
    if g <= 0:
        raise ZeroTolerance("tolerated distance is 0: epsilon = 0 and the sample bound is unbounded")
    M = inp.M
    eps = min(g / M, 1.0)
    n_delta = sample_complexity(M, g, inp.delta, inp.d)
    p_att = attribute_success(M, eps)
    p_zsl = (1.0 - inp.delta) ** M * p_att * (1.0 - inp.gamma)
    n_delta_ca = sample_complexity(2 * M, 2 * g, inp.delta, inp.d)
    p_att_ca = attribute_success(2 * M, eps)
    exponent = 2 * M if strict_2m else M
    p_zsl_ca = (1.0 - inp.delta) ** exponent * p_att_ca * (1.0 - inp.gamma)
    return BoundReport(g, eps, n_delta, p_att, p_zsl, n_delta_ca, p_att_ca, p_zsl_ca, strict_2m)


def report_csv(report):
    fields = report.as_dict()
    rows = [list(fields)]
    rows.append([str(v).lower() if isinstance(v, bool) else fmt(v) for v in fields.values()])
    return to_csv(rows)


def read_rp_file(path):
    """Either a one-column distance sample or a two-column ``z,cdf`` table (header optional)."""
    rows = list(read_rows(path))
    if rows and rows[0][1][0] in ("distance", "z"):
        rows = rows[1:]
    if not rows:
        raise EmptyCdf(f"{path}: no data rows")
    width = len(rows[0][1])
    if width not in (1, 2):
        raise ParseError(path, rows[0][0], "expected 'distance' or 'z,cdf' rows")
    values = []
    for lineno, fields in rows:
        if len(fields) != width:
            raise ParseError(path, lineno, f"expected {width} fields, got {len(fields)}")
        values.append([parse_float(path, lineno, col, f) for col, f in enumerate(fields, start=1)])
    arr = np.array(values)
    if width == 1:
        return RelativeCdf.from_distances(arr[:, 0])
    return RelativeCdf(arr[:, 0], arr[:, 1])
