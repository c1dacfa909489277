"""Rank aggregation over attribute-induced class scores.

Every attribute row of the expanded matrix, restricted to the candidate
classes, is a score vector over those classes. Given classifier posteriors as
weights, the aggregated rank ``r`` maximizes

    J(r) = sum_m w_m * exp(-||r - r_m||^2 / sigma)

which is a weighted Gaussian kernel density over the rows, so its maximizer
is found with mean-shift fixed-point ascent from the weighted mean. The
predicted class is the argmax of ``r`` (ties to the lowest index).
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dap import posteriors
from .errors import (
    AllZeroWeights,
    DataError,
    DimensionMismatch,
    DuplicateCandidate,
    EmptyCandidates,
    NonFiniteWeight,
    NonPositiveSigma,
)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500


@dataclass(frozen=True, eq=False)
class RankProfile:
    rows: np.ndarray  # (N_a, L)
    candidate_classes: tuple
    attribute_names: tuple = ()

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "candidate_classes", tuple(self.candidate_classes))
        object.__setattr__(self, "attribute_names", tuple(self.attribute_names))
        if rows.ndim != 2 or rows.shape[0] == 0 or rows.shape[1] == 0:
            raise EmptyCandidates("rank profile needs at least one attribute and one candidate")
        if rows.shape[1] != len(self.candidate_classes):
            raise DimensionMismatch("one profile column per candidate class required")


@dataclass(frozen=True, eq=False)
class AggregationResult:
    r_star: np.ndarray
    objective: float
    iterations: int
    converged: bool
    predicted_class: str
    sigma: float
    objective_trace: np.ndarray = field(default=None, repr=False)
    iterates: np.ndarray = field(default=None, repr=False)
    best_restart: "AggregationResult" = field(default=None, repr=False)

    @property
    def predicted_index(self):
        return int(np.argmax(self.r_star))


def induce_ranks(s, candidates, attribute_names=None):
    """Restrict ``s`` to the candidate columns (and optionally to named attribute rows)."""
    candidates = tuple(candidates)
    if not candidates:
        raise EmptyCandidates("no candidate classes")
    if len(set(candidates)) != len(candidates):
        dup = next(c for c in candidates if candidates.count(c) > 1)
        raise DuplicateCandidate(f"candidate {dup!r} listed more than once")
    cols = s.columns(candidates)
    names = tuple(s.attribute_names)
    if attribute_names is not None:
        lookup = {n: i for i, n in enumerate(names)}
        try:
            idx = [lookup[n] for n in attribute_names]
        except KeyError as exc:
            raise DimensionMismatch(f"attribute {exc.args[0]!r} is not a row of the matrix") from None
        cols = cols[idx]
        names = tuple(attribute_names)
    return RankProfile(cols, candidates, names)


def kernel_similarity(r, r_m, sigma):
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    r, r_m = np.asarray(r, dtype=np.float64), np.asarray(r_m, dtype=np.float64)
    if r.shape != r_m.shape:
        raise DimensionMismatch("rank vectors differ in length")
    return float(np.exp(-np.sum((r - r_m) ** 2) / sigma))


def pairwise_sq_dists(rows):
    rows = np.asarray(rows, dtype=np.float64)
    g = rows @ rows.T
    sq = np.diag(g)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * g, 0.0)
    return d2[np.triu_indices(rows.shape[0], k=1)]


def median_sigma(rows):
    """Median squared distance between attribute rows; falls back when it is zero."""
    d2 = pairwise_sq_dists(rows)
    if d2.size == 0:
        return 1.0
    med = float(np.median(d2))
    if med > 0:
        return med
    positive = d2[d2 > 0]
    return float(positive.mean()) if positive.size else 1.0


def resolve_sigma(profile, sigma_policy="median"):
    if sigma_policy is None or sigma_policy == "median":
        return median_sigma(profile.rows)
    sigma = float(sigma_policy)
    if not sigma > 0 or not np.isfinite(sigma):
        raise NonPositiveSigma(f"sigma must be a positive finite number, got {sigma_policy!r}")
    return sigma


def _check_weights(weights, n_attributes):
    w = np.asarray(weights, dtype=np.float64)
    if w.shape[-1] != n_attributes:
        raise DimensionMismatch(f"{w.shape[-1]} weights for {n_attributes} attribute rows")
    if not np.all(np.isfinite(w)):
        raise NonFiniteWeight("weights must be finite")
    if np.any(w < 0):
        raise DataError("weights must be non-negative")
    if np.any(w.reshape(-1, n_attributes).sum(axis=1) <= 0):
        raise AllZeroWeights("at least one weight must be positive")
    return w


def objective(rows, weights, r, sigma):
    d2 = ((np.asarray(r)[None, :] - rows) ** 2).sum(axis=1)
    return float(np.sum(weights * np.exp(-d2 / sigma)))


def _ascend(rows, w, sigma, r0, tol, max_iter):
    pos = w > 0
    r = r0.copy()
    trace = [objective(rows, w, r, sigma)]
    iterates = [r.copy()]
    converged = False
    it = 0
    while it < max_iter:
        d2 = ((r[None, :] - rows) ** 2).sum(axis=1)
        logk = np.where(pos, -d2 / sigma, -np.inf)
        k = w * np.exp(logk - logk.max())
        nxt = (k / k.sum()) @ rows
        step = float(np.max(np.abs(nxt - r)))
        r = nxt
        it += 1
        trace.append(objective(rows, w, r, sigma))
        iterates.append(r.copy())
        if step < tol:
            converged = True
            break
    return r, it, converged, np.array(trace), np.array(iterates)


def aggregate(profile, weights, sigma_policy="median", tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, restarts=False):
    """Aggregate one sample's attribute ranks into the proximal rank.

    With ``restarts=True`` the ascent is also run from every attribute row and
    the best-objective mode is attached as ``best_restart``; the returned
    prediction still comes from the default weighted-mean start.
    """
    rows = profile.rows
    w = _check_weights(weights, rows.shape[0])
    sigma = resolve_sigma(profile, sigma_policy)
    r0 = (w / w.sum()) @ rows
    r, it, conv, trace, iterates = _ascend(rows, w, sigma, r0, tol, max_iter)
    result = AggregationResult(
        r, trace[-1], it, conv, profile.candidate_classes[int(np.argmax(r))], sigma, trace, iterates
    )
    if restarts:
        best = None
        for start in rows:
            rr, rit, rconv, rtrace, _ = _ascend(rows, w, sigma, start.copy(), tol, max_iter)
            if best is None or rtrace[-1] > best.objective:
                best = AggregationResult(
                    rr, rtrace[-1], rit, rconv, profile.candidate_classes[int(np.argmax(rr))], sigma
                )
        result = AggregationResult(
            r, trace[-1], it, conv, result.predicted_class, sigma, trace, iterates, best_restart=best
        )
    return result


@dataclass(frozen=True, eq=False)
class BatchAggregation:
    r_star: np.ndarray
    objective: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    sigma: float
    candidate_classes: tuple

    @property
    def predicted_index(self):
        return np.argmax(self.r_star, axis=1)

    @property
    def predicted(self):
        return [self.candidate_classes[i] for i in self.predicted_index]


def aggregate_batch(
    profile,
    weights,
    sigma_policy="median",
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
    backend=None,
    threads=1,
):
    """:func:`aggregate` for many samples sharing one profile; runs the compiled kernel."""
    w = np.atleast_2d(_check_weights(weights, profile.rows.shape[0]))
    sigma = resolve_sigma(profile, sigma_policy)
    r, obj, iters, conv = _kernels.mean_shift_batch(
        profile.rows, w, sigma, tol, max_iter, backend=backend, threads=threads
    )
    return BatchAggregation(r, obj, iters, conv, sigma, profile.candidate_classes)


def ppzsl_predict(bank, x, s, candidates, sigma_policy="median", tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Posteriors from the bank weight the attribute ranks; returns the aggregation result."""
    if not tuple(candidates):
        raise EmptyCandidates("no candidate classes")
    profile = induce_ranks(s, candidates, bank.attribute_names)
    weights = posteriors(bank, x)
    return aggregate(profile, weights, sigma_policy, tol, max_iter)


def ppzsl_predict_batch(bank, X, s, candidates, sigma_policy="median", tol=DEFAULT_TOL,
                        max_iter=DEFAULT_MAX_ITER, backend=None, threads=1):
    if not tuple(candidates):
        raise EmptyCandidates("no candidate classes")
    profile = induce_ranks(s, candidates, bank.attribute_names)
    return aggregate_batch(profile, posteriors(bank, np.atleast_2d(X)), sigma_policy, tol, max_iter,
                           backend=backend, threads=threads)

