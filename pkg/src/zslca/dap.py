"""Direct attribute prediction: per-attribute logistic classifiers and posterior-ratio scoring."""

import logging
from dataclasses import dataclass, field

import numpy as np

from ._io import fmt, parse_float, read_rows, to_csv
from .attrspace import ExpandedAttributeMatrix
from .errors import DataError, DimensionMismatch, EmptyCandidates, NoTrainingData, ParseError

log = logging.getLogger(__name__)

PRIOR_FLOOR = 1e-3
PROB_CLAMP = 1e-6


@dataclass(frozen=True)
class Binarized:
    """Binary class signatures for the attributes that survived binarization.

    ``binary`` is (n_kept, C); ``kept`` indexes rows of the source matrix.
    """

    binary: np.ndarray
    thresholds: np.ndarray
    attribute_names: tuple
    class_names: tuple
    kept: np.ndarray
    dropped: tuple

    def columns(self, names):
        lookup = {c: j for j, c in enumerate(self.class_names)}
        try:
            return self.binary[:, [lookup[n] for n in names]]
        except KeyError as exc:
            raise DataError(f"class {exc.args[0]!r} has no signature column") from None


@dataclass(frozen=True)
class DapHyper:
    lr: float = 0.1
    epochs: int = 500
    l2: float = 1e-4


@dataclass(frozen=True, eq=False)
class AttributeClassifierBank:
    weights: np.ndarray  # (N_a, d + 1); last column is the bias
    priors: np.ndarray
    binarization_thresholds: np.ndarray
    attribute_names: tuple
    dropped: tuple = field(default=())

    def __post_init__(self):
        for name in ("weights", "priors", "binarization_thresholds"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "attribute_names", tuple(self.attribute_names))
        object.__setattr__(self, "dropped", tuple(self.dropped))
        na = len(self.attribute_names)
        if self.weights.ndim != 2 or self.weights.shape[0] != na:
            raise DimensionMismatch("one weight row per attribute required")
        if self.priors.shape != (na,) or self.binarization_thresholds.shape != (na,):
            raise DimensionMismatch("priors and thresholds must have one entry per attribute")

    @property
    def dim(self):
        return self.weights.shape[1] - 1

    @property
    def n_attributes(self):
        return self.weights.shape[0]


def _signature_values(s):
    if isinstance(s, ExpandedAttributeMatrix):
        return s.values, s.n_original
    if not s.normalized:
        raise DataError("binarize_signatures expects a normalized matrix")
    return s.values, None


def binarize_signatures(s, seen_classes):
    """Threshold every attribute row at its mean over the seen classes.

    Rows whose seen-class targets come out constant are dropped. For an
    expanded matrix the complementary block is the bitwise NOT of the
    original block, with threshold ``1 - t``, so the symmetry is exact.
    """
    values, n_orig = _signature_values(s)
    seen_idx = s.class_index(seen_classes)
    if seen_idx.size == 0:
        raise NoTrainingData("no seen classes to binarize against")
    top = values if n_orig is None else values[:n_orig]
    thresholds = top[:, seen_idx].mean(axis=1)
    binary = (top > thresholds[:, None]).astype(np.float64)
    if n_orig is not None:
        binary = np.vstack([binary, 1.0 - binary])
        thresholds = np.concatenate([thresholds, 1.0 - thresholds])
    seen_bits = binary[:, seen_idx]
    constant = seen_bits.min(axis=1) == seen_bits.max(axis=1)
    names = s.attribute_names
    dropped = tuple(names[i] for i in np.flatnonzero(constant))
    for name in dropped:
        log.info("attribute %s is constant over seen classes; dropped", name)
    kept = np.flatnonzero(~constant)
    return Binarized(
        binary[kept],
        thresholds[kept],
        tuple(names[i] for i in kept),
        tuple(s.class_names),
        kept,
        dropped,
    )


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_logistic(X, T, lr, epochs, l2, standardize=True):
    """Full-batch gradient descent on mean cross-entropy, one column of ``T`` per attribute.

    Returns weights shaped (n_attributes, d + 1), starting from zeros. The
    bias is not penalized. With ``standardize`` the descent runs on centred,
    unit-variance features (constant features are only centred) and the
    result is mapped back, so the weights always apply to raw features.
    """
    n, d = X.shape
    if standardize:
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
    else:
        mu, sd = np.zeros(d), np.ones(d)
    Xb = np.hstack([(X - mu) / sd, np.ones((n, 1))])
    Wt = np.zeros((d + 1, T.shape[1]))
    for _ in range(int(epochs)):
        P = _sigmoid(Xb @ Wt)
        grad = Xb.T @ (P - T) / n
        grad[:d] += 2.0 * l2 * Wt[:d]
        Wt -= lr * grad
    w = Wt[:d] / sd[:, None]
    b = Wt[d] - mu @ w
    return np.vstack([w, b[None, :]]).T.copy()


def train_bank(train, split, s, hyper=None):
    """Train one logistic classifier per kept attribute on the ``train`` pool."""
    hyper = hyper or DapHyper()
    if not split.train_samples:
        raise NoTrainingData("split has no training samples")
    X, labels = train.subset(split.train_samples)
    sig = binarize_signatures(s, split.seen_classes)
    if not sig.attribute_names:
        raise NoTrainingData("every attribute was constant over the seen classes")
    T = sig.columns(labels).T
    weights = fit_logistic(X, T, hyper.lr, hyper.epochs, hyper.l2)
    priors = np.clip(sig.columns(split.seen_classes).mean(axis=1), PRIOR_FLOOR, 1 - PRIOR_FLOOR)
    return AttributeClassifierBank(weights, priors, sig.thresholds, sig.attribute_names, sig.dropped)


def posteriors(bank, x):
    """``p(a_m | x)`` for one sample (1-D input) or a batch (2-D input)."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != bank.dim:
        raise DimensionMismatch(f"feature dimension {X.shape[1]} != bank dimension {bank.dim}")
    with np.errstate(over="ignore", invalid="ignore"):
        z = X @ bank.weights[:, :-1].T + bank.weights[:, -1]
    z = np.nan_to_num(z, nan=0.0, posinf=np.inf, neginf=-np.inf)
    p = np.clip(_sigmoid(z), PROB_CLAMP, 1 - PROB_CLAMP)
    return p[0] if single else p


@dataclass(frozen=True)
class Ranking:
    """Candidates with their scores, in candidate order.

    ``order`` sorts by descending score; ties keep the lower candidate index.
    """

    candidates: tuple
    scores: np.ndarray

    @property
    def order(self):
        return np.argsort(-np.asarray(self.scores), kind="stable")

    @property
    def predicted(self):
        return self.candidates[int(self.order[0])]

    @property
    def ranked(self):
        return [(self.candidates[i], float(self.scores[i])) for i in self.order]

    @property
    def tied(self):
        o = self.order
        return len(o) > 1 and self.scores[o[0]] == self.scores[o[1]]


def dap_scores(probs, priors, binary):
    """Log-space DAP scores.

    ``probs`` is (n, N_a) posteriors, ``binary`` the (N_a, L) candidate
    signatures. Returns (n, L) with ``sum_m log p~(a_m^y|x) - log p~(a_m^y)``.
    """
    probs = np.atleast_2d(probs)
    pos = np.log(probs) - np.log(priors)
    neg = np.log1p(-probs) - np.log1p(-priors)
    return pos @ binary + neg @ (1.0 - binary)


def dap_predict(bank, x, candidate_classes, binary_signatures):
    """Rank candidate classes for one sample.

    ``binary_signatures`` is (N_a, L), one column per candidate, aligned with
    the bank's attributes.
    """
    candidates = tuple(candidate_classes)
    if not candidates:
        raise EmptyCandidates("no candidate classes")
    B = np.asarray(binary_signatures, dtype=np.float64)
    if B.shape != (bank.n_attributes, len(candidates)):
        raise DimensionMismatch(f"signatures shape {B.shape} != ({bank.n_attributes}, {len(candidates)})")
    scores = dap_scores(posteriors(bank, x)[None, :], bank.priors, B)[0]
    return Ranking(candidates, scores)


# -- serialization -------------------------------------------------------------


def bank_csv(bank):
    d = bank.dim
    rows = [["attribute", "prior", "threshold", "bias"] + [f"w{k + 1}" for k in range(d)]]
    for name, prior, t, w in zip(bank.attribute_names, bank.priors, bank.binarization_thresholds, bank.weights):
        rows.append([name, fmt(prior), fmt(t), fmt(w[-1])] + [fmt(v) for v in w[:-1]])
    return to_csv(rows)


def dropped_report(bank):
    lines = ["attribute,reason"]
    lines += [f"{name},constant_over_seen_classes" for name in bank.dropped]
    return "\n".join(lines) + "\n"


def read_bank(path, dropped=()):
    rows = list(read_rows(path))
    if not rows or rows[0][1][:4] != ["attribute", "prior", "threshold", "bias"]:
        raise ParseError(path, 1, "header must be 'attribute,prior,threshold,bias,w1,...,wd'")
    width = len(rows[0][1])
    names, priors, thresholds, weights = [], [], [], []
    for lineno, fields in rows[1:]:
        if len(fields) != width:
            raise ParseError(path, lineno, f"expected {width} fields, got {len(fields)}")
        nums = [parse_float(path, lineno, col, f) for col, f in enumerate(fields[1:], start=2)]
        names.append(fields[0])
        priors.append(nums[0])
        thresholds.append(nums[1])
        weights.append(nums[3:] + [nums[2]])
    return AttributeClassifierBank(np.array(weights), priors, thresholds, names, dropped)
