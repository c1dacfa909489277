"""Bilinear label-embedding ZSL trained with a weighted structured hinge loss.

The compatibility of a sample with a class is ``F(x, y) = x^T W phi(y)`` where
``phi(y)`` is the class column of the embedding matrix (the normalized
attribute matrix, or its ``[A; 1 - A]`` expansion). Training minimizes, per
sample,

    l = sum_{y in seen} r_ny * [delta(y_n, y) + F(x_n, y) - F(x_n, y_n)]_+

plus an L2 penalty, with ``delta`` equal to 0 for the true class and 1
otherwise.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._io import fmt, parse_float, read_rows, to_csv
from .dap import Ranking
from .errors import (
    DataError,
    DimensionMismatch,
    EmptyCandidates,
    NoTrainingData,
    NumericalError,
    ParseError,
    UnknownClass,
)

WEIGHT_MODES = ("uniform", "rank_based")


@dataclass(frozen=True)
class TrainHyper:
    learning_rate: float = 0.005
    epochs: int = 30
    weight_mode: str = "uniform"
    seed: int = 0
    l2: float = 1e-4

    def __post_init__(self):
        if not 0 <= self.learning_rate <= 10:
            raise DataError("learning_rate must lie in [0, 10]")
        if not 0 <= self.epochs <= 10**6:
            raise DataError("epochs must lie in [0, 1e6]")
        if self.weight_mode not in WEIGHT_MODES:
            raise DataError(f"weight_mode must be one of {WEIGHT_MODES}")
        if self.l2 < 0:
            raise DataError("l2 must be non-negative")


@dataclass(frozen=True, eq=False)
class BilinearModel:
    W: np.ndarray  # (d, N_a)
    embedding: np.ndarray  # (N_a, C), phi(y) as columns
    class_names: tuple
    embedding_id: str = "A"
    loss_trace: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        emb = np.array(self.embedding, dtype=np.float64)
        W.setflags(write=False)
        emb.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "embedding", emb)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if W.ndim != 2 or not np.all(np.isfinite(W)):
            raise DataError("W must be a finite 2-D matrix")
        if emb.shape != (W.shape[1], len(self.class_names)):
            raise DimensionMismatch(
                f"embedding shape {emb.shape} does not match W columns {W.shape[1]} "
                f"and {len(self.class_names)} classes"
            )

    @property
    def dim(self):
        return self.W.shape[0]

    def phi(self, names):
        lookup = {c: j for j, c in enumerate(self.class_names)}
        try:
            return self.embedding[:, [lookup[n] for n in names]]
        except KeyError as exc:
            raise UnknownClass(f"class {exc.args[0]!r} has no embedding column") from None

    def with_embedding(self, matrix, embedding_id=None):
        """Reuse ``W`` with another embedding of the same width; never silently."""
        values = np.asarray(matrix.values)
        if values.shape[0] != self.W.shape[1]:
            raise DimensionMismatch(
                f"model was trained on {self.W.shape[1]}-dimensional embeddings, "
                f"got {values.shape[0]} rows; retrain instead of swapping"
            )
        return BilinearModel(self.W, values, matrix.class_names, embedding_id or self.embedding_id)


def _check_x(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise DimensionMismatch(f"feature dimension {x.shape[-1]} != model dimension {model.dim}")
    return x


def compatibility(model, x, y):
    x = _check_x(model, x)
    return float(x @ model.W @ model.phi([y])[:, 0])


def _hinge(scores, yn, weight_mode):
    """Active classes and their weights for one score vector."""
    margins = 1.0 + scores - scores[yn]
    margins[yn] = 0.0
    active = np.flatnonzero(margins > 0)
    if weight_mode == "rank_based":
        active = active[np.argsort(-margins[active], kind="stable")]
        coef = 1.0 / np.arange(1, active.size + 1)
    else:
        coef = np.ones(active.size)
    return margins, active, coef


def sample_loss(model, x_n, y_n, seen_classes, weight_mode="uniform", l2=0.0):
    """Loss and gradient w.r.t. ``W`` for one training sample.

    The rank-based weight of a violating class is ``1/k`` where ``k`` is its
    position when violators are sorted by decreasing margin. Margins of
    exactly zero count as satisfied.
    """
    seen_classes = tuple(seen_classes)
    if y_n not in seen_classes:
        raise UnknownClass(f"label {y_n!r} is not a seen class")
    if weight_mode not in WEIGHT_MODES:
        raise DataError(f"weight_mode must be one of {WEIGHT_MODES}")
    x = _check_x(model, x_n)
    phi = model.phi(seen_classes)
    yn = seen_classes.index(y_n)
    scores = (x @ model.W) @ phi
    margins, active, coef = _hinge(scores, yn, weight_mode)
    W = model.W
    loss = float(coef @ margins[active]) + l2 * float(np.sum(W * W))
    v = phi[:, active] @ coef - coef.sum() * phi[:, yn]
    grad = np.outer(x, v) + 2.0 * l2 * W
    return loss, grad


def empirical_risk(W, X, y, phi, weight_mode, l2):
    """Mean sample loss over ``X`` plus ``l2 * ||W||^2``."""
    scores = X @ W @ phi
    n = X.shape[0]
    margins = 1.0 + scores - scores[np.arange(n), y][:, None]
    margins[np.arange(n), y] = 0.0
    hinge = np.maximum(margins, 0.0)
    if weight_mode == "rank_based":
        hinge = -np.sort(-hinge, axis=1, kind="stable")
        hinge = hinge / np.arange(1, hinge.shape[1] + 1)
    return float(hinge.sum(axis=1).mean()) + l2 * float(np.sum(W * W))


def train(train_data, split, embedding, hyper=None, embedding_id=None, backend=None):
    """Per-sample SGD over seeded shuffles; returns the model with its loss trace.

    ``loss_trace[0]`` is the risk at initialization and ``loss_trace[e]`` the
    risk after epoch ``e``.
    """
    hyper = hyper or TrainHyper()
    if not split.train_samples:
        raise NoTrainingData("split has no training samples")
    X, labels = train_data.subset(split.train_samples)
    seen = tuple(split.seen_classes)
    phi_seen = embedding.columns(seen)
    index = {c: k for k, c in enumerate(seen)}
    y = np.array([index[lab] for lab in labels], dtype=np.int64)
    d, na = X.shape[1], phi_seen.shape[0]

    rng = np.random.default_rng(hyper.seed)
    bound = 1.0 / np.sqrt(d)
    W = rng.uniform(-bound, bound, size=(d, na))
    trace = [empirical_risk(W, X, y, phi_seen, hyper.weight_mode, hyper.l2)]
    rank_based = hyper.weight_mode == "rank_based"
    for _ in range(int(hyper.epochs)):
        order = rng.permutation(X.shape[0])
        _kernels.sgd_epoch(W, X, y, phi_seen, order, hyper.learning_rate, hyper.l2, rank_based, backend=backend)
        if not np.all(np.isfinite(W)):
            raise NumericalError("SGD diverged; lower the learning rate")
        trace.append(empirical_risk(W, X, y, phi_seen, hyper.weight_mode, hyper.l2))
    if embedding_id is None:
        embedding_id = "S" if na == 2 * getattr(embedding, "n_original", -1) else "A"
    return BilinearModel(W, embedding.values, embedding.class_names, embedding_id, np.array(trace))


def le_scores(model, X, candidate_classes):
    X = _check_x(model, np.atleast_2d(X))
    return X @ model.W @ model.phi(candidate_classes)


def le_predict(model, x, candidate_classes):
    """Rank candidates by compatibility; ``.tied`` flags a degenerate top score."""
    candidates = tuple(candidate_classes)
    if not candidates:
        raise EmptyCandidates("no candidate classes")
    return Ranking(candidates, le_scores(model, x, candidates)[0])


# -- serialization -------------------------------------------------------------


def model_csv(model):
    d, na = model.W.shape
    rows = [[str(d), str(na), model.embedding_id]]
    rows += [[fmt(v) for v in row] for row in model.W]
    return to_csv(rows)


def loss_trace_csv(trace):
    rows = [["epoch", "loss"]] + [[str(e), fmt(v)] for e, v in enumerate(trace)]
    return to_csv(rows)


def read_model(path, embedding):
    """Load ``W`` and bind it to ``embedding``; widths must agree."""
    rows = list(read_rows(path))
    if not rows or len(rows[0][1]) != 3:
        raise ParseError(path, 1, "header must be 'd,N_a,embedding_id'")
    lineno, (d, na, emb_id) = rows[0]
    try:
        d, na = int(d), int(na)
    except ValueError:
        raise ParseError(path, lineno, "d and N_a must be integers") from None
    W = []
    for lineno, fields in rows[1:]:
        if len(fields) != na:
            raise ParseError(path, lineno, f"expected {na} weights, got {len(fields)}")
        W.append([parse_float(path, lineno, col, f) for col, f in enumerate(fields, start=1)])
    if len(W) != d:
        raise ParseError(path, lineno, f"expected {d} weight rows, got {len(W)}")
    values = np.asarray(embedding.values)
    if values.shape[0] != na:
        raise DimensionMismatch(f"model has N_a={na} but the embedding has {values.shape[0]} rows")
    return BilinearModel(np.array(W), values, embedding.class_names, emb_id)
