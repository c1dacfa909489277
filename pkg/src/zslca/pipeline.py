"""Train-and-predict composition for the six method variants."""

from dataclasses import asdict, dataclass, field

import numpy as np

from . import dap, lezsl, rankagg
from ._io import fmt, to_csv
from .attrspace import expand, guard_not_expanded, normalize_columns
from .errors import DataError, DimensionMismatch

METHODS = ("dap", "dap-ca", "dap-ra", "dap-ca-ra", "le", "le-ca")
MODES = ("zsl", "gzsl")


@dataclass(frozen=True)
class PipelineHyper:
    dap_lr: float = 0.1
    dap_epochs: int = 500
    dap_l2: float = 1e-4
    le_lr: float = 0.005
    le_epochs: int = 30
    le_l2: float = 1e-4
    weight_mode: str = "uniform"
    sigma: object = "median"
    max_iter: int = rankagg.DEFAULT_MAX_ITER
    tol: float = rankagg.DEFAULT_TOL
    seed: int = 0

    def dap_hyper(self):
        return dap.DapHyper(self.dap_lr, self.dap_epochs, self.dap_l2)

    def le_hyper(self):
        return lezsl.TrainHyper(self.le_lr, self.le_epochs, self.weight_mode, self.seed, self.le_l2)

    def as_dict(self):
        return asdict(self)


def uses_ca(method):
    return "-ca" in method


def family(method):
    return "le" if method.startswith("le") else "dap"


def validate(method, mode):
    if method not in METHODS:
        raise DataError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if mode not in MODES:
        raise DataError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")


def embeddings(raw):
    """Normalized original matrix and its expansion."""
    guard_not_expanded(raw)
    a = normalize_columns(raw)
    return a, expand(a)


def embedding_for(method, raw):
    a, s = embeddings(raw)
    return s if uses_ca(method) else a


def test_pool(split, mode):
    if mode == "zsl":
        return split.test_unseen_samples, split.unseen_classes
    return split.test_seen_samples + split.test_unseen_samples, split.all_classes


@dataclass(frozen=True, eq=False)
class PipelineResult:
    method: str
    mode: str
    sample_ids: tuple
    predicted: tuple
    diagnostics_header: tuple
    diagnostics: list
    model: object
    notes: dict = field(default_factory=dict)

    @property
    def predictions(self):
        return dict(zip(self.sample_ids, self.predicted))

    def predictions_csv(self):
        return to_csv([("sample_id", "predicted")] + list(zip(self.sample_ids, self.predicted)))

    def diagnostics_csv(self):
        return to_csv([self.diagnostics_header] + self.diagnostics)


def train_model(bundle, method, hyper=None, backend=None):
    hyper = hyper or PipelineHyper()
    data, split, raw = bundle
    emb = embedding_for(method, raw)
    if family(method) == "le":
        return lezsl.train(data, split, emb, hyper.le_hyper(), backend=backend)
    return dap.train_bank(data, split, emb, hyper.dap_hyper())


def candidate_signatures(bank, emb, seen_classes, candidates):
    """Binary signatures of ``candidates`` aligned with the bank's attribute rows."""
    sig = dap.binarize_signatures(emb, seen_classes)
    lookup = {n: i for i, n in enumerate(sig.attribute_names)}
    try:
        idx = [lookup[n] for n in bank.attribute_names]
    except KeyError as exc:
        raise DimensionMismatch(f"bank attribute {exc.args[0]!r} has no binarized signature") from None
    if not np.allclose(sig.thresholds[idx], bank.binarization_thresholds, rtol=0, atol=1e-9):
        raise DimensionMismatch("bank thresholds do not match this split's attribute matrix")
    return sig.columns(candidates)[idx]


def _ca_divergence(bank, probs, B):
    """How far a complementary bank departs from being the mirror of its original half."""
    names = bank.attribute_names
    orig = [i for i, n in enumerate(names) if not n.startswith("not_")]
    pos = {n: i for i, n in enumerate(names)}
    pairs = [(i, pos["not_" + names[i]]) for i in orig if "not_" + names[i] in pos]
    notes = {}
    if pairs:
        a, b = np.array(pairs).T
        notes["ca_posterior_asymmetry"] = float(np.mean(np.abs(probs[:, b] - (1.0 - probs[:, a]))))
    full = np.argmax(dap.dap_scores(probs, bank.priors, B), axis=1)
    half = np.argmax(dap.dap_scores(probs[:, orig], bank.priors[orig], B[orig]), axis=1)
    notes["ca_prediction_divergence"] = float(np.mean(full != half))
    return notes


def run_method(bundle, method, mode="zsl", hyper=None, model=None, backend=None, threads=1):
    """Train (unless ``model`` is given) and predict over the mode's test pool."""
    validate(method, mode)
    hyper = hyper or PipelineHyper()
    data, split, raw = bundle
    emb = embedding_for(method, raw)
    ids, candidates = test_pool(split, mode)
    if not ids:
        raise DataError(f"the {mode} test pool is empty")
    X, _ = data.subset(ids)
    if model is None:
        model = train_model(bundle, method, hyper, backend=backend)
    notes = {}

    if family(method) == "le":
        if not isinstance(model, lezsl.BilinearModel):
            raise DataError(f"method {method} needs a bilinear model")
        model = model.with_embedding(emb)
        scores = lezsl.le_scores(model, X, candidates)
        best = np.argmax(scores, axis=1)
        top = scores[np.arange(len(ids)), best]
        tied = (scores == top[:, None]).sum(axis=1) > 1
        predicted = tuple(candidates[i] for i in best)
        header = ("sample_id", "predicted", "score", "degenerate_tie")
        diag = [(sid, p, fmt(s), str(bool(t)).lower()) for sid, p, s, t in zip(ids, predicted, top, tied)]
        return PipelineResult(method, mode, ids, predicted, header, diag, model, notes)

    if not isinstance(model, dap.AttributeClassifierBank):
        raise DataError(f"method {method} needs an attribute classifier bank")
    if method.endswith("-ra"):
        agg = rankagg.ppzsl_predict_batch(
            model, X, emb, candidates, hyper.sigma, hyper.tol, hyper.max_iter, backend=backend, threads=threads
        )
        predicted = tuple(agg.predicted)
        header = ("sample_id", "predicted", "objective", "iterations", "converged")
        diag = [
            (sid, p, fmt(o), str(int(it)), str(bool(c)).lower())
            for sid, p, o, it, c in zip(ids, predicted, agg.objective, agg.iterations, agg.converged)
        ]
        notes["sigma"] = agg.sigma
        notes["not_converged"] = int(np.sum(~agg.converged))
        return PipelineResult(method, mode, ids, predicted, header, diag, model, notes)

    B = candidate_signatures(model, emb, split.seen_classes, candidates)
    probs = dap.posteriors(model, X)
    scores = dap.dap_scores(probs, model.priors, B)
    best = np.argmax(scores, axis=1)
    predicted = tuple(candidates[i] for i in best)
    top = scores[np.arange(len(ids)), best]
    header = ("sample_id", "predicted", "score")
    diag = [(sid, p, fmt(s)) for sid, p, s in zip(ids, predicted, top)]
    if uses_ca(method):
        notes.update(_ca_divergence(model, probs, B))
    return PipelineResult(method, mode, ids, predicted, header, diag, model, notes)
