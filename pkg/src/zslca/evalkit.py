"""Per-class accuracy, harmonic mean, confusion matrices and attribute-space distances."""

from dataclasses import dataclass, field

import numpy as np

from ._io import fmt, to_csv
from .errors import CoverageMismatch, DataError, EmptyPool, MissingPrediction, TooFewCandidates


def harmonic_mean(acc_ts, acc_tr):
    if acc_ts + acc_tr == 0:
        return 0.0
    return 2.0 * acc_ts * acc_tr / (acc_ts + acc_tr)


@dataclass(frozen=True, eq=False)
class EvalReport:
    per_class_acc: dict
    mean_class_acc: float
    confusion: np.ndarray
    classes: tuple
    mode: str = "zsl"
    acc_ts: float = None
    acc_tr: float = None
    harmonic_H: float = None
    counts: dict = field(default_factory=dict)

    def summary_rows(self):
        rows = [("mode", self.mode), ("mean_class_acc", fmt(self.mean_class_acc))]
        if self.mode == "gzsl":
            rows += [("acc_ts", fmt(self.acc_ts)), ("acc_tr", fmt(self.acc_tr)), ("H", fmt(self.harmonic_H))]
        rows += [(f"acc[{c}]", fmt(a)) for c, a in self.per_class_acc.items()]
        return rows

    def to_csv(self):
        return to_csv([("metric", "value")] + self.summary_rows())

    def confusion_csv(self):
        rows = [("true\\pred",) + self.classes]
        rows += [(c,) + tuple(str(int(v)) for v in row) for c, row in zip(self.classes, self.confusion)]
        return to_csv(rows)

    def text(self):
        lines = [f"mode: {self.mode}", f"mean class accuracy: {100 * self.mean_class_acc:.2f}%"]
        if self.mode == "gzsl":
            lines.append(
                f"acc(ts) {100 * self.acc_ts:.2f}%  acc(tr) {100 * self.acc_tr:.2f}%  H {100 * self.harmonic_H:.2f}%"
            )
        width = max(len(c) for c in self.classes)
        for c, a in self.per_class_acc.items():
            lines.append(f"  {c:<{width}}  {100 * a:6.2f}%  (n={self.counts.get(c, 0)})")
        return "\n".join(lines) + "\n"


def _per_class(truth, predicted, classes):
    """Confusion counts plus per-class accuracy over classes that have samples."""
    index = {c: i for i, c in enumerate(classes)}
    conf = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        if p not in index:
            raise CoverageMismatch(f"prediction {p!r} is outside the candidate classes")
        conf[index[t], index[p]] += 1
    totals = conf.sum(axis=1)
    per_class = {c: conf[i, i] / totals[i] for i, c in enumerate(classes) if totals[i] > 0}
    counts = {c: int(totals[i]) for i, c in enumerate(classes)}
    return conf, per_class, counts


def _mean(values):
    values = list(values)
    return float(np.mean(values)) if values else 0.0


def _gather(predictions, data, ids):
    missing = [sid for sid in ids if sid not in predictions]
    if missing:
        raise MissingPrediction(f"no prediction for sample {missing[0]!r}")
    _, labels = data.subset(ids)
    return labels, [predictions[sid] for sid in ids]


def evaluate_zsl(predictions, data, split):
    """Conventional ZSL: mean of per-class accuracies over the unseen test pool."""
    ids = split.test_unseen_samples
    if not ids:
        raise EmptyPool("test_unseen pool is empty")
    extra = set(predictions) - set(ids)
    if extra:
        raise CoverageMismatch(f"predictions for samples outside test_unseen, e.g. {sorted(extra)[0]!r}")
    truth, predicted = _gather(predictions, data, ids)
    classes = tuple(split.unseen_classes)
    conf, per_class, counts = _per_class(truth, predicted, classes)
    return EvalReport(per_class, _mean(per_class.values()), conf, classes, "zsl", counts=counts)


def evaluate_gzsl(predictions, data, split):
    """Generalized ZSL over ``test_seen`` and ``test_unseen`` with all classes as candidates."""
    if not split.test_unseen_samples:
        raise EmptyPool("test_unseen pool is empty")
    if not split.test_seen_samples:
        raise EmptyPool("test_seen pool is empty")
    ids = split.test_seen_samples + split.test_unseen_samples
    extra = set(predictions) - set(ids)
    if extra:
        raise CoverageMismatch(f"predictions for samples outside the test pools, e.g. {sorted(extra)[0]!r}")
    truth, predicted = _gather(predictions, data, ids)
    classes = tuple(split.all_classes)
    conf, per_class, counts = _per_class(truth, predicted, classes)
    acc_tr = _mean(per_class[c] for c in split.seen_classes if c in per_class)
    acc_ts = _mean(per_class[c] for c in split.unseen_classes if c in per_class)
    return EvalReport(
        per_class,
        _mean(per_class.values()),
        conf,
        classes,
        "gzsl",
        acc_ts,
        acc_tr,
        harmonic_mean(acc_ts, acc_tr),
        counts,
    )


def evaluate(predictions, data, split, mode):
    if mode == "zsl":
        return evaluate_zsl(predictions, data, split)
    if mode == "gzsl":
        return evaluate_gzsl(predictions, data, split)
    raise DataError(f"unknown mode {mode!r}")


def sample_attribute_distances(s, candidates, metric="hamming_on_binarized", thresholds=None):
    """Sorted pairwise distances between candidate signature columns.

    ``hamming_on_binarized`` thresholds each row (at ``thresholds`` or, by
    default, the row mean over the candidates) before counting differing bits.
    """
    candidates = tuple(candidates)
    if len(candidates) < 2:
        raise TooFewCandidates("need at least two candidates for pairwise distances")
    cols = np.asarray(s.columns(candidates), dtype=np.float64)
    if metric == "hamming_on_binarized":
        if np.all((cols == 0) | (cols == 1)):
            bits = cols
        else:
            t = cols.mean(axis=1) if thresholds is None else np.asarray(thresholds)
            bits = (cols > t[:, None]).astype(np.float64)
        diff = np.abs(bits[:, :, None] - bits[:, None, :]).sum(axis=0)
    elif metric == "euclidean":
        diff = np.sqrt(((cols[:, :, None] - cols[:, None, :]) ** 2).sum(axis=0))
    else:
        raise DataError(f"unknown metric {metric!r}")
    iu = np.triu_indices(len(candidates), k=1)
    return np.sort(diff[iu])
