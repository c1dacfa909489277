"""Datasets on disk and seeded synthetic ZSL problems."""

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._io import fmt, parse_float, read_rows, staged_writes, to_csv
from .attrspace import AttributeMatrix, attributes_csv, read_attributes
from .errors import (
    DataError,
    DuplicateSampleId,
    InfeasibleConfig,
    ParseError,
    SplitOverlap,
    UnknownClass,
)

PARTITIONS = ("train", "test_seen", "test_unseen")
MAX_SIGNATURE_REDRAWS = 1000


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: tuple
    sample_ids: tuple

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError(f"features must be a non-empty N x d matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain non-finite values")
        x.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        if not (len(self.labels) == len(self.sample_ids) == x.shape[0]):
            raise DataError("labels, sample_ids and feature rows differ in length")
        seen = set()
        for sid in self.sample_ids:
            if sid in seen:
                raise DuplicateSampleId(f"duplicate sample id {sid!r}")
            seen.add(sid)
        object.__setattr__(self, "_row", {sid: i for i, sid in enumerate(self.sample_ids)})

    @property
    def dim(self):
        return self.features.shape[1]

    def rows(self, ids):
        try:
            return np.array([self._row[i] for i in ids], dtype=np.intp)
        except KeyError as exc:
            raise DataError(f"unknown sample id {exc.args[0]!r}") from None

    def subset(self, ids):
        """``(features, labels)`` for the given sample ids, in the given order."""
        idx = self.rows(ids)
        return self.features[idx], tuple(self.labels[i] for i in idx)


@dataclass(frozen=True)
class SplitSpec:
    seen_classes: tuple
    unseen_classes: tuple
    train_samples: tuple
    test_seen_samples: tuple = ()
    test_unseen_samples: tuple = ()

    def __post_init__(self):
        for name in ("seen_classes", "unseen_classes", "train_samples", "test_seen_samples", "test_unseen_samples"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        overlap = set(self.seen_classes) & set(self.unseen_classes)
        if overlap:
            raise SplitOverlap(f"classes both seen and unseen: {sorted(overlap)}")
        owner = {}
        for part in PARTITIONS:
            for sid in getattr(self, f"{part}_samples"):
                if sid in owner:
                    raise SplitOverlap(f"sample {sid!r} listed in both {owner[sid]} and {part}")
                owner[sid] = part

    @property
    def all_classes(self):
        return self.seen_classes + self.unseen_classes

    def pool(self, partition):
        return getattr(self, f"{partition}_samples")

    def validate(self, data, class_universe=None):
        """Cross-check labels and class roles against a dataset."""
        if class_universe is not None:
            known = set(class_universe)
            for c in self.all_classes:
                if c not in known:
                    raise UnknownClass(f"split names class {c!r} absent from the attribute matrix")
        seen, unseen = set(self.seen_classes), set(self.unseen_classes)
        universe = seen | unseen
        for lab in data.labels:
            if lab not in universe:
                raise UnknownClass(f"label {lab!r} is neither seen nor unseen")
        checks = (("train", seen), ("test_seen", seen), ("test_unseen", unseen))
        for part, allowed in checks:
            ids = self.pool(part)
            _, labels = data.subset(ids)
            for sid, lab in zip(ids, labels):
                if lab not in allowed:
                    raise DataError(f"sample {sid!r} in {part} has label {lab!r} outside its class role")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 42
    K: int = 8
    L: int = 4
    M: int = 16
    d: int = 32
    samples_per_class: int = 50
    noise_sigma: float = 0.3
    signature_sparsity: float = 0.4

    def __post_init__(self):
        for name in ("K", "L", "M", "d", "samples_per_class"):
            if int(getattr(self, name)) < 1:
                raise InfeasibleConfig(f"{name} must be a positive integer")
        if self.seed < 0:
            raise InfeasibleConfig("seed must be non-negative")
        if self.K < 2 or self.L < 2:
            raise InfeasibleConfig("need at least two seen and two unseen classes")
        if self.d < self.M:
            raise InfeasibleConfig("feature dimension d must be at least M")
        if not self.noise_sigma >= 0:
            raise InfeasibleConfig("noise_sigma must be non-negative")
        if not 0 < self.signature_sparsity < 1:
            raise InfeasibleConfig("signature_sparsity must lie in (0, 1)")

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Bundle:
    data: Dataset
    split: SplitSpec
    attributes: AttributeMatrix
    projection: np.ndarray = field(default=None, repr=False)  # generating M x d map, synthetic only

    def __iter__(self):
        return iter((self.data, self.split, self.attributes))


def _draw_signatures(rng, n_classes, m, p):
    sigs = (rng.random((n_classes, m)) < p).astype(np.float64)
    attempts = 0
    seen = set()
    for j in range(n_classes):
        while not sigs[j].any() or sigs[j].tobytes() in seen:
            attempts += 1
            if attempts > MAX_SIGNATURE_REDRAWS:
                raise InfeasibleConfig(
                    f"could not draw {n_classes} distinct non-zero signatures over {m} attributes"
                )
            sigs[j] = rng.random(m) < p
        seen.add(sigs[j].tobytes())
    return sigs


def generate_synthetic(cfg=None):
    """Seeded ZSL problem whose attribute ground truth is the generating signature.

    Features are ``signature @ P + noise`` for a fixed Gaussian projection
    ``P``. The first ``K`` classes are seen: 80% of their samples go to
    ``train`` and the rest to ``test_seen``. Every unseen-class sample goes to
    ``test_unseen``.
    """
    cfg = cfg or SynthConfig()
    if 2 ** min(cfg.M, 62) - 1 < cfg.K + cfg.L:
        raise InfeasibleConfig(f"{cfg.M} binary attributes cannot separate {cfg.K + cfg.L} classes")
    sig_ss, proj_ss, noise_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    n_classes = cfg.K + cfg.L
    sigs = _draw_signatures(np.random.default_rng(sig_ss), n_classes, cfg.M, cfg.signature_sparsity)
    proj = np.random.default_rng(proj_ss).standard_normal((cfg.M, cfg.d))
    noise_rng = np.random.default_rng(noise_ss)

    width = max(2, len(str(n_classes - 1)))
    classes = [f"class_{j:0{width}d}" for j in range(n_classes)]
    attrs = [f"attr_{i:0{max(2, len(str(cfg.M - 1)))}d}" for i in range(cfg.M)]
    spc = cfg.samples_per_class
    n_train = int(round(0.8 * spc))

    feats, labels, ids = [], [], []
    parts = {p: [] for p in PARTITIONS}
    for j, name in enumerate(classes):
        block = sigs[j] @ proj + cfg.noise_sigma * noise_rng.standard_normal((spc, cfg.d))
        for i in range(spc):
            sid = f"s{j * spc + i:06d}"
            feats.append(block[i])
            labels.append(name)
            ids.append(sid)
            if j >= cfg.K:
                parts["test_unseen"].append(sid)
            elif i < n_train:
                parts["train"].append(sid)
            else:
                parts["test_seen"].append(sid)

    data = Dataset(np.array(feats), labels, ids)
    split = SplitSpec(
        tuple(classes[: cfg.K]),
        tuple(classes[cfg.K :]),
        parts["train"],
        parts["test_seen"],
        parts["test_unseen"],
    )
    attributes = AttributeMatrix(sigs.T, attrs, classes)
    return Bundle(data, split, attributes, proj)


# -- file formats ------------------------------------------------------------


def read_features(path):
    rows = list(read_rows(path))
    if not rows:
        raise ParseError(path, 1, "empty features file")
    lineno, header = rows[0]
    if header[:2] != ["sample_id", "label"] or len(header) < 3:
        raise ParseError(path, lineno, "header must be 'sample_id,label,f1,...,fd'")
    width = len(header)
    ids, labels, feats, seen = [], [], [], {}
    for lineno, fields in rows[1:]:
        if len(fields) != width:
            raise ParseError(path, lineno, f"expected {width} fields, got {len(fields)}")
        sid = fields[0]
        if sid in seen:
            raise DuplicateSampleId(f"{path}:{lineno}: sample id {sid!r} already defined on line {seen[sid]}")
        seen[sid] = lineno
        ids.append(sid)
        labels.append(fields[1])
        feats.append([parse_float(path, lineno, col, f) for col, f in enumerate(fields[2:], start=3)])
    if not ids:
        raise ParseError(path, lineno, "no samples")
    arr = np.array(feats, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ParseError(path, 0, "non-finite feature value")
    return Dataset(arr, labels, ids)


def read_splits(path):
    seen, unseen = [], []
    parts = {p: [] for p in PARTITIONS}
    owner = {}
    rows = list(read_rows(path))
    start = 1 if rows and rows[0][1] == ["sample_id", "partition"] else 0
    for lineno, fields in rows[start:]:
        if fields[0] == "class":
            if len(fields) != 3 or fields[2] not in ("seen", "unseen"):
                raise ParseError(path, lineno, "class role must read 'class,<name>,<seen|unseen>'")
            (seen if fields[2] == "seen" else unseen).append(fields[1])
            continue
        if len(fields) != 2:
            raise ParseError(path, lineno, "sample record must read 'sample_id,partition'")
        sid, part = fields
        if part not in parts:
            raise ParseError(path, lineno, f"unknown partition {part!r}", column=2)
        if sid in owner:
            raise SplitOverlap(f"{path}:{lineno}: sample {sid!r} already assigned to {owner[sid]}")
        owner[sid] = part
        parts[part].append(sid)
    both = sorted(set(seen) & set(unseen))
    if both:
        raise SplitOverlap(f"{path}: class {both[0]!r} is declared both seen and unseen")
    if len(set(seen)) != len(seen) or len(set(unseen)) != len(unseen):
        raise ParseError(path, 0, "class role declared twice")
    return SplitSpec(seen, unseen, parts["train"], parts["test_seen"], parts["test_unseen"])


def load_dataset(features_path, splits_path, attributes_path):
    """Read and cross-validate a dataset bundle."""
    attributes = read_attributes(attributes_path)
    data = read_features(features_path)
    split = read_splits(splits_path)
    split.validate(data, attributes.class_names)
    return Bundle(data, split, attributes)


def features_csv(data):
    header = ["sample_id", "label"] + [f"f{k + 1}" for k in range(data.dim)]
    rows = [header]
    for sid, lab, x in zip(data.sample_ids, data.labels, data.features):
        rows.append([sid, lab] + [fmt(v) for v in x])
    return to_csv(rows)


def splits_csv(split):
    rows = [["sample_id", "partition"]]
    rows += [["class", c, "seen"] for c in split.seen_classes]
    rows += [["class", c, "unseen"] for c in split.unseen_classes]
    for part in PARTITIONS:
        rows += [[sid, part] for sid in split.pool(part)]
    return to_csv(rows)


def dataset_files(bundle, features_path, splits_path, attributes_path):
    """``(path, text)`` pairs for writing a bundle; see :func:`write_dataset`."""
    return [
        (Path(features_path), features_csv(bundle.data)),
        (Path(splits_path), splits_csv(bundle.split)),
        (Path(attributes_path), attributes_csv(bundle.attributes)),
    ]


def write_dataset(bundle, features_path, splits_path, attributes_path):
    with staged_writes() as pending:
        pending.extend(dataset_files(bundle, features_path, splits_path, attributes_path))
