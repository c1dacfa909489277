import numpy as np
import pytest

from zslca.datagen import (
    Dataset,
    SplitSpec,
    SynthConfig,
    dataset_files,
    generate_synthetic,
    load_dataset,
    write_dataset,
)
from zslca.errors import DuplicateSampleId, InfeasibleConfig, ParseError, SplitOverlap, UnknownClass


def _write_bundle(tmp_path, bundle, tag="d"):
    paths = [tmp_path / f"{tag}_features.csv", tmp_path / f"{tag}_splits.csv", tmp_path / f"{tag}_attributes.csv"]
    write_dataset(bundle, *paths)
    return paths


def test_deterministic_bytes(tmp_path):
    cfg = SynthConfig(seed=42, K=8, L=4, M=16, d=32, samples_per_class=50, noise_sigma=0.3, signature_sparsity=0.4)
    first = [text for _, text in dataset_files(generate_synthetic(cfg), "f", "s", "a")]
    second = [text for _, text in dataset_files(generate_synthetic(cfg), "f", "s", "a")]
    assert first == second


def test_seed_changes_output():
    a = generate_synthetic(SynthConfig(seed=1))
    b = generate_synthetic(SynthConfig(seed=2))
    assert not np.array_equal(a.data.features, b.data.features)


def test_zero_noise_collapses_classes():
    b = generate_synthetic(SynthConfig(seed=5, noise_sigma=0.0))
    labels = np.array(b.data.labels)
    for c in set(labels):
        block = b.data.features[labels == c]
        assert np.all(block == block[0])


def test_shapes_and_partition(synth42):
    data, split, attrs = synth42
    cfg = SynthConfig()
    n = (cfg.K + cfg.L) * cfg.samples_per_class
    assert data.features.shape == (n, cfg.d)
    assert attrs.values.shape == (cfg.M, cfg.K + cfg.L)
    assert len(split.seen_classes) == cfg.K and len(split.unseen_classes) == cfg.L
    pools = [set(split.train_samples), set(split.test_seen_samples), set(split.test_unseen_samples)]
    assert sum(map(len, pools)) == n
    assert set().union(*pools) == set(data.sample_ids)
    assert not set(split.seen_classes) & set(split.unseen_classes)
    _, train_labels = data.subset(split.train_samples)
    assert set(train_labels) <= set(split.seen_classes)
    _, unseen_labels = data.subset(split.test_unseen_samples)
    assert set(unseen_labels) == set(split.unseen_classes)
    # 80% of every seen class trains
    assert len(split.train_samples) == cfg.K * 40
    assert len(split.test_unseen_samples) == cfg.L * cfg.samples_per_class


def test_signatures_distinct_and_nonzero(synth42):
    sig = synth42.attributes.values.T
    assert np.all(sig.sum(axis=1) > 0)
    assert len({row.tobytes() for row in sig}) == sig.shape[0]
    assert set(np.unique(sig)) <= {0.0, 1.0}


def test_learnable_by_signature_oracle(synth42):
    """Ground-truth projection + nearest signature recognizes unseen classes."""
    data, split, attrs = synth42
    X, labels = data.subset(split.test_unseen_samples)
    labels = np.array(labels)
    est = np.linalg.lstsq(synth42.projection.T, X.T, rcond=None)[0].T
    sigs = attrs.columns(split.unseen_classes).T
    pred = np.array(split.unseen_classes)[((est[:, None, :] - sigs[None]) ** 2).sum(axis=2).argmin(axis=1)]
    per_class = [np.mean(pred[labels == c] == c) for c in split.unseen_classes]
    assert min(per_class) > 0.9


@pytest.mark.parametrize(
    "kw",
    [dict(K=1), dict(L=1), dict(d=8, M=16), dict(signature_sparsity=0.0), dict(signature_sparsity=1.0),
     dict(noise_sigma=-1.0), dict(samples_per_class=0)],
)
def test_config_validation(kw):
    with pytest.raises(InfeasibleConfig):
        SynthConfig(**kw)


def test_infeasible_signature_count():
    with pytest.raises(InfeasibleConfig):
        generate_synthetic(SynthConfig(K=2, L=2, M=2, d=4))


def test_round_trip_bytes(tmp_path, synth42):
    paths = _write_bundle(tmp_path, synth42)
    loaded = load_dataset(*paths)
    again = _write_bundle(tmp_path, loaded, tag="again")
    for p, q in zip(paths, again):
        assert p.read_bytes() == q.read_bytes()
    np.testing.assert_array_equal(loaded.data.features, synth42.data.features)


TOY_FEATURES = "sample_id,label,f1,f2\nt1,a,1,0\nt2,b,0,1\nu1,c,1,1\n"
TOY_SPLITS = "sample_id,partition\nclass,a,seen\nclass,b,seen\nclass,c,unseen\nt1,train\nt2,train\nu1,test_unseen\n"
TOY_ATTRS = "attribute,a,b,c\nx,1,0,1\ny,0,1,1\n"


def _toy(tmp_path, features=TOY_FEATURES, splits=TOY_SPLITS, attrs=TOY_ATTRS):
    paths = []
    for name, text in (("f.csv", features), ("s.csv", splits), ("a.csv", attrs)):
        p = tmp_path / name
        p.write_text(text)
        paths.append(p)
    return paths


def test_toy_fixture(tmp_path):
    data, split, attrs = load_dataset(*_toy(tmp_path))
    assert len(split.seen_classes) == 2 and len(split.unseen_classes) == 1
    assert data.dim == 2
    assert split.test_seen_samples == ()


def test_unknown_class(tmp_path):
    splits = TOY_SPLITS.replace("class,c,unseen", "class,zebra,unseen")
    with pytest.raises(UnknownClass):
        load_dataset(*_toy(tmp_path, splits=splits))


def test_split_overlap(tmp_path):
    with pytest.raises(SplitOverlap):
        load_dataset(*_toy(tmp_path, splits=TOY_SPLITS + "t1,test_unseen\n"))


def test_duplicate_sample(tmp_path):
    with pytest.raises(DuplicateSampleId):
        load_dataset(*_toy(tmp_path, features=TOY_FEATURES + "t1,a,0,0\n"))


def test_bad_partition_and_number(tmp_path):
    with pytest.raises(ParseError) as info:
        load_dataset(*_toy(tmp_path, splits=TOY_SPLITS + "u2,validation\n"))
    assert info.value.line == 8
    with pytest.raises(ParseError) as info:
        load_dataset(*_toy(tmp_path, features=TOY_FEATURES.replace("u1,c,1,1", "u1,c,1,x")))
    assert (info.value.line, info.value.column) == (4, 4)


def test_label_outside_role(tmp_path):
    splits = TOY_SPLITS.replace("u1,test_unseen", "u1,train")
    with pytest.raises(Exception) as info:
        load_dataset(*_toy(tmp_path, splits=splits))
    assert "outside its class role" in str(info.value)


def test_split_spec_rejects_shared_class():
    with pytest.raises(SplitOverlap):
        SplitSpec(["a"], ["a"], [])


def test_dataset_subset_and_duplicates():
    d = Dataset(np.eye(3), ["a", "b", "a"], ["x", "y", "z"])
    X, labels = d.subset(["z", "x"])
    np.testing.assert_array_equal(X, np.eye(3)[[2, 0]])
    assert labels == ["a", "a"] or labels == ("a", "a")
    with pytest.raises(DuplicateSampleId):
        Dataset(np.eye(2), ["a", "b"], ["x", "x"])
