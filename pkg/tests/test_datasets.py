import numpy as np
import pytest

from sgsdistill.datasets import TEST, TRAIN, DataView, MultiDomainDataset, SyntheticSet
from sgsdistill.errors import EmptyClass, EmptySet, UnknownDomain
from sgsdistill.rng import SeededRng

from helpers import make_dataset


@pytest.fixture()
def ds():
    return make_dataset(SeededRng(0), class_count=3, domain_count=3,
                        train_per_cell=4, test_per_cell=2)


def test_views_filter_by_domain_and_split(ds):
    assert len(ds.train_view()) == 3 * 3 * 4
    assert len(ds.test_view()) == 3 * 3 * 2
    v = ds.train_view(domain=1)
    assert len(v) == 3 * 4
    assert set(v.labels.tolist()) == {0, 1, 2}


def test_unknown_domain_rejected(ds):
    with pytest.raises(UnknownDomain):
        ds.view(domain=7)
    with pytest.raises(UnknownDomain):
        ds.without_domain(-1)


def test_without_domain_renumbers_contiguously(ds):
    reduced = ds.without_domain(1)
    assert reduced.domain_count == 2
    assert reduced.domains_present() == [0, 1]
    # old domain 0 stays 0; old domain 2 becomes 1; uids are preserved
    kept_uids = set(ds.uids[ds.domains != 1].tolist())
    assert set(reduced.uids.tolist()) == kept_uids


def test_only_domain_and_flatten(ds):
    single = ds.only_domain(2)
    assert single.domain_count == 1
    assert set(single.domains.tolist()) == {0}
    flat, old = ds.flatten_domains()
    assert flat.domain_count == 1
    assert np.array_equal(old, ds.domains)


def test_subset_carries_extras():
    ds = make_dataset(SeededRng(1), class_count=2, domain_count=2)
    ds.extras["tag"] = np.arange(len(ds))
    sub = ds.subset(ds.labels == 0)
    assert np.array_equal(sub.extras["tag"], ds.uids[ds.labels == 0])


def test_view_class_indexing_and_errors():
    view = DataView(images=np.zeros((3, 1, 2, 2)),
                    labels=np.array([0, 0, 1]), class_count=3)
    assert view.class_indices(0).tolist() == [0, 1]
    with pytest.raises(EmptyClass):
        view.class_indices(2)
    empty = DataView(images=np.zeros((0, 1, 2, 2)), labels=np.array([], dtype=np.int64),
                     class_count=1)
    with pytest.raises(EmptySet):
        empty.require_nonempty()


def test_class_pixel_mean_cached():
    rng = SeededRng(2)
    view = DataView(images=rng.normal(size=(6, 1, 2, 2)),
                    labels=np.array([0, 0, 0, 1, 1, 1]), class_count=2)
    first = view.class_pixel_mean(0)
    assert view.class_pixel_mean(0) is first
    assert np.abs(first - view.images[:3].mean(axis=0)).max() < 1e-15


def test_synthetic_balance_checks():
    syn = SyntheticSet(
        images=np.zeros((4, 1, 2, 2)),
        labels=np.array([0, 0, 1, 1]),
        domains=np.array([0, 1, 0, 1]),
    )
    syn.check_balance(2, 2)
    bad = SyntheticSet(
        images=np.zeros((4, 1, 2, 2)),
        labels=np.array([0, 0, 1, 1]),
        domains=np.array([0, 0, 0, 1]),
    )
    with pytest.raises(ValueError):
        bad.check_balance(2, 2)


def test_dataset_validation():
    with pytest.raises(ValueError):
        MultiDomainDataset(
            images=np.zeros((2, 1, 2, 2)),
            labels=np.array([0, 5]),
            domains=np.zeros(2, dtype=np.int64),
            splits=np.zeros(2, dtype=np.uint8),
            class_count=2,
            domain_count=1,
        )
    with pytest.raises(ValueError):
        MultiDomainDataset(
            images=np.zeros((2, 1, 2, 2)),
            labels=np.array([0, 1]),
            domains=np.zeros(1, dtype=np.int64),
            splits=np.zeros(2, dtype=np.uint8),
            class_count=2,
            domain_count=1,
        )
