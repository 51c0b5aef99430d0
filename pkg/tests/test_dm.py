import numpy as np
import pytest

from sgsdistill.datasets import DataView, SyntheticSet
from sgsdistill.dm import class_feature_mean, dm_gradient, dm_loss, domain_gradient
from sgsdistill.errors import EmptyClass, UnknownDomain
from sgsdistill.featurizers import ConvFeaturizer, LinearFeaturizer
from sgsdistill.rng import SeededRng

from helpers import central_fd_grid, fd_relative_error, make_dataset, make_synthetic


def view_of(images, labels, class_count):
    return DataView(images=images, labels=np.asarray(labels, dtype=np.int64),
                    class_count=class_count)


def test_single_sample_class_mean_is_its_own_features():
    rng = SeededRng(0)
    x = rng.substream(0).normal(size=(1, 1, 3, 3))
    psi = LinearFeaturizer.create((1, 3, 3), 4, rng.substream(1))
    mu = class_feature_mean(view_of(x, [0], 1), 0, psi)
    assert np.abs(mu - psi.features(x[0])).max() < 1e-14


def test_opposite_features_average_to_zero():
    rng = SeededRng(1)
    x = rng.substream(0).normal(size=(1, 1, 3, 3))
    imgs = np.concatenate([x, -x])
    psi = LinearFeaturizer.create((1, 3, 3), 4, rng.substream(1))
    mu = class_feature_mean(view_of(imgs, [0, 0], 1), 0, psi)
    assert np.abs(mu).max() < 1e-14


def test_class_mean_matches_accumulate_and_divide_oracle():
    rng = SeededRng(2)
    imgs = rng.substream(0).normal(size=(10, 1, 4, 4))
    for psi in [
        LinearFeaturizer.create((1, 4, 4), 5, rng.substream(1)),
        ConvFeaturizer.create(1, 3, 3, rng.substream(2)),
    ]:
        acc = np.zeros(psi.feature_dim)
        for img in imgs:
            acc += psi.features(img)
        expected = acc / 10.0
        mu = class_feature_mean(view_of(imgs, [0] * 10, 1), 0, psi)
        assert np.abs(mu - expected).max() < 1e-12


def test_class_mean_raises_on_missing_class():
    imgs = np.zeros((2, 1, 2, 2))
    psi = LinearFeaturizer(np.eye(4))
    with pytest.raises(EmptyClass):
        class_feature_mean(view_of(imgs, [0, 0], 2), 1, psi)


def hand_case():
    """One class; synthetic [1, 0], real [0, 0]; identity featurizer."""
    synthetic = SyntheticSet(
        images=np.array([[[[1.0, 0.0]]]]),
        labels=np.array([0]),
        domains=np.array([0]),
    )
    real = view_of(np.array([[[[0.0, 0.0]]]]), [0], 1)
    return synthetic, real, LinearFeaturizer(np.eye(2))


def test_dm_loss_hand_computed():
    synthetic, real, psi = hand_case()
    assert dm_loss(synthetic, real, psi) == pytest.approx(1.0, abs=1e-15)


def test_dm_gradient_hand_computed():
    synthetic, real, psi = hand_case()
    result = dm_gradient(synthetic, real, psi)
    assert np.abs(result.gradients[0].ravel() - np.array([2.0, 0.0])).max() < 1e-15


def test_dm_loss_zero_when_synthetic_equals_real():
    rng = SeededRng(3)
    imgs = rng.substream(0).normal(size=(4, 1, 3, 3))
    labels = np.array([0, 0, 1, 1])
    synthetic = SyntheticSet(images=imgs.copy(), labels=labels, domains=np.zeros(4, dtype=np.int64))
    psi = LinearFeaturizer.create((1, 3, 3), 6, rng.substream(1))
    assert dm_loss(synthetic, view_of(imgs, labels, 2), psi) < 1e-24


def test_gradients_vanish_at_matched_means():
    synthetic, real, psi = hand_case()
    matched = SyntheticSet(images=real.images.copy(), labels=np.array([0]),
                           domains=np.array([0]))
    result = dm_gradient(matched, real, psi)
    assert not result.gradients.any()


def test_loss_invariant_to_sample_order_within_classes():
    rng = SeededRng(4)
    imgs = rng.substream(0).normal(size=(8, 1, 3, 3))
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    synthetic = make_synthetic(rng.substream(1), class_count=2, ipc=2, shape=(1, 3, 3))
    psi = LinearFeaturizer.create((1, 3, 3), 5, rng.substream(2))
    base = dm_loss(synthetic, view_of(imgs, labels, 2), psi)
    perm = np.array([3, 1, 0, 2, 7, 5, 6, 4])
    shuffled = dm_loss(synthetic, view_of(imgs[perm], labels[perm], 2), psi)
    assert shuffled == pytest.approx(base, rel=1e-12)


def test_dm_loss_non_negative_on_random_instances():
    rng = SeededRng(30)
    for trial in range(10):
        ds = make_dataset(rng.substream(trial), class_count=2, domain_count=2,
                          shape=(1, 3, 3))
        synthetic = make_synthetic(rng.substream(100 + trial), class_count=2, ipc=2,
                                   shape=(1, 3, 3))
        psi = LinearFeaturizer.create((1, 3, 3), 4, rng.substream(200 + trial))
        assert dm_loss(synthetic, ds.train_view(), psi) >= 0.0


def test_dm_gradient_matches_finite_differences():
    rng = SeededRng(5)
    real_imgs = rng.substream(0).normal(size=(6, 1, 3, 3))
    real = view_of(real_imgs, [0, 0, 0, 1, 1, 1], 2)
    for psi in [
        LinearFeaturizer.create((1, 3, 3), 4, rng.substream(1)),
        ConvFeaturizer.create(1, 3, 3, rng.substream(2)),
    ]:
        synthetic = make_synthetic(rng.substream(3), class_count=2, ipc=2, shape=(1, 3, 3))
        analytic = dm_gradient(synthetic, real, psi).gradients

        def loss_of_sample(i):
            def f(x):
                probe = synthetic.copy()
                probe.images[i] = x
                return dm_loss(probe, real, psi)
            return f

        for i in range(len(synthetic)):
            fd = central_fd_grid(loss_of_sample(i), synthetic.images[i])
            assert fd_relative_error(analytic[i], fd) < 1e-5


def test_domain_gradient_reduces_to_pooled_for_single_domain():
    rng = SeededRng(6)
    ds = make_dataset(rng.substream(0), class_count=2, domain_count=1, shape=(1, 3, 3))
    synthetic = make_synthetic(rng.substream(1), class_count=2, ipc=2, shape=(1, 3, 3),
                               domain_count=1)
    psi = LinearFeaturizer.create((1, 3, 3), 4, rng.substream(2))
    pooled = dm_gradient(synthetic, ds.train_view(), psi)
    restricted = domain_gradient(synthetic, ds, 0, psi)
    assert np.array_equal(pooled.gradients, restricted.gradients)
    assert pooled.loss == restricted.loss


def test_identical_domain_means_give_identical_gradients():
    rng = SeededRng(7)
    base = rng.substream(0).normal(size=(4, 1, 3, 3))
    labels = np.array([0, 0, 1, 1], dtype=np.int64)
    # Same images in both domains: per-class means coincide exactly.
    from sgsdistill.datasets import MultiDomainDataset
    ds = MultiDomainDataset(
        images=np.concatenate([base, base]),
        labels=np.concatenate([labels, labels]),
        domains=np.repeat([0, 1], 4).astype(np.int64),
        splits=np.zeros(8, dtype=np.uint8),
        class_count=2,
        domain_count=2,
    )
    synthetic = make_synthetic(rng.substream(1), class_count=2, ipc=2, shape=(1, 3, 3))
    psi = LinearFeaturizer.create((1, 3, 3), 5, rng.substream(2))
    g0 = domain_gradient(synthetic, ds, 0, psi).gradients
    g1 = domain_gradient(synthetic, ds, 1, psi).gradients
    assert np.abs(g0 - g1).max() < 1e-14


def test_domain_gradient_matches_finite_differences():
    rng = SeededRng(8)
    ds = make_dataset(rng.substream(0), class_count=2, domain_count=2, train_per_cell=4,
                      shape=(1, 3, 3))
    synthetic = make_synthetic(rng.substream(1), class_count=2, ipc=2, shape=(1, 3, 3))
    psi = LinearFeaturizer.create((1, 3, 3), 4, rng.substream(2))
    for s in range(2):
        analytic = domain_gradient(synthetic, ds, s, psi).gradients
        view = ds.train_view(domain=s)
        for i in range(len(synthetic)):
            def f(x, i=i):
                probe = synthetic.copy()
                probe.images[i] = x
                return dm_loss(probe, view, psi)
            fd = central_fd_grid(f, synthetic.images[i])
            assert fd_relative_error(analytic[i], fd) < 1e-5


def test_unknown_domain_rejected():
    rng = SeededRng(9)
    ds = make_dataset(rng.substream(0), class_count=2, domain_count=2, shape=(1, 3, 3))
    synthetic = make_synthetic(rng.substream(1), class_count=2, ipc=2, shape=(1, 3, 3))
    psi = LinearFeaturizer.create((1, 3, 3), 4, rng.substream(2))
    with pytest.raises(UnknownDomain):
        domain_gradient(synthetic, ds, 5, psi)


def test_loss_and_gradient_scaling():
    # Scaling the featurizer by alpha scales the loss by alpha^2 and the
    # gradient by alpha^2 as well (both mean difference and pullback scale).
    rng = SeededRng(10)
    real_imgs = rng.substream(0).normal(size=(5, 1, 3, 3))
    real = view_of(real_imgs, [0] * 5, 1)
    synthetic = make_synthetic(rng.substream(1), class_count=1, ipc=3, shape=(1, 3, 3))
    w = rng.substream(2).normal(size=(4, 9))
    alpha = 1.8
    base_loss = dm_loss(synthetic, real, LinearFeaturizer(w))
    scaled_loss = dm_loss(synthetic, real, LinearFeaturizer(alpha * w))
    assert scaled_loss == pytest.approx(alpha**2 * base_loss, rel=1e-12)
    # Feature-mean differences scale by alpha: loss quadratic in alpha, and the
    # gradient (W^T applied to an alpha-scaled difference) gains alpha^2 total.
    g_base = dm_gradient(synthetic, real, LinearFeaturizer(w)).gradients
    g_scaled = dm_gradient(synthetic, real, LinearFeaturizer(alpha * w)).gradients
    assert np.abs(g_scaled - alpha**2 * g_base).max() < 1e-10 * np.abs(g_scaled).max()


def test_gradient_linear_in_feature_mean_differences():
    # Scaling every image by alpha (featurizer fixed) scales the per-class
    # mean differences by alpha, the loss by alpha^2, and the gradient by alpha.
    rng = SeededRng(21)
    real_imgs = rng.substream(0).normal(size=(5, 1, 3, 3))
    real = view_of(real_imgs, [0] * 5, 1)
    synthetic = make_synthetic(rng.substream(1), class_count=1, ipc=3, shape=(1, 3, 3))
    psi = LinearFeaturizer.create((1, 3, 3), 4, rng.substream(2))
    alpha = 2.5
    scaled_synth = synthetic.copy()
    scaled_synth.images *= alpha
    scaled_real = view_of(alpha * real_imgs, [0] * 5, 1)
    base = dm_gradient(synthetic, real, psi)
    scaled = dm_gradient(scaled_synth, scaled_real, psi)
    assert scaled.loss == pytest.approx(alpha**2 * base.loss, rel=1e-12)
    assert np.abs(scaled.gradients - alpha * base.gradients).max() < 1e-12 * np.abs(
        scaled.gradients
    ).max()


def test_pooled_mean_equals_average_of_domain_means_with_equal_counts():
    rng = SeededRng(11)
    ds = make_dataset(rng.substream(0), class_count=2, domain_count=3, train_per_cell=5,
                      shape=(1, 3, 3))
    psi = LinearFeaturizer.create((1, 3, 3), 6, rng.substream(1))
    for c in range(2):
        pooled = class_feature_mean(ds.train_view(), c, psi)
        per_domain = np.mean(
            [class_feature_mean(ds.train_view(domain=s), c, psi) for s in range(3)], axis=0
        )
        assert np.abs(pooled - per_domain).max() < 1e-12 * max(1.0, np.abs(pooled).max())


def test_pooled_loss_differs_from_averaged_domain_losses():
    # The loss is quadratic in the real mean, so averaging per-domain losses
    # does not reproduce the pooled loss even with equal class counts.
    rng = SeededRng(12)
    ds = make_dataset(rng.substream(0), class_count=2, domain_count=3, train_per_cell=5,
                      shape=(1, 3, 3), domain_shift=1.0)
    synthetic = make_synthetic(rng.substream(1), class_count=2, ipc=2, shape=(1, 3, 3),
                               domain_count=3)
    psi = LinearFeaturizer.create((1, 3, 3), 6, rng.substream(2))
    pooled = dm_loss(synthetic, ds.train_view(), psi)
    averaged = np.mean([dm_loss(synthetic, ds.train_view(domain=s), psi) for s in range(3)])
    assert abs(pooled - averaged) > 1e-6


def test_pooled_gradient_differs_from_averaged_domain_gradients_unequal_counts():
    # With unequal per-class counts across domains the pooled real mean is not
    # the average of domain means, so the gradients genuinely differ.
    rng = SeededRng(13)
    from sgsdistill.datasets import MultiDomainDataset
    imgs, labels, domains = [], [], []
    counts = {0: 3, 1: 7}
    for d, count in counts.items():
        block = rng.substream(20 + d).normal(size=(count, 1, 3, 3)) + d
        imgs.append(block)
        labels.extend([0] * count)
        domains.extend([d] * count)
    ds = MultiDomainDataset(
        images=np.concatenate(imgs),
        labels=np.array(labels, dtype=np.int64),
        domains=np.array(domains, dtype=np.int64),
        splits=np.zeros(10, dtype=np.uint8),
        class_count=1,
        domain_count=2,
    )
    synthetic = make_synthetic(rng.substream(1), class_count=1, ipc=2, shape=(1, 3, 3))
    psi = LinearFeaturizer.create((1, 3, 3), 4, rng.substream(2))
    pooled = dm_gradient(synthetic, ds.train_view(), psi).gradients
    averaged = np.mean([domain_gradient(synthetic, ds, s, psi).gradients for s in range(2)],
                       axis=0)
    assert np.abs(pooled - averaged).max() > 1e-6
