"""Distribution-matching losses and their exact pixel-space gradients.

The loss for a view of real data is the sum over classes of the squared
distance between synthetic and real per-class feature means. Means are taken
over the full view every call (no minibatching), which keeps the gradients
deterministic and testable against finite differences; callers that need
stochastic behavior can subsample the view first.
"""

from dataclasses import dataclass

import numpy as np

from .datasets import MultiDomainDataset, SyntheticSet
from .errors import EmptyClass, ShapeMismatch, UnknownDomain
from .featurizers import mean_features


def class_feature_mean(view, c, psi):
    """Mean feature vector of class c over all samples in the view."""
    view.class_indices(c)  # raises EmptyClass
    return view.cached_feature_mean(
        psi, c,
        lambda: mean_features(psi, view.class_images(c),
                              pixel_mean=view.class_pixel_mean(c)),
    )


@dataclass
class DmGradient:
    """Per-synthetic-sample pixel gradients plus the loss they descend."""

    gradients: np.ndarray  # (n, channels, h, w)
    loss: float


def _class_mean_errors(synthetic: SyntheticSet, view, psi):
    """Per-class (mean psi(synthetic) - mean psi(real)) and the summed loss."""
    if synthetic.images.shape[1:] != view.images.shape[1:]:
        raise ShapeMismatch(
            f"synthetic images {synthetic.images.shape[1:]} vs real {view.images.shape[1:]}"
        )
    syn_view = synthetic.as_view()
    errors = {}
    loss = 0.0
    for c in range(synthetic.class_count):
        mu_syn = class_feature_mean(syn_view, c, psi)
        mu_real = class_feature_mean(view, c, psi)
        delta = mu_syn - mu_real
        errors[c] = delta
        loss += float(delta @ delta)
    return errors, loss


def dm_loss(synthetic: SyntheticSet, view, psi):
    """Sum over classes of || mean psi(synthetic_c) - mean psi(real_c) ||^2."""
    _, loss = _class_mean_errors(synthetic, view, psi)
    return loss


def dm_gradient(synthetic: SyntheticSet, view, psi):
    """Exact gradient of dm_loss with respect to every synthetic image.

    Each member of class c receives the same upstream covector
    (2 / ipc_c) * (mean psi(synthetic_c) - mean psi(real_c)) pulled back
    through the featurizer at its own pixels.
    """
    errors, loss = _class_mean_errors(synthetic, view, psi)
    grads = np.zeros_like(synthetic.images)
    by_class = synthetic.as_view().by_class()
    for c, delta in errors.items():
        members = by_class[c]
        if members.size == 0:
            raise EmptyClass(f"synthetic set has no images for class {c}")
        upstream = (2.0 / members.size) * delta
        if psi.vjp_depends_on_input:
            grads[members] = psi.vjp_batch(synthetic.images[members], upstream)
        else:
            grads[members] = psi.vjp(synthetic.images[members[0]], upstream)
    return DmGradient(gradients=grads, loss=loss)


def domain_gradient(synthetic: SyntheticSet, source: MultiDomainDataset, s, psi):
    """dm_gradient with the real side restricted to source domain s."""
    if not 0 <= int(s) < source.domain_count:
        raise UnknownDomain(f"domain {s} not in 0..{source.domain_count - 1}")
    return dm_gradient(synthetic, source.train_view(domain=int(s)), psi)
