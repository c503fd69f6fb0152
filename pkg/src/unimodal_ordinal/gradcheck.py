"""Finite-difference checks of every registered method's head and loss."""

import numpy as np

from . import autodiff as ad
from .losses import project_targets
from .methods import LossSpec, extra_parameters, forward_head, output_width, sample_losses

KINK_MARGIN = 1e-3


def _objective(spec, K, ks, targets):
    def fn(params):
        out = forward_head(spec, params["z"], K, params)
        return sample_losses(spec, out, ks, targets).mean()
    return fn


def draw_inputs(spec, K, n, rng, kink_margin=KINK_MARGIN, max_draws=1000):
    """Random logits, labels and frozen projection targets away from kinks.

    Returns ``(params, ks, targets)``. For WU methods the projection is held
    fixed. WU-Wass freezes the projection of a nearby independent point:
    at its own projection the CDF gaps vanish, which is exactly the kink
    of ``|.|``.
    """
    width = output_width(spec.name, K)
    for _ in range(max_draws):
        params = ad.ParameterSet({"z": rng.normal(size=(n, width))})
        for name, value in extra_parameters(spec).items():
            params.add(name, value + rng.normal(scale=0.5, size=value.shape))
        ks = rng.integers(1, K + 1, size=n)
        targets = None
        if spec.name.startswith("wu-"):
            z = params["z"].value
            if spec.name == "wu-wass":
                z = z + rng.normal(scale=0.5, size=z.shape)
            targets = project_targets(ks, ad.softmax(z).value)
        with ad.kink_monitor() as mon:
            _objective(spec, K, ks, targets)(params)
        if mon.distance > kink_margin:
            return params, ks, targets
    raise RuntimeError(f"no kink-free input found for {spec.name} in {max_draws} draws")


def gradient_check(spec, K=5, n=4, seed=0, eps=1e-5):
    """Max relative finite-difference error for one random kink-free batch."""
    if isinstance(spec, str):
        spec = LossSpec(spec)
    rng = np.random.default_rng(seed)
    params, ks, targets = draw_inputs(spec, K, n, rng)
    return ad.finite_difference_check(_objective(spec, K, ks, targets), params, eps)
