"""Synthetic instance generation shared by tests, timing runs and self-checks."""

import numpy as np

from .model import CliqueSet, CrfModel, KernelSpec, compute_features


def smooth_image(rng, height, width, low=30.0, high=230.0):
    """Random smooth colour image: a few 2-D cosines per channel."""
    yy, xx = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    img = np.zeros((height, width, 3))
    for c in range(3):
        v = np.zeros((height, width))
        for _ in range(3):
            fx, fy = rng.uniform(0.02, 0.2, size=2)
            ph = rng.uniform(0, 2 * np.pi, size=2)
            v += rng.uniform(0.3, 1.0) * np.cos(2 * np.pi * fx * xx + ph[0]) * np.cos(
                2 * np.pi * fy * yy + ph[1]
            )
        span = np.ptp(v)
        v = (v - v.min()) / (span if span > 0 else 1.0)
        img[:, :, c] = low + (high - low) * v
    return img


def random_unaries(rng, n_pixels, n_labels, scale=2.0):
    return scale * rng.normal(size=(n_pixels, n_labels))


def random_small_model(rng, n_pixels=6, n_labels=3, feature_dim=2, kernel_weight=1.0,
                       with_clique=True, clique_cost=None, feature_spread=1.5):
    """Tiny non-image instance with random features and one optional clique."""
    feats = rng.uniform(0, feature_spread, size=(n_pixels, feature_dim))
    kernels = (KernelSpec.spatial(kernel_weight, 1.0),)
    cliques = None
    if with_clique and n_pixels >= 3:
        size = min(4, n_pixels) if n_pixels >= 4 else 3
        assignments = np.full(n_pixels, -1, dtype=np.int64)
        members = rng.choice(n_pixels, size=size, replace=False)
        assignments[members] = 0
        cost = float(rng.uniform(0.5, 2.0)) if clique_cost is None else float(clique_cost)
        cliques = CliqueSet(assignments, np.array([cost]))
    unaries = random_unaries(rng, n_pixels, n_labels)
    return CrfModel.from_features(unaries, kernels, (feats,), cliques)


def random_image_model(rng, height, width, n_labels, w_bilateral=2.0, w_spatial=1.0,
                       sigma_spatial=20.0, sigma_color=40.0, sigma_pos=5.0,
                       clique_block=None, gamma=1.0, eta=100.0, unary_scale=2.0):
    """Image-backed instance with the two standard kernels."""
    img = smooth_image(rng, height, width)
    kernels = (
        KernelSpec.bilateral(w_bilateral, sigma_spatial, sigma_color),
        KernelSpec.spatial(w_spatial, sigma_pos),
    )
    unaries = random_unaries(rng, height * width, n_labels, unary_scale)
    segments = None
    if clique_block is not None:
        from .io import grid_superpixels

        segments = grid_superpixels(width, height, clique_block)
    return CrfModel.from_image(img, unaries, kernels, segments, gamma, eta)


def scaling_model(n_pixels, n_labels=21, seed=0, clique_block=8):
    """Square-ish instance of roughly ``n_pixels`` pixels for timing runs."""
    rng = np.random.default_rng(seed)
    side = int(round(np.sqrt(n_pixels)))
    return random_image_model(
        rng, side, side, n_labels,
        w_bilateral=5.0, w_spatial=2.0,
        sigma_spatial=25.0, sigma_color=40.0, sigma_pos=4.0,
        clique_block=clique_block, gamma=2.0, eta=200.0,
    )
