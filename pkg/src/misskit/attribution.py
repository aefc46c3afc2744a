"""Explanation generators built on missingness: LIME with ridge regression,
a gradient-learned mask, and random baselines.

LIME turns regions on/off in sampled binary patterns, evaluates the model's
original-class logit on each perturbed input (pixel replacement, or token
dropping for ViTs), and fits a ridge regression of the logit on the pattern;
the coefficients are the region scores. On the token-dropping path the
baseline color field is never read, so explanations cannot depend on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import regions as R
from . import tensor as T
from .models import tokens_covering
from .util import derive_rng


@dataclass
class Explanation:
    region_scores: np.ndarray  # one scalar per region of the partition
    model_id: str
    target_class: int
    method: str
    seed: int
    partition_desc: str

    def __post_init__(self):
        self.region_scores = np.asarray(self.region_scores, dtype=np.float64)
        if not np.all(np.isfinite(self.region_scores)):
            raise ValueError("explanation scores must be finite")


@dataclass(frozen=True)
class LimeParams:
    n_perturbations: int = 1000
    ridge_lambda: float = 1.0
    on_probability: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be non-negative")
        if not 0.0 < self.on_probability < 1.0:
            raise ValueError("on_probability must lie in (0, 1)")


def ridge_fit(design, target, lam):
    """Minimize ||y - Xw - b||^2 + lam*||w||^2 (intercept unpenalized) by
    solving the normal equations of the intercept-augmented system."""
    x = np.asarray(design, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("ridge_fit needs finite inputs")
    n, r = x.shape
    aug = np.concatenate([x, np.ones((n, 1))], axis=1)
    gram = aug.T @ aug
    reg = np.zeros(r + 1)
    reg[:r] = lam
    gram[np.diag_indices(r + 1)] += reg
    coef = np.linalg.solve(gram, aug.T @ y)
    return coef[:r], float(coef[r])


def top_k(explanation, k):
    """k region indices by descending score; ties break by ascending index."""
    scores = explanation.region_scores
    if not 0 <= k <= len(scores):
        raise ValueError(f"k={k} out of range for {len(scores)} regions")
    order = np.lexsort((np.arange(len(scores)), -scores))
    return order[:k]


def random_explanation(partition, seed, model_id="random"):
    scores = derive_rng(seed, 9001).random(partition.num_regions)
    return Explanation(scores, model_id, -1, "random", seed, partition.descriptor)


def _perturbed_logits_pixels(model, image, partition, spec, patterns, image_index, chunk=256):
    """Original-class logits for each on/off pattern under a pixel spec."""
    labels = partition.labels
    image = np.asarray(image, dtype=np.float32)
    if spec.kind == R.BLUR:
        base = R.gaussian_blur(image, spec.kernel_size, spec.sigma).astype(np.float32)
    elif spec.kind == R.BLACK:
        base = np.zeros_like(image)
    elif spec.kind == R.MEAN_COLOR:
        base = np.broadcast_to(np.asarray(spec.rgb, dtype=np.float32)[:, None, None], image.shape)
    elif spec.kind == R.RANDOM_COLOR_PER_IMAGE:
        color = derive_rng(spec.seed, image_index).random(3).astype(np.float32)
        base = np.broadcast_to(color[:, None, None], image.shape)
    elif spec.kind == R.RANDOM_COLOR_PER_PIXEL:
        base = derive_rng(spec.seed, image_index).random(image.shape).astype(np.float32)
    else:
        raise R.SpecError(f"unsupported pixel spec {spec.kind!r}")
    outs = []
    for lo in range(0, len(patterns), chunk):
        zc = patterns[lo : lo + chunk]
        on_pix = zc[:, labels]  # (B, H, W) 1 where region stays
        batch = on_pix[:, None] * image[None] + (1.0 - on_pix[:, None]) * base[None]
        outs.append(model.logits_batch(batch.astype(np.float32)))
    return np.concatenate(outs, axis=0)


def _perturbed_logits_drop(model, image, partition, patterns, token_size, chunk=256):
    """Original-class logits for each pattern by dropping the conservative
    token cover of the off regions."""
    covers = []
    for rid in range(partition.num_regions):
        covers.append(tokens_covering(partition.labels == rid, token_size))
    grid_tokens = model.config.grid_tokens
    cover_matrix = np.zeros((partition.num_regions, grid_tokens), dtype=bool)
    for rid, cov in enumerate(covers):
        cover_matrix[rid, cov] = True
    drop_lists = []
    for z in patterns:
        dropped = cover_matrix[z < 0.5].any(axis=0)
        drop_lists.append(np.flatnonzero(dropped))
    return model.logits_dropped_batch(np.asarray(image, dtype=np.float32), drop_lists, chunk=chunk)


def lime_explain(model, image, partition, spec, params, image_index=0):
    """Fit ridge region scores for the model's original predicted class."""
    if spec.kind == R.DROP_TOKENS and model.kind != "vit":
        raise R.SpecError("drop_tokens explanations need a token model")
    r = partition.num_regions
    if params.n_perturbations < r + 1:
        raise ValueError(f"need at least {r + 1} perturbations for {r} regions")
    logits0 = model.logits(np.asarray(image, dtype=np.float32))
    target = int(np.argmax(logits0))
    rng = derive_rng(params.seed, image_index)
    patterns = (rng.random((params.n_perturbations, r)) < params.on_probability).astype(np.float32)
    if spec.kind == R.DROP_TOKENS:
        logits = _perturbed_logits_drop(model, image, partition, patterns, model.config.token_size)
    else:
        logits = _perturbed_logits_pixels(model, image, partition, spec, patterns, image_index)
    y = logits[:, target]
    weights, _ = ridge_fit(patterns, y, params.ridge_lambda)
    return Explanation(weights, model.model_id, target, f"lime:{spec.label()}", params.seed, partition.descriptor)


@dataclass(frozen=True)
class LearnedMaskParams:
    lambda1: float = 0.01
    lambda2: float = 0.2
    beta: float = 3.0
    noise_sigma: float = 0.2
    steps: int = 300
    lr: float = 0.1
    seed: int = 0


def _upsample_block(mask, cell_h, cell_w):
    gh, gw = mask.shape
    m = T.reshape(mask, (gh, 1, gw, 1))
    m = T.broadcast_to(m, (gh, cell_h, gw, cell_w))
    return T.reshape(m, (gh * cell_h, gw * cell_w))


def mask_objective(model, image, baseline, mask, partition, params, target, noise=None):
    """lambda1*||1-m||_1 + lambda2*sum|m_i - m_j|^beta + logit_target(blend).

    ``blend`` is x*up(m) + b*(1-up(m)) + noise with per-cell block upsampling.
    """
    cell_h, cell_w = partition.cell_shape
    up = _upsample_block(mask, cell_h, cell_w)
    up3 = T.broadcast_to(T.reshape(up, (1,) + up.shape), (3,) + up.shape)
    x = T.Tensor(np.asarray(image, dtype=np.float32))
    b = T.Tensor(np.asarray(baseline, dtype=np.float32))
    blended = T.add(T.mul(x, up3), T.mul(b, T.sub(T.Tensor(np.float32(1.0)), up3)))
    if noise is not None:
        blended = T.add_const(blended, noise)
    logits = model.forward(T.reshape(blended, (1,) + blended.shape))
    logit_c = logits[0, target]
    l1 = T.tsum(T.absolute(T.sub(T.Tensor(np.float32(1.0)), mask)))
    dh = T.sub(mask[:, 1:], mask[:, :-1])
    dv = T.sub(mask[1:, :], mask[:-1, :])
    tv = T.add(T.tsum(T.abs_pow(dh, params.beta)), T.tsum(T.abs_pow(dv, params.beta)))
    return T.add(T.add(T.mul(l1, params.lambda1), T.mul(tv, params.lambda2)), logit_c)


def learned_mask(model, image, partition, spec, params=LearnedMaskParams()):
    """Optimize a per-cell weight grid in [0,1] that minimizes the original
    class logit plus sparsity and smoothness penalties; only grid partitions
    and pixel-replacement baselines are supported (the blend needs a dense
    image, so token dropping cannot be used here)."""
    if partition.kind != "grid":
        raise ValueError("learned_mask is defined for grid partitions only")
    if not spec.is_pixel_replacement:
        raise R.SpecError("learned_mask needs a pixel-replacement baseline")
    image = np.asarray(image, dtype=np.float32)
    full = np.ones(partition.image_shape, dtype=bool)
    baseline = R.apply_approximation(image, full, spec)
    target = int(np.argmax(model.logits(image)))
    cell_h, cell_w = partition.cell_shape
    gh = partition.image_shape[0] // cell_h
    gw = partition.image_shape[1] // cell_w
    mask = T.Tensor(np.ones((gh, gw), dtype=np.float32), requires_grad=True)
    opt = T.Adam([mask], lr=params.lr)
    noise_rng = derive_rng(params.seed, 77)
    for step in range(params.steps):
        noise = noise_rng.normal(0.0, params.noise_sigma, size=image.shape).astype(np.float32)
        loss = mask_objective(model, image, baseline, mask, partition, params, target, noise=noise)
        if not np.isfinite(loss.item()):
            raise RuntimeError(f"learned_mask diverged at step {step}")
        opt.zero_grad()
        T.backward(loss)
        opt.step()
        np.clip(mask.data, 0.0, 1.0, out=mask.data)
    scores = mask.data.astype(np.float64).reshape(-1)
    return Explanation(scores, model.model_id, target, f"learned_mask:{spec.label()}", params.seed, partition.descriptor)
