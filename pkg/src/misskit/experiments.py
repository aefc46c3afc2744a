"""End-to-end measurement protocols: bias sweeps over removal fractions,
retrain comparisons, LIME consistency across baseline colors, and top-k
ablation of explanations. All emit flat ResultRow tables; identical configs
and seeds reproduce identical tables."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import regions as R
from .attribution import lime_explain, random_explanation, top_k
from .metrics import class_distribution, class_entropy, keep_fraction, mean_wup_on_errors, topk_jaccard
from .models import saliency_batch, tokens_covering
from .util import derive_seed


class ConfigError(ValueError):
    """Inconsistent experiment configuration, raised before any compute."""


def build_partitions(images, kind="grid", cell=8, slic_params=None, min_label_fraction=0.75):
    """Per-image partitions for an experiment.

    Grid: one shared partition. SLIC: one segmentation per image; images
    whose realized label count falls below min_label_fraction*k are filtered
    out (their indices are dropped from the returned keep list).

    Returns (partitions, kept_indices).
    """
    images = np.asarray(images)
    n = len(images)
    if kind == "grid":
        h, w = images.shape[2], images.shape[3]
        shared = R.grid_partition(h, w, cell, cell)
        return [shared] * n, list(range(n))
    if kind == "slic":
        from .slic import labelmap_to_partition, slic

        if slic_params is None:
            raise ConfigError("slic partitions need SlicParams")
        partitions, kept = [], []
        threshold = min_label_fraction * slic_params.k
        for i in range(n):
            part = labelmap_to_partition(slic(images[i], slic_params))
            if part.num_regions >= threshold:
                partitions.append(part)
                kept.append(i)
        return partitions, kept
    raise ConfigError(f"unknown partition kind {kind!r}")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    order: str | None
    fraction: float | None
    k: int | None
    spec: str | None
    metric: str
    value: float | None
    n: int


@dataclass(frozen=True)
class BiasSweepConfig:
    orders: tuple
    fractions: tuple = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    spec: R.MissingnessSpec = R.MissingnessSpec.black()
    seed: int = 0
    experiment_id: str = "bias_sweep"

    def __post_init__(self):
        if list(self.fractions) != sorted(self.fractions):
            raise ConfigError("fractions must be sorted ascending")
        if any(not 0.0 <= f <= 1.0 for f in self.fractions):
            raise ConfigError("fractions must lie in [0, 1]")


def _validate_model_spec(model, spec):
    if spec.kind == R.DROP_TOKENS and model.kind != "vit":
        raise ConfigError("drop_tokens missingness requires a token model; this model is a CNN")


def _per_image_partitions(partitions, n):
    if isinstance(partitions, R.RegionPartition):
        return [partitions] * n
    partitions = list(partitions)
    if len(partitions) != n:
        raise ConfigError(f"{len(partitions)} partitions for {n} images")
    return partitions


def _orderings(partitions, orders, images, saliency_model, sweep_seed):
    """One permutation per (order, image); saliency maps are computed once."""
    needs_saliency = any(o.kind != R.RANDOM for o in orders)
    maps = None
    if needs_saliency:
        maps = []
        for lo in range(0, len(images), 64):
            maps.append(saliency_batch(saliency_model, images[lo : lo + 64]))
        maps = np.concatenate(maps, axis=0)
    per_order = {}
    for order in orders:
        perms = []
        for i in range(len(images)):
            if order.kind == R.RANDOM:
                seeded = R.RemovalOrder(R.RANDOM, seed=derive_seed(sweep_seed, order.seed))
                perms.append(R.order_regions(partitions[i], seeded, image_index=i))
            else:
                perms.append(R.order_regions(partitions[i], order, saliency_map=maps[i], image_index=i))
        per_order[order.kind] = perms
    return per_order


def masked_predictions(model, images, partitions, perms, fraction, spec, token_size=None):
    """Predicted classes after removing the leading fraction of each image's
    ordering, batched per spec kind."""
    if spec.kind == R.DROP_TOKENS:
        drop_lists = []
        for i, image in enumerate(images):
            masked = R.remove_fraction(image, model.kind, partitions[i], perms[i], fraction, spec, token_size=token_size, image_index=i)
            drop_lists.append(masked.dropped_tokens)
        logits = model.logits_batch_dropped(images, drop_lists)
    else:
        batch = np.stack(
            [
                R.remove_fraction(image, model.kind, partitions[i], perms[i], fraction, spec, image_index=i).image
                for i, image in enumerate(images)
            ]
        )
        logits = model.logits_batch(batch)
    return np.argmax(logits, axis=1)


def bias_sweep(model, images, partitions, cfg, taxonomy, saliency_model=None, token_size=None):
    """Class entropy, keep fraction, taxonomy similarity of errors, and the
    full class distribution for every (order, fraction) cell.

    ``partitions`` is one shared RegionPartition or one per image (needed
    for superpixels)."""
    _validate_model_spec(model, cfg.spec)
    if token_size is None and cfg.spec.kind == R.DROP_TOKENS:
        token_size = model.config.token_size
    images = np.asarray(images, dtype=np.float32)
    partitions = _per_image_partitions(partitions, len(images))
    num_classes = taxonomy.num_classes
    original = np.argmax(model.logits_batch(images), axis=1)
    per_order = _orderings(partitions, cfg.orders, images, saliency_model or model, cfg.seed)
    rows = []
    spec_label = cfg.spec.label()
    for order_kind, perms in per_order.items():
        for fraction in cfg.fractions:
            preds = masked_predictions(model, images, partitions, perms, fraction, cfg.spec, token_size)
            n = len(images)
            rows.append(ResultRow(cfg.experiment_id, order_kind, fraction, None, spec_label, "class_entropy", class_entropy(preds, num_classes), n))
            rows.append(ResultRow(cfg.experiment_id, order_kind, fraction, None, spec_label, "keep_fraction", keep_fraction(original, preds), n))
            wup, errors = mean_wup_on_errors(original, preds, taxonomy)
            rows.append(ResultRow(cfg.experiment_id, order_kind, fraction, None, spec_label, "mean_wup_on_errors", wup, errors))
            dist = class_distribution(preds, num_classes)
            for c in range(num_classes):
                rows.append(ResultRow(cfg.experiment_id, order_kind, fraction, None, spec_label, f"class_fraction/{c}", float(dist[c]), n))
    return rows


def roar_compare(standard_model, retrained_model, images, partitions, cfg, taxonomy, saliency_model=None, token_size=None):
    """Run the same sweep on a standard model and its augmentation-retrained
    twin; returns (standard rows, retrained rows, keep-fraction gap rows)."""
    if standard_model.kind != retrained_model.kind:
        raise ConfigError("roar comparison needs models of the same architecture")
    std_cfg = BiasSweepConfig(cfg.orders, cfg.fractions, cfg.spec, cfg.seed, cfg.experiment_id + "/standard")
    ret_cfg = BiasSweepConfig(cfg.orders, cfg.fractions, cfg.spec, cfg.seed, cfg.experiment_id + "/retrained")
    rows_std = bias_sweep(standard_model, images, partitions, std_cfg, taxonomy, saliency_model, token_size)
    rows_ret = bias_sweep(retrained_model, images, partitions, ret_cfg, taxonomy, saliency_model, token_size)

    def keep_by_cell(rows):
        return {(r.order, r.fraction): r.value for r in rows if r.metric == "keep_fraction"}

    std_keep, ret_keep = keep_by_cell(rows_std), keep_by_cell(rows_ret)
    gap_rows = [
        ResultRow(cfg.experiment_id + "/gap", order, fraction, None, cfg.spec.label(), "keep_fraction_gap",
                  abs(std_keep[(order, fraction)] - ret_keep[(order, fraction)]), len(images))
        for (order, fraction) in std_keep
    ]
    return rows_std, rows_ret, gap_rows


CONSISTENCY_COLORS = tuple((r, g, b) for r in (0.0, 1.0) for g in (0.0, 1.0) for b in (0.0, 1.0))


def consistency_test(model, images, partitions, k_grid, lime_params, mode="pixel", experiment_id="consistency"):
    """Top-k Jaccard agreement of LIME explanations across the 8 corner
    baseline colors (28 pairs), plus a random-explanation baseline curve.

    ``pixel`` mode fits one explanation per corner color; ``drop_tokens``
    mode fits once (the color is never read on that path) and the pair
    curves compare those identical explanations."""
    images = np.asarray(images, dtype=np.float32)
    partitions = _per_image_partitions(partitions, len(images))
    rows = []
    if mode == "drop_tokens":
        _validate_model_spec(model, R.MissingnessSpec.drop_tokens())
        once = [
            lime_explain(model, img, partitions[i], R.MissingnessSpec.drop_tokens(), lime_params, image_index=i)
            for i, img in enumerate(images)
        ]
        per_color = [once] * len(CONSISTENCY_COLORS)
        spec_label = "drop_tokens"
    elif mode == "pixel":
        per_color = []
        for color in CONSISTENCY_COLORS:
            spec = R.MissingnessSpec.mean_color(color)
            per_color.append([lime_explain(model, img, partitions[i], spec, lime_params, image_index=i) for i, img in enumerate(images)])
        spec_label = "mean_color_corners"
    else:
        raise ConfigError(f"unknown consistency mode {mode!r}")
    pair_means = {k: [] for k in k_grid}
    for a, b in combinations(range(len(CONSISTENCY_COLORS)), 2):
        for k in k_grid:
            mean_j = float(np.mean([topk_jaccard(ea, eb, k) for ea, eb in zip(per_color[a], per_color[b])]))
            pair_means[k].append(mean_j)
            rows.append(ResultRow(experiment_id, f"c{a}-c{b}", None, k, spec_label, "topk_jaccard", mean_j, len(images)))
    for k in k_grid:
        rows.append(ResultRow(experiment_id, "mean_pairs", None, k, spec_label, "topk_jaccard", float(np.mean(pair_means[k])), len(images)))
    for k in k_grid:
        jaccards = []
        for i in range(len(images)):
            e1 = random_explanation(partitions[i], derive_seed(lime_params.seed, i, 1))
            e2 = random_explanation(partitions[i], derive_seed(lime_params.seed, i, 2))
            jaccards.append(topk_jaccard(e1, e2, k))
        rows.append(ResultRow(experiment_id, "random-random", None, k, spec_label, "topk_jaccard", float(np.mean(jaccards)), len(images)))
    return rows


def topk_ablation(model, images, sources, k_grid, spec, partitions, token_size=None, experiment_id="topk_ablation"):
    """Keep fraction after removing each explanation source's top-k regions.

    ``sources`` maps a source name to one Explanation per image, all over the
    evaluation partition.
    """
    _validate_model_spec(model, spec)
    images = np.asarray(images, dtype=np.float32)
    partitions = _per_image_partitions(partitions, len(images))
    for name, explanations in sources.items():
        if len(explanations) != len(images):
            raise ConfigError(f"source {name!r} has {len(explanations)} explanations for {len(images)} images")
        for i, e in enumerate(explanations):
            if e.partition_desc != partitions[i].descriptor:
                raise ConfigError(f"source {name!r} explanation over foreign partition {e.partition_desc}")
    if token_size is None and spec.kind == R.DROP_TOKENS:
        token_size = model.config.token_size
    original = np.argmax(model.logits_batch(images), axis=1)
    rows = []
    for name, explanations in sources.items():
        for k in k_grid:
            if spec.kind == R.DROP_TOKENS:
                drop_lists = []
                for i in range(len(images)):
                    mask = partitions[i].mask_of(top_k(explanations[i], k))
                    drop_lists.append(tokens_covering(mask, token_size))
                logits = model.logits_batch_dropped(images, drop_lists)
            else:
                batch = np.stack(
                    [
                        R.apply_approximation(images[i], partitions[i].mask_of(top_k(explanations[i], k)), spec, image_index=i)
                        for i in range(len(images))
                    ]
                )
                logits = model.logits_batch(batch)
            preds = np.argmax(logits, axis=1)
            rows.append(ResultRow(experiment_id, name, None, k, spec.label(), "keep_fraction", keep_fraction(original, preds), len(images)))
    return rows
