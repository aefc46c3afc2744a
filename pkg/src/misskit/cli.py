"""Command-line surface. Every subcommand reads a JSON config file, applies
flag overrides (repeatable --set key=value plus --seed), runs, and exits 0 on
success or nonzero with a one-line diagnostic.

Subcommands: gen-data, train, bias-sweep, lime, learned-mask, ablate,
consistency, roar, slic.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import experiments as X
from . import io as mio
from . import regions as R
from .attribution import LearnedMaskParams, LimeParams, learned_mask, lime_explain, random_explanation
from .data import SyntheticDatasetSpec, generate_dataset, load_dataset
from .models import CNNConfig, MissingnessAugment, TrainParams, ViTConfig, accuracy, train_model
from .slic import SlicParams, labelmap_to_partition, slic
from .util import derive_seed


def _load_config(args):
    cfg = mio.read_json(args.config) if args.config else {}
    for item in args.set or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _spec_from_record(record, dataset=None):
    kind = record["kind"]
    if kind == R.MEAN_COLOR:
        rgb = record.get("rgb", "dataset_mean")
        if rgb == "dataset_mean":
            if dataset is None:
                raise ValueError("mean_color with dataset_mean needs a dataset")
            rgb = [float(c) for c in dataset.channel_means]
        return R.MissingnessSpec.mean_color(rgb)
    return R.MissingnessSpec(
        kind,
        rgb=tuple(record["rgb"]) if record.get("rgb") else None,
        kernel_size=int(record.get("kernel_size", 21)),
        sigma=float(record.get("sigma", 10.0)),
        seed=int(record.get("seed", 0)),
    )


def _orders_from_names(names, seed):
    return tuple(R.RemovalOrder(name, seed=derive_seed(seed, i)) for i, name in enumerate(names))


def _eval_images(cfg, dataset):
    count = int(cfg.get("eval_count", 200))
    return dataset.test_images[:count]


def _partitions_for(cfg, images):
    record = cfg.get("partition", {"kind": "grid", "cell": 8})
    if record["kind"] == "grid":
        return X.build_partitions(images, "grid", cell=int(record.get("cell", 8)))
    params = SlicParams(
        k=int(record["k"]),
        compactness=float(record.get("compactness", 10.0)),
        iterations=int(record.get("iterations", 10)),
        min_size_fraction=float(record.get("min_size_fraction", 0.25)),
    )
    return X.build_partitions(images, "slic", slic_params=params, min_label_fraction=float(record.get("min_label_fraction", 0.75)))


def cmd_gen_data(cfg):
    spec = SyntheticDatasetSpec(
        image_size=int(cfg.get("image_size", 64)),
        n_train=int(cfg.get("n_train", 2000)),
        n_test=int(cfg.get("n_test", 1000)),
        seed=int(cfg.get("seed", 0)),
    )
    out = generate_dataset(spec, cfg["out_dir"])
    print(f"dataset written to {out}")
    return 0


def cmd_train(cfg):
    dataset = load_dataset(cfg["dataset"])
    num_classes = dataset.taxonomy.num_classes
    if cfg["arch"] == "vit":
        model_cfg = ViTConfig(num_classes=num_classes, **cfg.get("model", {}))
    elif cfg["arch"] == "cnn":
        extra = dict(cfg.get("model", {}))
        if "widths" in extra:
            extra["widths"] = tuple(extra["widths"])
        if "strides" in extra:
            extra["strides"] = tuple(extra["strides"])
        model_cfg = CNNConfig(num_classes=num_classes, **extra)
    else:
        raise ValueError(f"unknown arch {cfg['arch']!r}")
    defaults = TrainParams.default_for(model_cfg)
    hp = TrainParams(
        epochs=int(cfg.get("epochs", defaults.epochs)),
        batch_size=int(cfg.get("batch_size", defaults.batch_size)),
        lr=float(cfg.get("lr", defaults.lr)),
        seed=int(cfg.get("seed", 0)),
    )
    augment = None
    if cfg.get("augment_fraction") is not None:
        augment = MissingnessAugment(float(cfg["augment_fraction"]))
    model = train_model(model_cfg, dataset, hp, augment=augment)
    mio.save_model(cfg["out"], model)
    acc = accuracy(model, dataset.test_images, dataset.test_labels) if len(dataset.test_images) else float("nan")
    print(f"trained {cfg['arch']} ({model.model_id}) test_acc={acc:.4f} -> {cfg['out']}")
    return 0


def cmd_bias_sweep(cfg):
    dataset = load_dataset(cfg["dataset"])
    model = mio.load_model(cfg["model"])
    images = _eval_images(cfg, dataset)
    spec = _spec_from_record(cfg.get("spec", {"kind": "black"}), dataset)
    seed = int(cfg.get("seed", 0))
    sweep = X.BiasSweepConfig(
        orders=_orders_from_names(cfg.get("orders", ["random"]), seed),
        fractions=tuple(cfg.get("fractions", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])),
        spec=spec,
        seed=seed,
        experiment_id=cfg.get("experiment_id", "bias_sweep"),
    )
    partitions, kept = _partitions_for(cfg, images)
    images = images[kept]
    saliency_model = mio.load_model(cfg["saliency_model"]) if cfg.get("saliency_model") else None
    rows = X.bias_sweep(model, images, partitions, sweep, dataset.taxonomy, saliency_model=saliency_model)
    mio.emit_csv(rows, cfg["out_csv"])
    if cfg.get("out_svg"):
        series = {}
        for order in sweep.orders:
            pts = [(r.fraction, r.value) for r in rows if r.metric == "keep_fraction" and r.order == order.kind]
            series[order.kind] = sorted(pts)
        mio.emit_svg_lineplot(series, cfg["out_svg"], title="prediction keep fraction", xlabel="fraction removed", ylabel="keep fraction")
    print(f"bias sweep ({len(rows)} rows) -> {cfg['out_csv']}")
    return 0


def _lime_params(cfg):
    return LimeParams(
        n_perturbations=int(cfg.get("n_perturbations", 1000)),
        ridge_lambda=float(cfg.get("ridge_lambda", 1.0)),
        on_probability=float(cfg.get("on_probability", 0.5)),
        seed=int(cfg.get("seed", 0)),
    )


def cmd_lime(cfg):
    dataset = load_dataset(cfg["dataset"])
    model = mio.load_model(cfg["model"])
    images = _eval_images(cfg, dataset)
    spec = _spec_from_record(cfg.get("spec", {"kind": "black"}), dataset)
    params = _lime_params(cfg)
    partitions, kept = _partitions_for(cfg, images)
    images = images[kept]
    explanations = [lime_explain(model, img, partitions[i], spec, params, image_index=i) for i, img in enumerate(images)]
    mio.save_explanations(cfg["out"], explanations)
    print(f"{len(explanations)} lime explanations -> {cfg['out']}")
    return 0


def cmd_learned_mask(cfg):
    dataset = load_dataset(cfg["dataset"])
    model = mio.load_model(cfg["model"])
    images = _eval_images(cfg, dataset)
    spec = _spec_from_record(cfg.get("spec", {"kind": "black"}), dataset)
    params = LearnedMaskParams(
        lambda1=float(cfg.get("lambda1", 0.01)),
        lambda2=float(cfg.get("lambda2", 0.2)),
        beta=float(cfg.get("beta", 3.0)),
        noise_sigma=float(cfg.get("noise_sigma", 0.2)),
        steps=int(cfg.get("steps", 300)),
        lr=float(cfg.get("lr", 0.1)),
        seed=int(cfg.get("seed", 0)),
    )
    partitions, kept = _partitions_for(cfg, images)
    images = images[kept]
    explanations = [learned_mask(model, img, partitions[i], spec, params) for i, img in enumerate(images)]
    mio.save_explanations(cfg["out"], explanations)
    print(f"{len(explanations)} learned-mask explanations -> {cfg['out']}")
    return 0


def cmd_ablate(cfg):
    dataset = load_dataset(cfg["dataset"])
    model = mio.load_model(cfg["model"])
    images = _eval_images(cfg, dataset)
    spec = _spec_from_record(cfg.get("spec", {"kind": "black"}), dataset)
    partitions, kept = _partitions_for(cfg, images)
    images = images[kept]
    sources = {}
    for name, path in cfg["sources"].items():
        if path == "random":
            seed = int(cfg.get("seed", 0))
            sources[name] = [random_explanation(partitions[i], derive_seed(seed, i, 404)) for i in range(len(images))]
        else:
            sources[name] = mio.load_explanations(path)
    k_grid = [int(k) for k in cfg.get("k_grid", [0, 4, 8, 16, 32])]
    rows = X.topk_ablation(model, images, sources, k_grid, spec, partitions)
    mio.emit_csv(rows, cfg["out_csv"])
    if cfg.get("out_svg"):
        series = {name: sorted((r.k, r.value) for r in rows if r.order == name) for name in sources}
        mio.emit_svg_lineplot(series, cfg["out_svg"], title="top-k ablation", xlabel="k", ylabel="keep fraction")
    print(f"top-k ablation ({len(rows)} rows) -> {cfg['out_csv']}")
    return 0


def cmd_consistency(cfg):
    dataset = load_dataset(cfg["dataset"])
    model = mio.load_model(cfg["model"])
    images = _eval_images(cfg, dataset)
    partitions, kept = _partitions_for(cfg, images)
    images = images[kept]
    params = _lime_params(cfg)
    k_grid = [int(k) for k in cfg.get("k_grid", [1, 2, 4, 8, 16, 32])]
    rows = X.consistency_test(model, images, partitions, k_grid, params, mode=cfg.get("mode", "pixel"))
    mio.emit_csv(rows, cfg["out_csv"])
    print(f"consistency ({len(rows)} rows) -> {cfg['out_csv']}")
    return 0


def cmd_roar(cfg):
    dataset = load_dataset(cfg["dataset"])
    standard = mio.load_model(cfg["standard_model"])
    retrained = mio.load_model(cfg["retrained_model"])
    images = _eval_images(cfg, dataset)
    spec = _spec_from_record(cfg.get("spec", {"kind": "black"}), dataset)
    seed = int(cfg.get("seed", 0))
    sweep = X.BiasSweepConfig(
        orders=_orders_from_names(cfg.get("orders", ["random"]), seed),
        fractions=tuple(cfg.get("fractions", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])),
        spec=spec,
        seed=seed,
        experiment_id=cfg.get("experiment_id", "roar"),
    )
    partitions, kept = _partitions_for(cfg, images)
    images = images[kept]
    saliency_model = mio.load_model(cfg["saliency_model"]) if cfg.get("saliency_model") else None
    rows_std, rows_ret, gap = X.roar_compare(standard, retrained, images, partitions, sweep, dataset.taxonomy, saliency_model=saliency_model)
    mio.emit_csv(rows_std + rows_ret + gap, cfg["out_csv"])
    print(f"roar comparison ({len(rows_std) + len(rows_ret) + len(gap)} rows) -> {cfg['out_csv']}")
    return 0


def cmd_slic(cfg):
    image = mio.read_ppm(cfg["image"]).astype(np.float32) / 255.0
    params = SlicParams(
        k=int(cfg.get("k", 48)),
        compactness=float(cfg.get("compactness", 10.0)),
        iterations=int(cfg.get("iterations", 10)),
        min_size_fraction=float(cfg.get("min_size_fraction", 0.25)),
    )
    labels = slic(image, params)
    count = int(labels.max()) + 1
    if count > 256:
        raise ValueError(f"{count} labels exceed the 256 representable in a P5 graymap")
    mio.write_pgm(cfg["out"], labels.astype(np.uint8))
    part = labelmap_to_partition(labels)
    print(f"slic: {part.num_regions} superpixels -> {cfg['out']}")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "bias-sweep": cmd_bias_sweep,
    "lime": cmd_lime,
    "learned-mask": cmd_learned_mask,
    "ablate": cmd_ablate,
    "consistency": cmd_consistency,
    "roar": cmd_roar,
    "slic": cmd_slic,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="misskit", description="missingness toolkit experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry (JSON value)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](cfg)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"misskit {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
