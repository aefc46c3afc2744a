"""Synthetic shape/color dataset with a class taxonomy.

Eight classes: four shape families (square, triangle, circle, ring) times
two color variants (red, blue), drawn on a noisy mid-gray background. The
taxonomy groups shapes into angular/round superclasses with the color
variants as leaves, so taxonomy similarity of two confused labels is high
for color confusions of one shape and low across superclasses.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .metrics import Taxonomy
from .util import derive_rng

DEFAULT_CLASSES = (
    ("square_red", "square", "red"),
    ("square_blue", "square", "blue"),
    ("triangle_red", "triangle", "red"),
    ("triangle_blue", "triangle", "blue"),
    ("circle_red", "circle", "red"),
    ("circle_blue", "circle", "blue"),
    ("ring_red", "ring", "red"),
    ("ring_blue", "ring", "blue"),
)

DEFAULT_TAXONOMY_TREE = {
    "name": "shape",
    "children": [
        {
            "name": "angular",
            "children": [
                {"name": "square", "children": [{"name": "square_red"}, {"name": "square_blue"}]},
                {"name": "triangle", "children": [{"name": "triangle_red"}, {"name": "triangle_blue"}]},
            ],
        },
        {
            "name": "round",
            "children": [
                {"name": "circle", "children": [{"name": "circle_red"}, {"name": "circle_blue"}]},
                {"name": "ring", "children": [{"name": "ring_red"}, {"name": "ring_blue"}]},
            ],
        },
    ],
}

COLOR_BASES = {"red": (0.85, 0.18, 0.18), "blue": (0.18, 0.30, 0.85)}


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    image_size: int = 64
    n_train: int = 2000
    n_test: int = 1000
    seed: int = 0
    classes: tuple = DEFAULT_CLASSES

    def __post_init__(self):
        if self.n_train < 0 or self.n_test < 0:
            raise ValueError("split sizes must be non-negative")


@dataclass
class Dataset:
    train_images: np.ndarray  # (N,3,S,S) float32 in [0,1]
    train_labels: np.ndarray
    test_images: np.ndarray
    test_labels: np.ndarray
    taxonomy: Taxonomy
    channel_means: np.ndarray  # training-split per-channel mean, for MeanColor
    class_names: list = field(default_factory=list)


def _shape_mask(kind, size, cy, cx, half, rng):
    """(fill, outline) masks. Square and triangle carry a dark outline band,
    giving every shape family a signature readable inside an 8px patch:
    outline band (angular family), bare curved edge (circle), interior hole
    (ring). Keeps shape classes separable from partial views."""
    yy, xx = np.mgrid[0:size, 0:size]
    dy, dx = yy - cy, xx - cx
    band = 2.5
    if kind == "square":
        fill = (np.abs(dy) <= half) & (np.abs(dx) <= half)
        inner = (np.abs(dy) <= half - band) & (np.abs(dx) <= half - band)
        return fill, fill & ~inner
    if kind == "triangle":
        fill = (dy >= -half) & (dy <= half) & (np.abs(dx) <= (dy + half) / 2.0)
        inner = (dy >= -half + 1.8 * band) & (dy <= half - band) & (np.abs(dx) <= (dy + half - 1.8 * band) / 2.0)
        return fill, fill & ~inner
    if kind == "circle":
        return dy * dy + dx * dx <= half * half, None
    if kind == "ring":
        rr = dy * dy + dx * dx
        return (rr <= half * half) & (rr >= (0.52 * half) ** 2), None
    raise ValueError(f"unknown shape kind {kind!r}")


def render_image(spec, split_id, index, label):
    """Deterministically render one example; the stream is keyed by
    (seed, split, index) so splits are disjoint and order-independent."""
    rng = derive_rng(spec.seed, split_id, index)
    size = spec.image_size
    base = rng.uniform(0.38, 0.62)
    img = np.full((3, size, size), base, dtype=np.float64)
    img += rng.uniform(-0.05, 0.05, size=(3, size, size))
    _, shape_kind, color_family = spec.classes[label]
    half = rng.uniform(size * 0.24, size * 0.36)
    margin = int(half) + 2
    cy = rng.uniform(margin, size - 1 - margin)
    cx = rng.uniform(margin, size - 1 - margin)
    fill, outline = _shape_mask(shape_kind, size, cy, cx, half, rng)
    color = np.asarray(COLOR_BASES[color_family]) + rng.uniform(-0.06, 0.06, size=3)
    img[:, fill] = color[:, None] + rng.uniform(-0.02, 0.02, size=(3, int(fill.sum())))
    if outline is not None:
        img[:, outline] = color[:, None] * 0.25
    quantized = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    return quantized


def _render_split(spec, split_id, count):
    n_classes = len(spec.classes)
    images = np.zeros((count, 3, spec.image_size, spec.image_size), dtype=np.uint8)
    labels = np.zeros(count, dtype=np.int64)
    for i in range(count):
        labels[i] = i % n_classes
        images[i] = render_image(spec, split_id, i, labels[i])
    return images, labels


def build_dataset(spec=SyntheticDatasetSpec()):
    """Render the dataset in memory (floats in [0,1], 8-bit quantized)."""
    train_u8, train_labels = _render_split(spec, 1, spec.n_train)
    test_u8, test_labels = _render_split(spec, 2, spec.n_test)
    train = train_u8.astype(np.float32) / 255.0
    test = test_u8.astype(np.float32) / 255.0
    if spec.n_train:
        # per-image means accumulated in float64, matching the on-disk path
        means = (train_u8.astype(np.float64) / 255.0).mean(axis=(2, 3)).mean(axis=0)
    else:
        means = np.full(3, 0.5, dtype=np.float64)
    tax = Taxonomy.from_tree(DEFAULT_TAXONOMY_TREE)
    return Dataset(train, train_labels, test, test_labels, tax, means.astype(np.float64), [c[0] for c in spec.classes])


def generate_dataset(spec, out_dir):
    """Write the dataset to disk: P6 images, JSON manifest/taxonomy, and the
    training-split channel means. Byte-identical for identical specs."""
    from . import io as mio

    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "image_size": spec.image_size,
        "seed": spec.seed,
        "classes": [list(c) for c in spec.classes],
        "train": [],
        "test": [],
    }
    sums = np.zeros(3, dtype=np.float64)
    count = 0
    for split_name, split_id, n in (("train", 1, spec.n_train), ("test", 2, spec.n_test)):
        os.makedirs(os.path.join(out_dir, split_name), exist_ok=True)
        for i in range(n):
            label = i % len(spec.classes)
            img = render_image(spec, split_id, i, label)
            rel = f"{split_name}/{i:05d}.ppm"
            mio.write_ppm(os.path.join(out_dir, rel), img)
            manifest[split_name].append({"file": rel, "label": int(label)})
            if split_name == "train":
                sums += (img.astype(np.float64) / 255.0).mean(axis=(1, 2))
                count += 1
    means = (sums / count) if count else np.full(3, 0.5)
    manifest["channel_means"] = [float(m) for m in means]
    mio.write_json(os.path.join(out_dir, "manifest.json"), manifest)
    mio.write_json(os.path.join(out_dir, "taxonomy.json"), DEFAULT_TAXONOMY_TREE)
    return out_dir


def load_dataset(path):
    from . import io as mio

    manifest = mio.read_json(os.path.join(path, "manifest.json"))
    tax = Taxonomy.from_tree(mio.read_json(os.path.join(path, "taxonomy.json")))

    def load_split(entries):
        if not entries:
            size = manifest["image_size"]
            return np.zeros((0, 3, size, size), dtype=np.float32), np.zeros(0, dtype=np.int64)
        imgs = np.stack([mio.read_ppm(os.path.join(path, e["file"])) for e in entries])
        labels = np.array([e["label"] for e in entries], dtype=np.int64)
        return imgs.astype(np.float32) / 255.0, labels

    train_images, train_labels = load_split(manifest["train"])
    test_images, test_labels = load_split(manifest["test"])
    means = np.asarray(manifest["channel_means"], dtype=np.float64)
    names = [c[0] for c in manifest["classes"]]
    return Dataset(train_images, train_labels, test_images, test_labels, tax, means, names)
