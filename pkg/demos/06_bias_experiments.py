"""The full bias story end to end on freshly trained toy models: class
entropy and keep-fraction under increasing removal, the retrain comparison,
LIME consistency across baseline colors, and the top-k ablation test.

Trains a small CNN and ViT from scratch (several minutes on CPU); writes CSV
tables and SVG plots next to this script.
"""

import os
import time

import numpy as np

from misskit.attribution import LimeParams, lime_explain, random_explanation
from misskit.data import SyntheticDatasetSpec, build_dataset
from misskit.experiments import BiasSweepConfig, bias_sweep, consistency_test, roar_compare, topk_ablation
from misskit.io import emit_csv, emit_svg_lineplot
from misskit.models import CNNConfig, MissingnessAugment, TrainParams, ViTConfig, accuracy, train_model
from misskit.regions import MissingnessSpec, RemovalOrder, grid_partition
from misskit.util import derive_seed

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

print("building dataset and training four models (this is the slow part)...")
ds = build_dataset(SyntheticDatasetSpec(n_train=1500, n_test=400, seed=0))
t0 = time.time()
cnn = train_model(CNNConfig(), ds, TrainParams(epochs=10, lr=2e-3))
vit = train_model(ViTConfig(), ds, TrainParams(epochs=36, lr=1e-3))
cnn_re = train_model(CNNConfig(), ds, TrainParams(epochs=10, lr=2e-3), augment=MissingnessAugment(0.5))
vit_re = train_model(ViTConfig(), ds, TrainParams(epochs=36, lr=1e-3), augment=MissingnessAugment(0.5))
print(f"trained in {time.time()-t0:.0f}s; test acc: cnn {accuracy(cnn, ds.test_images, ds.test_labels):.3f}, "
      f"vit {accuracy(vit, ds.test_images, ds.test_labels):.3f}")

images = ds.test_images[:300]
part = grid_partition(64, 64, 8, 8)
orders = (RemovalOrder("random", seed=1),)
fractions = tuple(np.round(np.arange(0.0, 1.0, 0.1), 1))

# 1. bias sweep: blacked-out CNN vs token-dropping ViT
cnn_rows = bias_sweep(cnn, images, part, BiasSweepConfig(orders, fractions, MissingnessSpec.black(), seed=5, experiment_id="sweep/cnn"), ds.taxonomy)
vit_rows = bias_sweep(vit, images, part, BiasSweepConfig(orders, fractions, MissingnessSpec.drop_tokens(), seed=5, experiment_id="sweep/vit"), ds.taxonomy)
emit_csv(cnn_rows + vit_rows, os.path.join(OUT, "bias_sweep.csv"))


def curve(rows, metric):
    return sorted((r.fraction, r.value) for r in rows if r.metric == metric)


emit_svg_lineplot(
    {"cnn/black keep": curve(cnn_rows, "keep_fraction"), "vit/drop keep": curve(vit_rows, "keep_fraction")},
    os.path.join(OUT, "keep_fraction.svg"), xlabel="fraction removed", ylabel="keep fraction",
)
emit_svg_lineplot(
    {"cnn/black entropy": curve(cnn_rows, "class_entropy"), "vit/drop entropy": curve(vit_rows, "class_entropy")},
    os.path.join(OUT, "class_entropy.svg"), xlabel="fraction removed", ylabel="entropy (nats)",
)
k5 = dict(curve(cnn_rows, "keep_fraction"))[0.5], dict(curve(vit_rows, "keep_fraction"))[0.5]
print(f"keep fraction at 50% removal: cnn/black {k5[0]:.3f} vs vit/drop {k5[1]:.3f}")

# 2. retrain comparison
roar_fracs = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
_, _, cnn_gap = roar_compare(cnn, cnn_re, images, part, BiasSweepConfig(orders, roar_fracs, MissingnessSpec.black(), seed=6, experiment_id="roar/cnn"), ds.taxonomy)
_, _, vit_gap = roar_compare(vit, vit_re, images, part, BiasSweepConfig(orders, roar_fracs, MissingnessSpec.drop_tokens(), seed=6, experiment_id="roar/vit"), ds.taxonomy)
emit_csv(cnn_gap + vit_gap, os.path.join(OUT, "roar_gaps.csv"))
print(f"mean |keep gap| standard-vs-retrained: cnn {np.mean([r.value for r in cnn_gap]):.3f}, vit {np.mean([r.value for r in vit_gap]):.3f}")

# 3. LIME consistency across the 8 corner baseline colors (64 test images)
small = images[:64]
params = LimeParams(n_perturbations=150, seed=7)
k_grid = [1, 2, 4, 8, 16, 32]
vit_cons = consistency_test(vit, small, part, k_grid, params, mode="drop_tokens", experiment_id="consistency/vit")
cnn_cons = consistency_test(cnn, small, part, k_grid, params, mode="pixel", experiment_id="consistency/cnn")
emit_csv(vit_cons + cnn_cons, os.path.join(OUT, "consistency.csv"))


def mean_curve(rows, label):
    return sorted((r.k, r.value) for r in rows if r.order == label)


emit_svg_lineplot(
    {
        "vit drop-tokens": mean_curve(vit_cons, "mean_pairs"),
        "cnn colors": mean_curve(cnn_cons, "mean_pairs"),
        "random": mean_curve(cnn_cons, "random-random"),
    },
    os.path.join(OUT, "consistency.svg"), xlabel="k", ylabel="mean pairwise jaccard",
)
cnn_at8 = dict(mean_curve(cnn_cons, "mean_pairs"))[8]
print(f"consistency: vit pairwise jaccard is identically 1.0; cnn mean at k=8 is {cnn_at8:.3f}")

# 4. top-k ablation: own LIME vs random explanations on the ViT
own = [lime_explain(vit, img, part, MissingnessSpec.drop_tokens(), params, image_index=i) for i, img in enumerate(small)]
rand = [random_explanation(part, derive_seed(7, i, 3)) for i in range(len(small))]
rows = topk_ablation(vit, small, {"own_lime": own, "random": rand}, [0, 4, 8, 16, 32], MissingnessSpec.drop_tokens(), part)
emit_csv(rows, os.path.join(OUT, "topk_ablation.csv"))
emit_svg_lineplot(
    {
        "own lime": sorted((r.k, r.value) for r in rows if r.order == "own_lime"),
        "random": sorted((r.k, r.value) for r in rows if r.order == "random"),
    },
    os.path.join(OUT, "topk_ablation.svg"), xlabel="k removed", ylabel="keep fraction",
)
by = {(r.order, r.k): r.value for r in rows}
print(f"top-k ablation on vit at k=16: own lime keeps {by[('own_lime', 16)]:.3f}, random keeps {by[('random', 16)]:.3f}")
print(f"tables and plots in {OUT}")
