"""The five pixel-replacement approximations side by side, written out as a
contact sheet of P6 images you can open in any viewer."""

import os

import numpy as np

from misskit.data import SyntheticDatasetSpec, build_dataset
from misskit.io import write_ppm
from misskit.regions import MissingnessSpec, RemovalOrder, grid_partition, order_regions, remove_fraction

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

ds = build_dataset(SyntheticDatasetSpec(n_train=4, n_test=4, seed=7))
image = ds.test_images[1]
partition = grid_partition(64, 64, 8, 8)
ordering = order_regions(partition, RemovalOrder("random", seed=3), image_index=1)

specs = {
    "original": None,
    "black": MissingnessSpec.black(),
    "mean_color": MissingnessSpec.mean_color(ds.channel_means),
    "random_color_per_image": MissingnessSpec.random_color_per_image(seed=5),
    "random_color_per_pixel": MissingnessSpec.random_color_per_pixel(seed=5),
    "blur": MissingnessSpec.blur(kernel_size=21, sigma=10.0),
}

for name, spec in specs.items():
    if spec is None:
        edited = image
    else:
        edited = remove_fraction(image, "cnn", partition, ordering, 0.5, spec, image_index=1).image
    path = os.path.join(OUT, f"approx_{name}.ppm")
    write_ppm(path, np.clip(np.round(edited * 255), 0, 255).astype(np.uint8))
    print(f"{name:24s} -> {path}")

print("\nhalf the grid cells removed in a fixed random order; compare how")
print("each replacement fills the same holes")
