"""SLIC superpixel segmentation in CIELAB + position space.

Standard pipeline: convert sRGB to CIELAB (D65), seed roughly k centers on a
regular grid with spacing S = sqrt(H*W/k), nudge each seed to the lowest
gradient pixel of its 3x3 neighborhood, run windowed k-means-style
assignment with distance sqrt(d_lab^2 + (compactness/S)^2 * d_xy^2), then
enforce 4-connectivity by merging undersized components into their largest
adjacent label and relabeling contiguously in scan order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regions import RegionPartition

_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])


@dataclass(frozen=True)
class SlicParams:
    k: int
    compactness: float = 10.0
    iterations: int = 10
    min_size_fraction: float = 0.25

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.compactness <= 0:
            raise ValueError("compactness must be positive")
        if not 0.0 < self.min_size_fraction < 1.0:
            raise ValueError("min_size_fraction must lie in (0, 1)")


def rgb_to_lab(image):
    """(3,H,W) sRGB floats in [0,1] -> (H,W,3) CIELAB (D65 white point)."""
    rgb = np.asarray(image, dtype=np.float64).transpose(1, 2, 0)
    linear = np.where(rgb > 0.04045, ((rgb + 0.055) / 1.055) ** 2.4, rgb / 12.92)
    xyz = linear @ _SRGB_TO_XYZ.T
    t = xyz / _D65_WHITE
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def _grid_layout(h, w, k):
    """Pick (ny, nx) with ny*nx closest to k and near-square cells; ties
    prefer nx >= ny so small k splits along the image width."""
    best = None
    for ny in range(1, k + 1):
        nx = max(1, int(round(k / ny)))
        cell_h, cell_w = h / ny, w / nx
        aspect = max(cell_h, cell_w) / min(cell_h, cell_w)
        key = (abs(ny * nx - k), aspect, ny)
        if best is None or key < best[0]:
            best = (key, ny, nx)
    return best[1], best[2]


def _seed_centers(lab, k):
    h, w = lab.shape[:2]
    s = np.sqrt(h * w / k)
    ny, nx = _grid_layout(h, w, k)
    grad = np.zeros((h, w))
    diff_y = np.zeros((h, w))
    diff_y[1:-1] = ((lab[2:] - lab[:-2]) ** 2).sum(axis=-1)
    diff_x = np.zeros((h, w))
    diff_x[:, 1:-1] = ((lab[:, 2:] - lab[:, :-2]) ** 2).sum(axis=-1)
    grad = diff_y + diff_x
    centers = []
    for i in range(ny):
        for j in range(nx):
            cy = int((i + 0.5) * h / ny)
            cx = int((j + 0.5) * w / nx)
            best, by, bx = np.inf, cy, cx
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    y, x = cy + dy, cx + dx
                    if 0 <= y < h and 0 <= x < w and grad[y, x] < best:
                        best, by, bx = grad[y, x], y, x
            centers.append((by, bx))
    return np.array(centers, dtype=np.float64), s


def _assign(lab, centers_xy, centers_lab, s, compactness):
    h, w = lab.shape[:2]
    dist = np.full((h, w), np.inf)
    labels = np.full((h, w), -1, dtype=np.int32)
    ratio = (compactness / s) ** 2
    yy, xx = np.mgrid[0:h, 0:w]
    win = int(np.ceil(s))
    for ci in range(len(centers_xy)):
        cy, cx = centers_xy[ci]
        y0, y1 = max(0, int(cy) - win), min(h, int(cy) + win + 1)
        x0, x1 = max(0, int(cx) - win), min(w, int(cx) + win + 1)
        patch = lab[y0:y1, x0:x1]
        d_lab = ((patch - centers_lab[ci]) ** 2).sum(axis=-1)
        d_xy = (yy[y0:y1, x0:x1] - cy) ** 2 + (xx[y0:y1, x0:x1] - cx) ** 2
        d = d_lab + ratio * d_xy
        window_dist = dist[y0:y1, x0:x1]
        better = d < window_dist
        window_dist[better] = d[better]
        labels[y0:y1, x0:x1][better] = ci
    if (labels < 0).any():
        # windows missed some pixels (irregular seed layouts): fall back to
        # the nearest center by the full distance
        missing = np.argwhere(labels < 0)
        for y, x in missing:
            d = ((centers_lab - lab[y, x]) ** 2).sum(axis=-1) + ratio * (
                (centers_xy[:, 0] - y) ** 2 + (centers_xy[:, 1] - x) ** 2
            )
            labels[y, x] = int(np.argmin(d))
    return labels


def _components(labels):
    """4-connected components of equal-label pixels; returns (comp map, sizes,
    comp label values) with components numbered in scan order."""
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.int32)
    sizes = []
    values = []
    nid = 0
    for sy in range(h):
        for sx in range(w):
            if comp[sy, sx] >= 0:
                continue
            value = labels[sy, sx]
            stack = [(sy, sx)]
            comp[sy, sx] = nid
            count = 0
            while stack:
                y, x = stack.pop()
                count += 1
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w and comp[ny, nx] < 0 and labels[ny, nx] == value:
                        comp[ny, nx] = nid
                        stack.append((ny, nx))
            sizes.append(count)
            values.append(value)
            nid += 1
    return comp, np.array(sizes), np.array(values)


def _enforce_connectivity(labels, min_size):
    comp, sizes, _ = _components(labels)
    h, w = labels.shape
    n = len(sizes)
    merged_into = np.arange(n)

    def find(c):
        while merged_into[c] != c:
            merged_into[c] = merged_into[merged_into[c]]
            c = merged_into[c]
        return c

    def neighbors_of(c):
        mask = comp == c
        out = set()
        up = mask[1:] & ~mask[:-1]
        out.update(np.unique(comp[:-1][up]))
        down = mask[:-1] & ~mask[1:]
        out.update(np.unique(comp[1:][down]))
        left = mask[:, 1:] & ~mask[:, :-1]
        out.update(np.unique(comp[:, :-1][left]))
        right = mask[:, :-1] & ~mask[:, 1:]
        out.update(np.unique(comp[:, 1:][right]))
        out.discard(c)
        return out

    current_sizes = sizes.astype(np.int64).copy()
    order = np.argsort(sizes, kind="stable")
    for c in order:
        root = find(c)
        if current_sizes[root] >= min_size or n == 1:
            continue
        adjacent = {find(a) for a in neighbors_of(root)}
        adjacent.discard(root)
        if not adjacent:
            continue
        target = max(sorted(adjacent), key=lambda a: (current_sizes[a], -a))
        current_sizes[target] += current_sizes[root]
        merged_into[root] = target
        comp[comp == root] = target
    roots = np.array([find(c) for c in range(n)])
    final = roots[comp]
    # relabel contiguously in scan order of first appearance
    flat = final.reshape(-1)
    _, first_index = np.unique(flat, return_index=True)
    ordered_roots = flat[np.sort(first_index)]
    lut = np.full(n, -1, dtype=np.int32)
    lut[ordered_roots] = np.arange(len(ordered_roots), dtype=np.int32)
    return lut[final]


def slic(image, params):
    """Segment a (3,H,W) float image; returns an (H,W) int32 label map with
    contiguous labels starting at 0, each label 4-connected."""
    image = np.asarray(image)
    h, w = image.shape[1], image.shape[2]
    if params.k > h * w:
        raise ValueError(f"k={params.k} exceeds pixel count {h*w}")
    lab = rgb_to_lab(image)
    centers_xy, s = _seed_centers(lab, params.k)
    centers_lab = lab[centers_xy[:, 0].astype(int), centers_xy[:, 1].astype(int)]
    labels = None
    for _ in range(params.iterations):
        labels = _assign(lab, centers_xy, centers_lab, s, params.compactness)
        for ci in range(len(centers_xy)):
            mask = labels == ci
            if mask.any():
                ys, xs = np.nonzero(mask)
                centers_xy[ci] = (ys.mean(), xs.mean())
                centers_lab[ci] = lab[mask].mean(axis=0)
    min_size = params.min_size_fraction * (h * w / params.k)
    return _enforce_connectivity(labels, min_size)


class LabelMapError(ValueError):
    """Label map violates the contiguous-labels-from-zero contract."""


def labelmap_to_partition(labels):
    """One region per label, ordered by ascending label value."""
    labels = np.asarray(labels, dtype=np.int32)
    values = np.unique(labels)
    if values[0] != 0 or values[-1] != len(values) - 1:
        raise LabelMapError("labels must be contiguous integers starting at 0")
    return RegionPartition("superpixels", labels, int(len(values)))
