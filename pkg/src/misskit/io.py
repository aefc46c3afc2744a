"""File formats: P6/P5 pixmaps, the MLAB binary weight format, JSON configs
and taxonomies, CSV result tables, and a minimal SVG line plotter.

Every writer is deterministic: identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

WEIGHT_MAGIC = b"MLAB"
WEIGHT_VERSION = 1


class FormatError(ValueError):
    """Malformed file content."""


class TruncatedFileError(FormatError):
    """File ended before the advertised payload."""


# --- portable pixmaps ---


def write_ppm(path, image):
    """image: (3,H,W) uint8 -> binary P6."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] != 3 or image.dtype != np.uint8:
        raise ValueError("write_ppm expects (3,H,W) uint8")
    h, w = image.shape[1], image.shape[2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(image.transpose(1, 2, 0).tobytes())


def read_ppm(path):
    with open(path, "rb") as f:
        data = f.read()
    magic, rest = _read_token(data, 0)
    if magic != b"P6":
        raise FormatError(f"not a P6 pixmap: magic {magic!r}")
    wtok, rest = _read_token(data, rest)
    htok, rest = _read_token(data, rest)
    mtok, rest = _read_token(data, rest)
    w, h, maxval = int(wtok), int(htok), int(mtok)
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}")
    payload = data[rest : rest + 3 * w * h]
    if len(payload) < 3 * w * h:
        raise TruncatedFileError(f"pixmap payload short: {len(payload)} < {3*w*h}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).transpose(2, 0, 1).copy()


def write_pgm(path, gray):
    """gray: (H,W) uint8 -> binary P5 (used for label-map export)."""
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise ValueError("write_pgm expects (H,W) uint8")
    h, w = gray.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(gray.tobytes())


def read_pgm(path):
    with open(path, "rb") as f:
        data = f.read()
    magic, rest = _read_token(data, 0)
    if magic != b"P5":
        raise FormatError(f"not a P5 graymap: magic {magic!r}")
    wtok, rest = _read_token(data, rest)
    htok, rest = _read_token(data, rest)
    mtok, rest = _read_token(data, rest)
    w, h = int(wtok), int(htok)
    payload = data[rest : rest + w * h]
    if len(payload) < w * h:
        raise TruncatedFileError("graymap payload short")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy()


def _read_token(data, pos):
    while pos < len(data) and data[pos : pos + 1].isspace():
        pos += 1
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise TruncatedFileError("header ended unexpectedly")
    return data[start:pos], pos + 1


# --- MLAB weight files ---


def save_weights(path, named_arrays, meta=None):
    """named_arrays: ordered dict of name -> float32 array. ``meta`` is a
    JSON-able record embedded as the metadata tensor ``__meta__`` (its UTF-8
    bytes stored as float32 values, exact for 0..255)."""
    entries = list(named_arrays.items())
    if meta is not None:
        blob = json.dumps(meta, sort_keys=True).encode()
        entries.append(("__meta__", np.frombuffer(blob, dtype=np.uint8).astype(np.float32)))
    names = [n for n, _ in entries]
    if len(set(names)) != len(names):
        raise ValueError("tensor names must be unique")
    with open(path, "wb") as f:
        f.write(WEIGHT_MAGIC)
        f.write(struct.pack("<I", WEIGHT_VERSION))
        f.write(struct.pack("<I", len(entries)))
        for name, arr in entries:
            arr = np.ascontiguousarray(arr, dtype=np.float32)
            nb = name.encode()
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<I", dim))
            f.write(arr.tobytes())


def load_weights(path):
    """Returns (ordered name->array dict, meta-or-None)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != WEIGHT_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {WEIGHT_MAGIC!r}")
    pos = 4
    (version,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if version != WEIGHT_VERSION:
        raise FormatError(f"unsupported weight format version {version}")
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    arrays = {}
    for _ in range(count):
        if pos + 2 > len(data):
            raise TruncatedFileError("file ended inside tensor header")
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + name_len].decode()
        pos += name_len
        if pos + 1 > len(data):
            raise TruncatedFileError(f"file ended inside header of tensor {name!r}")
        rank = data[pos]
        pos += 1
        if pos + 4 * rank > len(data):
            raise TruncatedFileError(f"file ended inside dims of tensor {name!r}")
        dims = struct.unpack_from(f"<{rank}I", data, pos) if rank else ()
        pos += 4 * rank
        nbytes = 4 * int(np.prod(dims, dtype=np.int64))  # rank 0: one scalar
        payload = data[pos : pos + nbytes]
        if len(payload) < nbytes:
            raise TruncatedFileError(f"payload of tensor {name!r} truncated")
        pos += nbytes
        arrays[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    meta = None
    if "__meta__" in arrays:
        blob = arrays.pop("__meta__").astype(np.uint8).tobytes()
        meta = json.loads(blob.decode())
    return arrays, meta


def save_model(path, model):
    meta = {"arch": model.kind, "config": _config_record(model.config), "seed": model.seed}
    save_weights(path, {k: v.data for k, v in model.params.items()}, meta=meta)


def load_model(path):
    from .models import CNNClassifier, CNNConfig, ViTClassifier, ViTConfig
    from . import tensor as T

    arrays, meta = load_weights(path)
    if meta is None or "arch" not in meta:
        raise FormatError("weight file lacks the model metadata record")
    cfg_rec = meta["config"]
    params = {k: T.Tensor(v) for k, v in arrays.items()}
    if meta["arch"] == "vit":
        cfg = ViTConfig(**cfg_rec)
        return ViTClassifier(cfg, seed=meta.get("seed", 0), params=params)
    if meta["arch"] == "cnn":
        cfg = CNNConfig(
            image_size=cfg_rec["image_size"],
            widths=tuple(cfg_rec["widths"]),
            strides=tuple(cfg_rec["strides"]),
            num_classes=cfg_rec["num_classes"],
        )
        return CNNClassifier(cfg, seed=meta.get("seed", 0), params=params)
    raise FormatError(f"unknown architecture {meta['arch']!r}")


def _config_record(config):
    from dataclasses import asdict

    rec = asdict(config)
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in rec.items()}


# --- JSON helpers ---


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, indent=1)
        f.write("\n")


def read_json(path):
    with open(path) as f:
        return json.load(f)


# --- explanations ---


def explanations_to_records(explanations):
    return [
        {
            "model_id": e.model_id,
            "partition": e.partition_desc,
            "method": e.method,
            "seed": e.seed,
            "target_class": e.target_class,
            "scores": [float(s) for s in e.region_scores],
        }
        for e in explanations
    ]


def records_to_explanations(records):
    from .attribution import Explanation

    return [
        Explanation(
            region_scores=np.asarray(r["scores"], dtype=np.float64),
            model_id=r["model_id"],
            target_class=int(r["target_class"]),
            method=r["method"],
            seed=int(r["seed"]),
            partition_desc=r["partition"],
        )
        for r in records
    ]


def save_explanations(path, explanations):
    write_json(path, explanations_to_records(explanations))


def load_explanations(path):
    return records_to_explanations(read_json(path))


# --- result tables ---

CSV_HEADER = ["experiment", "order", "fraction", "k", "spec", "metric", "value", "n"]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows):
    lines = [",".join(CSV_HEADER)]
    for r in rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (r.experiment, r.order, r.fraction, r.k, r.spec, r.metric, r.value, r.n)
            )
        )
    return "\n".join(lines) + "\n"


def emit_csv(rows, path):
    if not rows:
        raise ValueError("refusing to emit an empty result table")
    with open(path, "w", newline="") as f:
        f.write(rows_to_csv(rows))


# --- SVG line plots ---


def emit_svg_lineplot(series, path, title="", xlabel="", ylabel="", size=(640, 420)):
    """series: ordered dict name -> list of (x, y). One polyline per series,
    with axes and a legend; byte-deterministic."""
    if not series or all(len(pts) == 0 for pts in series.values()):
        raise ValueError("refusing to plot empty series")
    width, height = size
    ml, mr, mt, mb = 60, 140, 30, 45
    pw, ph = width - ml - mr, height - mt - mb
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return ml + pw * (x - x0) / (x1 - x0)

    def py(y):
        return mt + ph * (1.0 - (y - y0) / (y1 - y0))

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{mt+ph}" x2="{ml+pw}" y2="{mt+ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt+ph}" stroke="black"/>',
        f'<text x="{ml+pw/2:.1f}" y="{height-8}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="14" y="{mt+ph/2:.1f}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {mt+ph/2:.1f})">{ylabel}</text>',
        f'<text x="{ml+pw/2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
    ]
    for tick in range(5):
        fx = x0 + (x1 - x0) * tick / 4
        fy = y0 + (y1 - y0) * tick / 4
        parts.append(f'<text x="{px(fx):.1f}" y="{mt+ph+16}" text-anchor="middle" font-size="10">{fx:.2f}</text>')
        parts.append(f'<text x="{ml-6}" y="{py(fy)+3:.1f}" text-anchor="end" font-size="10">{fy:.2f}</text>')
    for i, (name, pts) in enumerate(series.items()):
        color = colors[i % len(colors)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = mt + 14 + 16 * i
        parts.append(f'<line x1="{ml+pw+8}" y1="{ly-4}" x2="{ml+pw+28}" y2="{ly-4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{ml+pw+32}" y="{ly}" font-size="11">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")
