"""Toy vision models: a ViT with native token dropping and a residual CNN.

Both models run on the in-package tensor engine. The ViT operates on token
sets, so image regions can be removed by dropping the corresponding tokens
from the forward pass (remaining tokens keep their positional embeddings);
the CNN needs a dense image and therefore only supports pixel replacement.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .util import derive_rng

ATTN_MASK_VALUE = -1e9


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss); carries the failing step index."""

    def __init__(self, step, message):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class ViTConfig:
    image_size: int = 64
    token_size: int = 8
    embed_dim: int = 64
    num_heads: int = 4
    num_layers: int = 4
    mlp_ratio: int = 2
    num_classes: int = 8

    def __post_init__(self):
        if self.image_size % self.token_size != 0:
            raise ValueError("image_size must be divisible by token_size")
        if self.embed_dim % self.num_heads != 0:
            raise ValueError("embed_dim must be divisible by num_heads")

    @property
    def grid_side(self):
        return self.image_size // self.token_size

    @property
    def grid_tokens(self):
        return self.grid_side * self.grid_side


@dataclass(frozen=True)
class CNNConfig:
    """Residual conv-norm-relu blocks; global average pooling means the head
    aggregates every spatial position, so its receptive field spans the full
    image for any width/stride setting."""

    image_size: int = 64
    widths: tuple = (16, 32, 64, 64)
    strides: tuple = (2, 2, 1, 1)
    num_classes: int = 8

    def __post_init__(self):
        if len(self.widths) != len(self.strides):
            raise ValueError("widths and strides must align")


@dataclass
class TokenSet:
    """Embedded tokens (patch projection + positional embedding) plus the
    grid indices still present. The class token is not a member; the forward
    pass always prepends it."""

    tokens: T.Tensor  # (K, embed_dim)
    kept_indices: np.ndarray  # sorted, strictly increasing grid indices

    def __post_init__(self):
        self.kept_indices = np.asarray(self.kept_indices, dtype=np.int64)
        if len(self.kept_indices) != self.tokens.shape[0]:
            raise ValueError("token count must equal kept index count")


def tokens_covering(removed_mask, token_size):
    """Grid-token indices whose pixel footprint intersects the removed mask.

    Conservative cover: a token is included if any pixel of it is removed.
    """
    mask = np.asarray(removed_mask, dtype=bool)
    h, w = mask.shape
    gh, gw = -(-h // token_size), -(-w // token_size)
    ph, pw = gh * token_size - h, gw * token_size - w
    padded = np.pad(mask, ((0, ph), (0, pw))) if (ph or pw) else mask
    hit = padded.reshape(gh, token_size, gw, token_size).any(axis=(1, 3))
    return np.flatnonzero(hit.reshape(-1))


def drop_tokens(token_set, removed_mask, token_size):
    """Remove every token intersecting the removed pixel mask."""
    dropped = set(tokens_covering(removed_mask, token_size).tolist())
    keep = np.array([i for i, g in enumerate(token_set.kept_indices) if g not in dropped], dtype=np.int64)
    if len(keep) == len(token_set.kept_indices):
        return token_set
    if len(keep) == 0:
        empty = T.Tensor(np.zeros((0, token_set.tokens.shape[1]), dtype=token_set.tokens.dtype))
        return TokenSet(empty, np.zeros(0, dtype=np.int64))
    return TokenSet(T.gather_rows(token_set.tokens, keep), token_set.kept_indices[keep])


def _init_normal(rng, shape, std, dtype):
    return T.Tensor(rng.normal(0.0, std, size=shape).astype(dtype))


class ViTClassifier:
    kind = "vit"

    def __init__(self, config, seed=0, dtype=np.float32, params=None):
        self.config = config
        self.seed = seed
        self.dtype = dtype
        self.params = params if params is not None else self._init_params(seed, dtype)
        self._model_id = None

    def _init_params(self, seed, dtype):
        cfg = self.config
        rng = derive_rng(seed, 101)
        d = cfg.embed_dim
        p = {}
        p["patch.w"] = _init_normal(rng, (3 * cfg.token_size**2, d), 0.02, dtype)
        p["patch.b"] = T.Tensor(np.zeros(d, dtype=dtype))
        p["pos"] = _init_normal(rng, (cfg.grid_tokens, d), 0.02, dtype)
        p["cls"] = _init_normal(rng, (d,), 0.02, dtype)
        hidden = cfg.mlp_ratio * d
        for i in range(cfg.num_layers):
            pre = f"blocks.{i}."
            p[pre + "ln1.g"] = T.Tensor(np.ones(d, dtype=dtype))
            p[pre + "ln1.b"] = T.Tensor(np.zeros(d, dtype=dtype))
            p[pre + "attn.wqkv"] = _init_normal(rng, (d, 3 * d), 0.02, dtype)
            p[pre + "attn.bqkv"] = T.Tensor(np.zeros(3 * d, dtype=dtype))
            p[pre + "attn.wo"] = T.Tensor(np.zeros((d, d), dtype=dtype))
            p[pre + "attn.bo"] = T.Tensor(np.zeros(d, dtype=dtype))
            p[pre + "ln2.g"] = T.Tensor(np.ones(d, dtype=dtype))
            p[pre + "ln2.b"] = T.Tensor(np.zeros(d, dtype=dtype))
            p[pre + "mlp.w1"] = _init_normal(rng, (d, hidden), 0.02, dtype)
            p[pre + "mlp.b1"] = T.Tensor(np.zeros(hidden, dtype=dtype))
            p[pre + "mlp.w2"] = T.Tensor(np.zeros((hidden, d), dtype=dtype))
            p[pre + "mlp.b2"] = T.Tensor(np.zeros(d, dtype=dtype))
        p["head.ln.g"] = T.Tensor(np.ones(d, dtype=dtype))
        p["head.ln.b"] = T.Tensor(np.zeros(d, dtype=dtype))
        p["head.w"] = _init_normal(rng, (d, cfg.num_classes), 0.02, dtype)
        p["head.b"] = T.Tensor(np.zeros(cfg.num_classes, dtype=dtype))
        return p

    @property
    def model_id(self):
        if self._model_id is None:
            crc = 0
            for name in sorted(self.params):
                crc = zlib.crc32(self.params[name].data.tobytes(), crc)
            self._model_id = f"vit-{crc:08x}"
        return self._model_id

    def parameters(self):
        return list(self.params.values())

    def set_trainable(self, flag):
        for t in self.params.values():
            t.requires_grad = flag
        self._model_id = None

    # --- embedding ---

    def _patch_pixels(self, images):
        # (B,3,H,W) -> (B, grid_tokens, 3*ts*ts), row-major grid order
        cfg = self.config
        b = images.shape[0]
        g, ts = cfg.grid_side, cfg.token_size
        x = T.reshape(images, (b, 3, g, ts, g, ts))
        x = T.transpose(x, (0, 2, 4, 1, 3, 5))
        return T.reshape(x, (b, g * g, 3 * ts * ts))

    def embed_images(self, images, kept=None):
        """(B,3,H,W) images -> (B,K,embed_dim) tokens; ``kept`` is (B,K) grid
        indices (full grid when omitted)."""
        p = self.params
        patches = self._patch_pixels(images)
        if kept is not None:
            kept = np.asarray(kept, dtype=np.int64)
            patches = T.gather_tokens(patches, kept)
            pos = T.gather_rows(p["pos"], kept)
        else:
            pos = T.broadcast_to(T.reshape(p["pos"], (1,) + p["pos"].shape), (images.shape[0],) + p["pos"].shape)
        tok = T.add_bias(T.matmul(patches, p["patch.w"]), p["patch.b"])
        return T.add(tok, pos)

    def tokenize(self, image):
        imgs = image if isinstance(image, T.Tensor) else T.Tensor(np.asarray(image, dtype=self.dtype))
        if imgs.shape != (3, self.config.image_size, self.config.image_size):
            raise T.ShapeError(f"expected (3,{self.config.image_size},{self.config.image_size}) image, got {imgs.shape}")
        batched = T.reshape(imgs, (1,) + imgs.shape)
        tokens = T.reshape(self.embed_images(batched), (self.config.grid_tokens, self.config.embed_dim))
        return TokenSet(tokens, np.arange(self.config.grid_tokens))

    # --- transformer encoder ---

    def _encode(self, x, key_mask=None):
        """x: (B, K, D) grid tokens; prepends the class token, runs the
        blocks, and reads the head off the class token. ``key_mask`` marks
        real (non-dummy) token columns; the class token column is implicit."""
        p = self.params
        cfg = self.config
        b, k = x.shape[0], x.shape[1]
        d, nh = cfg.embed_dim, cfg.num_heads
        dh = d // nh
        cls = T.broadcast_to(T.reshape(p["cls"], (1, 1, d)), (b, 1, d))
        x = T.concat([cls, x], axis=1)
        t = k + 1
        mask = None
        if key_mask is not None:
            valid = np.concatenate([np.ones((b, 1), dtype=bool), key_mask], axis=1)
            mask = np.where(valid, 0.0, ATTN_MASK_VALUE).astype(self.dtype)[:, None, None, :]
        scale = 1.0 / np.sqrt(dh)
        for i in range(cfg.num_layers):
            pre = f"blocks.{i}."
            h = T.layernorm(x, p[pre + "ln1.g"], p[pre + "ln1.b"])
            qkv = T.add_bias(T.matmul(h, p[pre + "attn.wqkv"]), p[pre + "attn.bqkv"])
            qkv = T.transpose(T.reshape(qkv, (b, t, 3, nh, dh)), (2, 0, 3, 1, 4))
            q, kk, v = qkv[0], qkv[1], qkv[2]  # (B, nh, T, dh)
            scores = T.mul(T.matmul(q, T.transpose(kk, (0, 1, 3, 2))), float(scale))
            if mask is not None:
                scores = T.add_const(scores, mask)
            attn = T.softmax(scores, axis=-1)
            ctx = T.reshape(T.transpose(T.matmul(attn, v), (0, 2, 1, 3)), (b, t, d))
            x = T.add(x, T.add_bias(T.matmul(ctx, p[pre + "attn.wo"]), p[pre + "attn.bo"]))
            h = T.layernorm(x, p[pre + "ln2.g"], p[pre + "ln2.b"])
            h = T.gelu(T.add_bias(T.matmul(h, p[pre + "mlp.w1"]), p[pre + "mlp.b1"]))
            h = T.add_bias(T.matmul(h, p[pre + "mlp.w2"]), p[pre + "mlp.b2"])
            x = T.add(x, h)
        h = T.layernorm(x, p["head.ln.g"], p["head.ln.b"])
        cls_out = h[:, 0, :]
        return T.add_bias(T.matmul(cls_out, p["head.w"]), p["head.b"])

    def forward(self, images):
        """Full-grid forward on a (B,3,H,W) image tensor -> (B,C) logits."""
        return self._encode(self.embed_images(images))

    def forward_tokens(self, token_set, mask_mode="compact"):
        """Forward one TokenSet. ``compact`` feeds only the present tokens;
        ``padded`` pads to the full grid with dummy tokens masked out of
        attention. Both agree within float noise."""
        cfg = self.config
        k = token_set.tokens.shape[0]
        if mask_mode == "compact":
            x = T.reshape(token_set.tokens, (1, k, cfg.embed_dim))
            return self._encode(x)[0]
        if mask_mode != "padded":
            raise ValueError(f"unknown mask_mode {mask_mode!r}")
        total = cfg.grid_tokens
        pad_rows = total - k
        if pad_rows == 0:
            x = T.reshape(token_set.tokens, (1, k, cfg.embed_dim))
            return self._encode(x, key_mask=np.ones((1, k), dtype=bool))[0]
        dummy = T.Tensor(np.zeros((pad_rows, cfg.embed_dim), dtype=self.dtype))
        x = T.reshape(T.concat([token_set.tokens, dummy], axis=0), (1, total, cfg.embed_dim))
        key_mask = np.zeros((1, total), dtype=bool)
        key_mask[0, :k] = True
        return self._encode(x, key_mask=key_mask)[0]

    # --- inference conveniences (plain numpy in/out) ---

    def logits(self, image):
        return self.logits_batch(np.asarray(image, dtype=self.dtype)[None])[0]

    def logits_batch(self, images, chunk=256):
        images = np.asarray(images, dtype=self.dtype)
        outs = []
        for lo in range(0, len(images), chunk):
            outs.append(self.forward(T.Tensor(images[lo : lo + chunk])).data)
        return np.concatenate(outs, axis=0)

    def logits_dropped(self, image, dropped):
        return self.logits_dropped_batch(image, [list(dropped)])[0]

    def logits_dropped_batch(self, image, drop_lists, chunk=256):
        """Logits for one image under many drop sets, batched with dummy
        tokens and attention masking so ragged lengths share one forward."""
        cfg = self.config
        image = np.asarray(image, dtype=self.dtype)
        all_tokens = self.embed_images(T.Tensor(image[None]))
        emb = T.reshape(all_tokens, (cfg.grid_tokens, cfg.embed_dim))
        kept_lists = []
        for dropped in drop_lists:
            removed = np.zeros(cfg.grid_tokens, dtype=bool)
            if len(dropped):
                removed[np.asarray(list(dropped), dtype=np.int64)] = True
            kept_lists.append(np.flatnonzero(~removed))
        outs = []
        for lo in range(0, len(kept_lists), chunk):
            part = kept_lists[lo : lo + chunk]
            b = len(part)
            kmax = max((len(kp) for kp in part), default=0)
            if kmax == 0:
                idx = np.zeros((b, 0), dtype=np.int64)
                mask = np.zeros((b, 0), dtype=bool)
            else:
                idx = np.zeros((b, kmax), dtype=np.int64)
                mask = np.zeros((b, kmax), dtype=bool)
                for r, kp in enumerate(part):
                    idx[r, : len(kp)] = kp
                    mask[r, : len(kp)] = True
            x = T.gather_rows(emb, idx)
            outs.append(self._encode(x, key_mask=mask).data)
        return np.concatenate(outs, axis=0)

    def logits_batch_dropped(self, images, drop_lists, chunk=256):
        """Logits for many images, each with its own tokens to drop; ragged
        kept sets share one padded, attention-masked forward per chunk."""
        cfg = self.config
        images = np.asarray(images, dtype=self.dtype)
        kept_lists = []
        for dropped in drop_lists:
            removed = np.zeros(cfg.grid_tokens, dtype=bool)
            if len(dropped):
                removed[np.asarray(list(dropped), dtype=np.int64)] = True
            kept_lists.append(np.flatnonzero(~removed))
        outs = []
        for lo in range(0, len(images), chunk):
            part = kept_lists[lo : lo + chunk]
            b = len(part)
            kmax = max((len(kp) for kp in part), default=0)
            idx = np.zeros((b, max(kmax, 0)), dtype=np.int64)
            mask = np.zeros((b, max(kmax, 0)), dtype=bool)
            for r, kp in enumerate(part):
                idx[r, : len(kp)] = kp
                mask[r, : len(kp)] = True
            x = self.embed_images(T.Tensor(images[lo : lo + chunk]), kept=idx)
            outs.append(self._encode(x, key_mask=mask).data)
        return np.concatenate(outs, axis=0)

    def astype(self, dtype):
        params = {k: T.Tensor(v.data.astype(dtype)) for k, v in self.params.items()}
        return ViTClassifier(self.config, seed=self.seed, dtype=dtype, params=params)


class CNNClassifier:
    kind = "cnn"

    def __init__(self, config, seed=0, dtype=np.float32, params=None):
        self.config = config
        self.seed = seed
        self.dtype = dtype
        self.params = params if params is not None else self._init_params(seed, dtype)
        self._model_id = None

    def _init_params(self, seed, dtype):
        cfg = self.config
        rng = derive_rng(seed, 202)
        p = {}

        def conv(name, cin, cout, k):
            std = np.sqrt(2.0 / (cin * k * k))
            p[name + ".w"] = _init_normal(rng, (cout, cin, k, k), std, dtype)
            p[name + ".b"] = T.Tensor(np.zeros(cout, dtype=dtype))

        def norm(name, c):
            p[name + ".g"] = T.Tensor(np.ones(c, dtype=dtype))
            p[name + ".b"] = T.Tensor(np.zeros(c, dtype=dtype))

        conv("stem", 3, cfg.widths[0], 3)
        norm("stem.ln", cfg.widths[0])
        cin = cfg.widths[0]
        for i, (w, s) in enumerate(zip(cfg.widths, cfg.strides)):
            pre = f"blocks.{i}"
            if w != cin or s > 1:
                conv(pre + ".trans", cin, w, 3)
                norm(pre + ".trans.ln", w)
            conv(pre + ".conv1", w, w, 3)
            norm(pre + ".ln1", w)
            conv(pre + ".conv2", w, w, 3)
            norm(pre + ".ln2", w)
            cin = w
        p["head.w"] = _init_normal(rng, (cin, cfg.num_classes), 0.02, dtype)
        p["head.b"] = T.Tensor(np.zeros(cfg.num_classes, dtype=dtype))
        return p

    @property
    def model_id(self):
        if self._model_id is None:
            crc = 0
            for name in sorted(self.params):
                crc = zlib.crc32(self.params[name].data.tobytes(), crc)
            self._model_id = f"cnn-{crc:08x}"
        return self._model_id

    def parameters(self):
        return list(self.params.values())

    def set_trainable(self, flag):
        for t in self.params.values():
            t.requires_grad = flag
        self._model_id = None

    def _chan_norm(self, x, name):
        # layernorm across channels at each spatial position
        return T.layernorm(x, self.params[name + ".g"], self.params[name + ".b"], axis=1)

    def forward(self, images):
        p = self.params
        cfg = self.config
        x = T.relu(self._chan_norm(T.conv2d(images, p["stem.w"], p["stem.b"], stride=2, padding=1), "stem.ln"))
        cin = cfg.widths[0]
        for i, (w, s) in enumerate(zip(cfg.widths, cfg.strides)):
            pre = f"blocks.{i}"
            if w != cin or s > 1:
                x = T.relu(self._chan_norm(T.conv2d(x, p[pre + ".trans.w"], p[pre + ".trans.b"], stride=s, padding=1), pre + ".trans.ln"))
            h = T.relu(self._chan_norm(T.conv2d(x, p[pre + ".conv1.w"], p[pre + ".conv1.b"], stride=1, padding=1), pre + ".ln1"))
            h = self._chan_norm(T.conv2d(h, p[pre + ".conv2.w"], p[pre + ".conv2.b"], stride=1, padding=1), pre + ".ln2")
            x = T.relu(T.add(x, h))
            cin = w
        pooled = T.tmean(x, axis=(2, 3))
        return T.add_bias(T.matmul(pooled, p["head.w"]), p["head.b"])

    def logits(self, image):
        return self.logits_batch(np.asarray(image, dtype=self.dtype)[None])[0]

    def logits_batch(self, images, chunk=256):
        images = np.asarray(images, dtype=self.dtype)
        outs = []
        for lo in range(0, len(images), chunk):
            outs.append(self.forward(T.Tensor(images[lo : lo + chunk])).data)
        return np.concatenate(outs, axis=0)

    def astype(self, dtype):
        params = {k: T.Tensor(v.data.astype(dtype)) for k, v in self.params.items()}
        return CNNClassifier(self.config, seed=self.seed, dtype=dtype, params=params)


def tokenize(image, model):
    """Split an image into positionally encoded tokens, one per grid cell."""
    return model.tokenize(image)


def vit_forward(model, token_set, mask_mode="compact"):
    """Class-token logits for a TokenSet, in compact or padded/masked mode."""
    return model.forward_tokens(token_set, mask_mode)


def cnn_forward(model, image):
    """Logits of the CNN on one dense image."""
    return model.logits(image)


def build_model(config, seed=0):
    if isinstance(config, ViTConfig):
        return ViTClassifier(config, seed=seed)
    if isinstance(config, CNNConfig):
        return CNNClassifier(config, seed=seed)
    raise TypeError(f"unknown config type {type(config)!r}")


def saliency_map(model, image):
    """Absolute gradient of the predicted-class logit w.r.t. each pixel,
    reduced over color channels by max. Non-negative, shape (H, W)."""
    return saliency_batch(model, np.asarray(image)[None])[0]


def saliency_batch(model, images):
    images = np.asarray(images, dtype=model.dtype)
    img_t = T.Tensor(images, requires_grad=True)
    logits = model.forward(img_t)
    preds = np.argmax(logits.data, axis=1)
    pick = np.zeros_like(logits.data)
    pick[np.arange(len(preds)), preds] = 1.0
    T.backward(T.tsum(T.mul(logits, T.Tensor(pick))))
    grad = img_t.grad if img_t.grad is not None else np.zeros_like(images)
    return np.abs(grad).max(axis=1)


@dataclass(frozen=True)
class MissingnessAugment:
    """Randomly remove ceil(fraction * grid_tokens) token-grid cells from each
    training image at every step: blacked out for CNNs, dropped for ViTs."""

    fraction: float

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("augment fraction must lie in [0, 1]")


@dataclass(frozen=True)
class TrainParams:
    epochs: int = 12
    batch_size: int = 64
    lr: float = 1e-3
    warmup_steps: int = 100
    cosine_decay: bool = True
    seed: int = 0

    @staticmethod
    def default_for(config):
        if isinstance(config, ViTConfig):
            return TrainParams(epochs=40, batch_size=64, lr=1e-3)
        return TrainParams(epochs=12, batch_size=64, lr=2e-3)


def _black_out_cells(images, cell_ids, grid_side, token_size):
    out = images.copy()
    for b, ids in enumerate(cell_ids):
        for cid in ids:
            r, c = divmod(int(cid), grid_side)
            out[b, :, r * token_size : (r + 1) * token_size, c * token_size : (c + 1) * token_size] = 0.0
    return out


def train_model(config, dataset, hp=None, augment=None, token_size=8):
    """Train a fresh model on (images, labels) arrays; returns the model.

    ``dataset`` is any object with ``train_images`` (N,3,H,W) float arrays in
    [0,1] and ``train_labels``. With ``augment``, every image in every step
    independently loses ceil(fraction*R) uniformly chosen grid cells.
    """
    hp = hp or TrainParams.default_for(config)
    model = build_model(config, seed=hp.seed)
    images = np.asarray(dataset.train_images, dtype=model.dtype)
    labels = np.asarray(dataset.train_labels, dtype=np.int64)
    if len(images) == 0:
        raise ValueError("training dataset is empty")
    if hp.epochs == 0:
        return model
    grid_side = config.image_size // token_size
    grid_tokens = grid_side * grid_side
    n_remove = int(np.ceil(augment.fraction * grid_tokens)) if augment else 0
    model.set_trainable(True)
    opt = T.Adam(model.parameters(), lr=hp.lr)
    shuffle_rng = derive_rng(hp.seed, 11)
    augment_rng = derive_rng(hp.seed, 13)
    steps_per_epoch = int(np.ceil(len(images) / hp.batch_size))
    total_steps = hp.epochs * steps_per_epoch
    step = 0
    for _ in range(hp.epochs):
        order = shuffle_rng.permutation(len(images))
        for lo in range(0, len(images), hp.batch_size):
            if hp.warmup_steps and step < hp.warmup_steps:
                opt.lr = hp.lr * (step + 1) / hp.warmup_steps
            elif hp.cosine_decay:
                progress = (step - hp.warmup_steps) / max(1, total_steps - hp.warmup_steps)
                opt.lr = hp.lr * 0.5 * (1.0 + np.cos(np.pi * progress))
            else:
                opt.lr = hp.lr
            sel = order[lo : lo + hp.batch_size]
            batch, batch_labels = images[sel], labels[sel]
            if n_remove > 0:
                removed = np.stack([augment_rng.choice(grid_tokens, size=n_remove, replace=False) for _ in sel])
                if model.kind == "vit":
                    kept = np.stack([np.setdiff1d(np.arange(grid_tokens), r) for r in removed])
                    tokens = model.embed_images(T.Tensor(batch), kept=kept)
                    logits = model._encode(tokens)
                else:
                    batch = _black_out_cells(batch, removed, grid_side, token_size)
                    logits = model.forward(T.Tensor(batch))
            else:
                logits = model.forward(T.Tensor(batch))
            loss = T.cross_entropy(logits, batch_labels)
            if not np.isfinite(loss.item()):
                model.set_trainable(False)
                raise TrainingError(step, f"non-finite loss {loss.item()}")
            opt.zero_grad()
            T.backward(loss)
            opt.step()
            step += 1
    model.set_trainable(False)
    return model


def accuracy(model, images, labels, chunk=256):
    preds = np.argmax(model.logits_batch(np.asarray(images), chunk=chunk), axis=1)
    return float(np.mean(preds == np.asarray(labels)))
