"""Token dropping in the ViT: remove image regions by deleting their tokens
from the forward pass, and confirm the padded/masked batch path agrees with
the compact one."""

import numpy as np

from misskit import tensor as T
from misskit.models import ViTClassifier, ViTConfig, drop_tokens, tokens_covering

model = ViTClassifier(ViTConfig(), seed=7)
image = np.random.default_rng(1).random((3, 64, 64)).astype(np.float32)

tokens = model.tokenize(image)
print(f"full token set: {len(tokens.kept_indices)} tokens (8x8 grid of 8px patches)")

# remove a pixel rectangle; any token its footprint touches is dropped
removed = np.zeros((64, 64), dtype=bool)
removed[0:20, 0:12] = True
print(f"conservative cover of a 20x12 rectangle: tokens {tokens_covering(removed, 8).tolist()}")

reduced = drop_tokens(tokens, removed, token_size=8)
print(f"after dropping: {len(reduced.kept_indices)} tokens remain")

compact = model.forward_tokens(reduced, "compact").data
padded = model.forward_tokens(reduced, "padded").data
print(f"compact vs padded-with-dummies max |diff|: {np.abs(compact - padded).max():.2e}")

# ragged batches: one masked forward for many different drop sets
drops = [[], [0, 1, 8, 9], list(range(32)), list(range(63))]
logits = model.logits_dropped_batch(image, drops)
for d, row in zip(drops, logits):
    print(f"dropped {len(d):2d} tokens -> argmax {int(np.argmax(row))}")
