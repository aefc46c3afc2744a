"""Seed derivation shared by every randomized component.

All random streams are numpy Generators keyed by an integer tuple through
SeedSequence, so per-image work is independent of scheduling order.
"""

from __future__ import annotations

import numpy as np


def derive_rng(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]))


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]).generate_state(1)[0])
