"""Bias measurements: class distribution/entropy, prediction keep fraction,
taxonomy (Wu-Palmer) similarity of changed predictions, and top-k Jaccard
agreement between explanations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class Taxonomy:
    """Rooted class tree. Leaves, in depth-first order, carry the class
    indices 0..C-1. Depth counts nodes from the root (depth(root) = 1), the
    convention used by common WordNet Wu-Palmer implementations."""

    def __init__(self, root_name, parent, children):
        self.root = root_name
        self._parent = parent
        self._children = children
        self.leaves = []
        self._collect_leaves(root_name)
        self._depth = {}
        for name in parent:
            self._depth[name] = self._compute_depth(name)
        self.class_index = {name: i for i, name in enumerate(self.leaves)}

    @classmethod
    def from_tree(cls, tree):
        parent = {}
        children = {}

        def walk(node, par):
            name = node["name"]
            if name in parent:
                raise ValueError(f"duplicate node name {name!r}")
            parent[name] = par
            children[name] = [c["name"] for c in node.get("children", [])]
            for c in node.get("children", []):
                walk(c, name)

        walk(tree, None)
        return cls(tree["name"], parent, children)

    def to_tree(self):
        def build(name):
            node = {"name": name}
            if self._children[name]:
                node["children"] = [build(c) for c in self._children[name]]
            return node

        return build(self.root)

    def _collect_leaves(self, name):
        kids = self._children[name]
        if not kids:
            self.leaves.append(name)
        for c in kids:
            self._collect_leaves(c)

    def _compute_depth(self, name):
        d = 1
        while self._parent[name] is not None:
            name = self._parent[name]
            d += 1
        return d

    @property
    def num_classes(self):
        return len(self.leaves)

    def depth(self, name):
        return self._depth[name]

    def _ancestors(self, name):
        chain = [name]
        while self._parent[name] is not None:
            name = self._parent[name]
            chain.append(name)
        return chain

    def lca(self, a, b):
        ancestors_a = set(self._ancestors(a))
        for node in self._ancestors(b):
            if node in ancestors_a:
                return node
        raise ValueError("nodes share no ancestor")  # unreachable in a rooted tree

    def leaf_name(self, class_id):
        if not 0 <= class_id < len(self.leaves):
            raise KeyError(f"unknown class index {class_id}")
        return self.leaves[class_id]


def wu_palmer(taxonomy, a, b):
    """2*depth(lca) / (depth(a) + depth(b)) over leaf class indices."""
    na, nb = taxonomy.leaf_name(a), taxonomy.leaf_name(b)
    lca = taxonomy.lca(na, nb)
    return 2.0 * taxonomy.depth(lca) / (taxonomy.depth(na) + taxonomy.depth(nb))


def class_distribution(preds, num_classes):
    preds = np.asarray(preds)
    if preds.size == 0:
        raise ValueError("empty prediction list")
    counts = np.bincount(preds, minlength=num_classes).astype(np.float64)
    return counts / counts.sum()


def class_entropy(preds, num_classes):
    """Shannon entropy in nats of the empirical predicted-class distribution."""
    p = class_distribution(preds, num_classes)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum() + 0.0)  # + 0.0 normalizes -0.0


@dataclass
class PredictionTable:
    """Original predictions plus the predictions at each configuration."""

    original: np.ndarray
    masked: dict = field(default_factory=dict)  # config key -> (N,) predictions


def keep_fraction(original, masked):
    original = np.asarray(original)
    masked = np.asarray(masked)
    if original.size == 0:
        raise ValueError("empty prediction table")
    return float(np.mean(original == masked))


def mean_wup_on_errors(original, masked, taxonomy):
    """Mean Wu-Palmer similarity of (original, new) over changed predictions.

    Returns (mean, error_count); mean is None when nothing changed.
    """
    original = np.asarray(original)
    masked = np.asarray(masked)
    changed = np.flatnonzero(original != masked)
    if changed.size == 0:
        return None, 0
    sims = [wu_palmer(taxonomy, int(original[i]), int(masked[i])) for i in changed]
    return float(np.mean(sims)), int(changed.size)


def topk_jaccard(e1, e2, k):
    """Jaccard similarity of the two explanations' top-k region sets."""
    from .attribution import top_k

    if e1.partition_desc != e2.partition_desc:
        raise ValueError(f"partition mismatch: {e1.partition_desc} vs {e2.partition_desc}")
    s1, s2 = set(top_k(e1, k)), set(top_k(e2, k))
    union = s1 | s2
    if not union:
        return 1.0
    return len(s1 & s2) / len(union)
