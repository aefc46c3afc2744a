import os

import numpy as np
import pytest

from misskit import io as mio
from misskit import tensor as T
from misskit.data import SyntheticDatasetSpec, build_dataset
from misskit.models import TrainParams, train_model

# bump when the training recipe or dataset generator changes behavior
RECIPE_VERSION = 1

CACHE_DIR = os.path.join(os.path.dirname(__file__), ".cache")

DATASET_SPEC = SyntheticDatasetSpec(n_train=2000, n_test=1000, seed=0)


@pytest.fixture(scope="session")
def toy_dataset():
    return build_dataset(DATASET_SPEC)


def trained_model(config, dataset, hp=None, augment=None, tag=""):
    """Train (or load the byte-identical cached copy of) a model; training is
    deterministic, so the cache is an exact stand-in for a fresh run. The
    wall-clock training time rides along in a sidecar for the runtime
    criteria."""
    import time

    hp = hp or TrainParams.default_for(config)
    arch = type(config).__name__
    key = f"{arch}-v{RECIPE_VERSION}-s{hp.seed}-e{hp.epochs}-lr{hp.lr}-n{DATASET_SPEC.n_train}"
    if augment:
        key += f"-aug{augment.fraction}"
    if tag:
        key += f"-{tag}"
    path = os.path.join(CACHE_DIR, key + ".mlab")
    if os.path.exists(path):
        return mio.load_model(path)
    t0 = time.time()
    model = train_model(config, dataset, hp, augment=augment)
    elapsed = time.time() - t0
    os.makedirs(CACHE_DIR, exist_ok=True)
    mio.save_model(path, model)
    with open(path + ".seconds", "w") as f:
        f.write(f"{elapsed:.3f}\n")
    return model


def trained_model_seconds(config, hp=None, augment=None, tag=""):
    hp = hp or TrainParams.default_for(config)
    arch = type(config).__name__
    key = f"{arch}-v{RECIPE_VERSION}-s{hp.seed}-e{hp.epochs}-lr{hp.lr}-n{DATASET_SPEC.n_train}"
    if augment:
        key += f"-aug{augment.fraction}"
    if tag:
        key += f"-{tag}"
    path = os.path.join(CACHE_DIR, key + ".mlab.seconds")
    with open(path) as f:
        return float(f.read().strip())


def gradcheck(fn, params, step=1e-4, tol=1e-5):
    """Compare analytic gradients of fn(params) -> scalar against central
    finite differences, elementwise, with relative error |a-n|/max(1,|a|,|n|).

    Parameters must be float64 tensors; fn must be deterministic.
    """
    for p in params:
        assert p.dtype == np.float64, "gradient checks run in double mode"
        p.grad = None
    loss = fn(params)
    T.backward(loss)
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = fn(params).item()
            flat[i] = orig - step
            fm = fn(params).item()
            flat[i] = orig
            num = (fp - fm) / (2.0 * step)
            rel = abs(aflat[i] - num) / max(1.0, abs(aflat[i]), abs(num))
            worst = max(worst, rel)
            assert rel <= tol, f"gradient mismatch at {i}: analytic {aflat[i]}, numeric {num}, rel {rel}"
    return worst


def rand_t(rng, shape, scale=1.0, requires_grad=True):
    return T.Tensor(rng.standard_normal(shape) * scale, requires_grad=requires_grad)
