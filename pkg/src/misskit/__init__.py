"""Missingness toolkit: pixel-replacement approximations and ViT token
dropping for image classifiers, plus the attribution and bias measurements
built on them."""

import ctypes as _ctypes
import os as _os
import sys as _sys


def _tune_allocator():
    """Raise glibc's mmap threshold so large numpy scratch buffers are
    reused from the heap instead of being mmap'd and page-faulted on every
    allocation (a 10-20x slowdown in some container kernels). Set
    MISSKIT_NO_MALLOC_TUNING=1 to skip."""
    if _os.environ.get("MISSKIT_NO_MALLOC_TUNING") or not _sys.platform.startswith("linux"):
        return
    try:
        libc = _ctypes.CDLL("libc.so.6")
        libc.mallopt(-3, 1 << 30)  # M_MMAP_THRESHOLD
        libc.mallopt(-1, 1 << 30)  # M_TRIM_THRESHOLD
    except OSError:
        pass


_tune_allocator()

from . import attribution, data, experiments, io, metrics, models, regions, slic, tensor  # noqa: E402
from .attribution import (  # noqa: E402
    Explanation,
    LearnedMaskParams,
    LimeParams,
    learned_mask,
    lime_explain,
    random_explanation,
    ridge_fit,
    top_k,
)
from .data import Dataset, SyntheticDatasetSpec, build_dataset, generate_dataset, load_dataset  # noqa: E402
from .experiments import (  # noqa: E402
    BiasSweepConfig,
    ConfigError,
    ResultRow,
    bias_sweep,
    consistency_test,
    roar_compare,
    topk_ablation,
)
from .metrics import (  # noqa: E402
    PredictionTable,
    Taxonomy,
    class_distribution,
    class_entropy,
    keep_fraction,
    mean_wup_on_errors,
    topk_jaccard,
    wu_palmer,
)
from .models import (  # noqa: E402
    CNNClassifier,
    CNNConfig,
    MissingnessAugment,
    TokenSet,
    TrainingError,
    TrainParams,
    ViTClassifier,
    ViTConfig,
    accuracy,
    cnn_forward,
    drop_tokens,
    saliency_map,
    tokenize,
    tokens_covering,
    train_model,
    vit_forward,
)
from .regions import (  # noqa: E402
    MaskedInput,
    MissingnessSpec,
    Region,
    RegionPartition,
    RemovalOrder,
    SpecError,
    apply_approximation,
    gaussian_blur,
    grid_partition,
    order_regions,
    region_saliency,
    remove_fraction,
)
from .slic import LabelMapError, SlicParams, labelmap_to_partition, rgb_to_lab, slic  # noqa: E402
from .tensor import Adam, DomainError, ShapeError, Tape, Tensor, backward  # noqa: E402

__version__ = "0.1.0"
