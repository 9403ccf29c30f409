"""Zero-shot kernel learning through kernel polarization with weak incoherence."""

from .data import (
    Dataset,
    Partition,
    PreprocessStats,
    SplitSpec,
    apply_split,
    generate_synthetic,
    load_dataset,
    prepare,
    preprocess,
    replicate_attributes,
    save_dataset,
)
from .evaluation import (
    EvalReport,
    classify,
    evaluate_generalized,
    evaluate_standard,
    harmonic_mean,
    incoherence,
    per_class_top1,
)
from .kernels import Direction, KernelSpec, Transform, gram_matrix, kernel_grad_w, kernel_value
from .objective import ObjectiveSpec, build_label_kernel, full_objective, sample_loss_grad
from .optimizer import Projection, TrainConfig, TrainTrace, init_w, lr_at, rmsprop_step, train

__version__ = "0.1.0"
