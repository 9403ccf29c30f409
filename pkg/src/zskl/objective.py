"""Polarization objective: label kernel, alignment and per-sample SGD losses.

Three variants are supported:

``ort``
    RBF kernel evaluated in both directions, ``k(W.T x, y) + k(x, W y)``;
    fitting both projections pushes the columns of W towards orthogonality.
``plain``
    RBF kernel in the ``W.T x`` direction only.
``poly``
    Polynomial kernel plus an explicit penalty
    ``alpha * (trace(W.T W) - ||W.T W||_F^2)`` in the maximised objective.

The per-sample losses are *minimised*: within-class terms enter through
``k' = -k`` or ``(1 - k)^2`` and between-class terms through ``k'' = k`` or
``k^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, SpecError
from .kernels import (
    NEG_LINEAR,
    POS_LINEAR,
    SQ_BETWEEN,
    SQ_WITHIN,
    Direction,
    KernelSpec,
    gram_matrix,
    transformed_value_grad,
)

VARIANTS = ("ort", "plain", "poly")


@dataclass(frozen=True)
class ObjectiveSpec:
    variant: str
    kernel: KernelSpec
    lam: float = 1.0
    alpha: float = 0.0
    transform_style: str = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise SpecError(f"unknown objective variant {self.variant!r}")
        if self.variant == "poly":
            if self.kernel.is_rbf:
                raise SpecError("variant 'poly' requires a polynomial kernel")
        elif not self.kernel.is_rbf:
            raise SpecError(f"variant {self.variant!r} requires a gaussian or cauchy kernel")
        if not self.lam >= 0:
            raise SpecError("lambda must be >= 0")
        if not self.alpha >= 0:
            raise SpecError("alpha must be >= 0")
        style = self.transform_style
        if style is None:
            style = "linear" if self.variant == "poly" else "squared"
        if style not in ("squared", "linear"):
            raise SpecError(f"unknown transform style {style!r}")
        if style == "squared" and self.variant == "poly":
            raise SpecError("squared transforms are only defined for RBF variants")
        object.__setattr__(self, "transform_style", style)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def both_directions(self) -> bool:
        return self.variant == "ort"

    @property
    def transforms(self):
        """(within, between) transforms for the per-sample loss."""
        if self.transform_style == "squared":
            return SQ_WITHIN, SQ_BETWEEN
        return NEG_LINEAR, POS_LINEAR

    def summary(self) -> dict:
        return {"variant": self.variant, "lambda": self.lam, "alpha": self.alpha,
                "transform": self.transform_style}


@dataclass(frozen=True)
class LabelKernel:
    matrix: np.ndarray
    lam: float


@dataclass(frozen=True)
class SampleLoss:
    value: float
    grad: np.ndarray


def build_label_kernel(labels, lam: float) -> LabelKernel:
    """``L[i, j] = 1`` for equal labels and ``-lam`` otherwise."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise DataError("labels must be non-empty")
    if lam < 0:
        raise SpecError("lambda must be >= 0")
    same = labels[:, None] == labels[None, :]
    return LabelKernel(matrix=np.where(same, 1.0, -float(lam)), lam=float(lam))


def alignment(K, L) -> float:
    """Frobenius inner product of two equally shaped matrices."""
    K = np.asarray(K, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    if K.shape != L.shape:
        raise SpecError(f"shape mismatch: {K.shape} vs {L.shape}")
    return float(np.sum(K * L))


def penalty_value(W, alpha: float) -> float:
    """``alpha * ||W.T W||_F^2 - alpha * trace(W.T W)`` (the sign used in the minimised loss)."""
    WtW = W.T @ W
    return float(alpha * np.sum(WtW * WtW) - alpha * np.trace(WtW))


def penalty_grad(W, alpha: float) -> np.ndarray:
    return 4.0 * alpha * (W @ (W.T @ W)) - 2.0 * alpha * W


def full_objective(ospec: ObjectiveSpec, W, X, Y, labels) -> float:
    """Maximised alignment objective over all N^2 pairs; O(N^2) diagnostic use only."""
    L = build_label_kernel(labels, ospec.lam).matrix
    K = gram_matrix(ospec.kernel, W, X, Y, Direction.PROJECT_X)
    if ospec.variant == "ort":
        K = K + gram_matrix(ospec.kernel, W, X, Y, Direction.PROJECT_Y)
    value = alignment(K, L)
    if ospec.variant == "poly":
        value -= penalty_value(np.asarray(W, dtype=np.float64), ospec.alpha)
    return value


class NegativeSampler:
    """Draws one sample index per competing class.

    Membership lists are computed once; :meth:`draw` returns the indices in
    ascending class-id order.
    """

    def __init__(self, labels, class_ids: Iterable[int]):
        self.labels = np.asarray(labels)
        self.class_ids = sorted(int(c) for c in class_ids)
        self.members = {}
        for c in self.class_ids:
            idx = np.flatnonzero(self.labels == c)
            if idx.size == 0:
                raise DataError(f"class {c} has no samples to draw negatives from")
            self.members[c] = idx
        self._sizes = np.array([self.members[c].size for c in self.class_ids], dtype=np.int64)

    def others(self, l_i: int) -> list:
        if l_i not in self.members:
            raise DataError(f"class {l_i} is not among the sampled classes")
        return [c for c in self.class_ids if c != l_i]

    def draw(self, l_i: int, rng: np.random.Generator) -> list:
        others = self.others(l_i)
        sizes = np.array([self.members[c].size for c in others], dtype=np.int64)
        if np.all(sizes == 1):
            return [int(self.members[c][0]) for c in others]
        picks = rng.integers(0, sizes) if sizes.size else []
        return [int(self.members[c][p]) for c, p in zip(others, picks)]


def sample_negatives(labels, class_ids, l_i: int, rng: np.random.Generator) -> list:
    """One uniformly drawn sample index for every class in ``class_ids`` other than ``l_i``."""
    return NegativeSampler(labels, class_ids).draw(int(l_i), rng)


def sample_loss_grad(ospec: ObjectiveSpec, W, x, y, negatives: Sequence, n_per_class: float,
                     penalty_share: float = 0.0) -> SampleLoss:
    """Loss ``f_i(W)`` of one sample and its exact gradient.

    ``negatives`` holds the attribute vectors of the drawn competing samples.
    ``penalty_share`` is the fraction of the incoherence penalty charged to
    this sample (1/N spreads it evenly over an epoch); only used by ``poly``.
    """
    W = np.asarray(W, dtype=np.float64)
    t_in, t_out = ospec.transforms
    dirs = [Direction.PROJECT_X]
    if ospec.both_directions:
        dirs.append(Direction.PROJECT_Y)
    value = 0.0
    grad = np.zeros_like(W)
    for direction in dirs:
        v, g = transformed_value_grad(ospec.kernel, W, x, y, direction, t_in)
        value += n_per_class * v
        grad += n_per_class * g
        if ospec.lam == 0.0:
            continue
        for y_j in negatives:
            v, g = transformed_value_grad(ospec.kernel, W, x, y_j, direction, t_out)
            value += ospec.lam * v
            grad += ospec.lam * g
    if ospec.variant == "poly" and penalty_share and ospec.alpha:
        value += penalty_share * penalty_value(W, ospec.alpha)
        grad += penalty_share * penalty_grad(W, ospec.alpha)
    return SampleLoss(value=float(value), grad=grad)


def weak_incoherence_terms(W, X, Y):
    """Both sides of ``(W.T W - I) Y = W.T dX + dY`` with ``dY = W.T X - Y`` and ``dX = W Y - X``."""
    W = np.asarray(W, dtype=np.float64)
    dY = W.T @ X - Y
    dX = W @ Y - X
    lhs = (W.T @ W - np.eye(W.shape[1])) @ Y
    return lhs, W.T @ dX + dY
