"""Projected Polynomial, Gaussian and Cauchy kernels and their W-gradients.

Each kernel compares a feature vector ``x`` (length d) with an attribute
vector ``y`` (length d_attr) through a projection ``W`` of shape (d, d_attr).
Two directions exist:

* ``Direction.PROJECT_X`` evaluates ``k(W.T @ x, y)`` in attribute space,
* ``Direction.PROJECT_Y`` evaluates ``k(x, W @ y)`` in feature space.

The polynomial kernel ``(x.T @ W @ y + c) ** r`` is the same in both.

This module is the readable reference implementation; the batched training
and scoring paths in :mod:`zskl._fast` are checked against it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SpecError

GAUSSIAN = "gaussian"
CAUCHY = "cauchy"
POLYNOMIAL = "polynomial"
FAMILIES = (GAUSSIAN, CAUCHY, POLYNOMIAL)
RBF_FAMILIES = (GAUSSIAN, CAUCHY)


class Direction(enum.Enum):
    PROJECT_X = "x"
    PROJECT_Y = "y"


@dataclass(frozen=True)
class KernelSpec:
    family: str
    sigma: float = 1.0
    degree: int = 2
    bias: float = 0.0

    def __post_init__(self):
        fam = str(self.family).lower()
        if fam not in FAMILIES:
            raise SpecError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if fam == POLYNOMIAL:
            deg = self.degree
            if isinstance(deg, float) and deg.is_integer():
                deg = int(deg)
            if isinstance(deg, bool) or not isinstance(deg, (int, np.integer)) or deg < 1:
                raise SpecError(f"polynomial degree must be a positive integer, got {self.degree!r}")
            object.__setattr__(self, "degree", int(deg))
            if not self.bias >= 0:
                raise SpecError("polynomial bias must be >= 0")
            object.__setattr__(self, "bias", float(self.bias))
        else:
            if not self.sigma > 0 or not math.isfinite(self.sigma):
                raise SpecError("kernel radius sigma must be positive and finite")
            object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def is_rbf(self) -> bool:
        return self.family in RBF_FAMILIES

    def to_json(self) -> dict:
        if self.family == POLYNOMIAL:
            return {"family": self.family, "degree": self.degree, "bias": self.bias}
        return {"family": self.family, "sigma": self.sigma}

    @classmethod
    def from_json(cls, obj: dict) -> "KernelSpec":
        fam = obj.get("family")
        if fam == POLYNOMIAL:
            return cls(fam, degree=obj.get("degree", 2), bias=obj.get("bias", 0.0))
        return cls(fam, sigma=obj.get("sigma", 1.0))


@dataclass(frozen=True)
class Transform:
    """Map applied to a kernel value before it enters a loss.

    ``linear`` with ``sign`` -1/+1 gives ``-k`` / ``k``; ``squared`` gives
    ``(1 - k) ** 2`` in ``within`` mode and ``k ** 2`` in ``between`` mode.
    """

    kind: str
    sign: int = 1
    mode: Optional[str] = None

    def __post_init__(self):
        if self.kind == "linear":
            if self.sign not in (-1, 1):
                raise SpecError("linear transform sign must be +1 or -1")
        elif self.kind == "squared":
            if self.mode not in ("within", "between"):
                raise SpecError("squared transform mode must be 'within' or 'between'")
        else:
            raise SpecError(f"unknown transform {self.kind!r}")


NEG_LINEAR = Transform("linear", sign=-1)
POS_LINEAR = Transform("linear", sign=1)
SQ_WITHIN = Transform("squared", mode="within")
SQ_BETWEEN = Transform("squared", mode="between")


def ipow(base: float, n: int) -> float:
    """``base ** n`` for a non-negative integer n by repeated multiplication."""
    out = 1.0
    for _ in range(n):
        out *= base
    return out


def _check(W, x, y):
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if W.ndim != 2 or x.shape != (W.shape[0],) or y.shape != (W.shape[1],):
        raise SpecError(f"shape mismatch: W {W.shape}, x {x.shape}, y {y.shape}")
    return W, x, y


def _residual(W, x, y, direction):
    if direction is Direction.PROJECT_X:
        return W.T @ x - y
    return x - W @ y


def _rbf_of_sqdist(spec: KernelSpec, s: float) -> float:
    if spec.family == GAUSSIAN:
        return math.exp(-s / (2.0 * spec.sigma ** 2))
    return 1.0 / (1.0 + spec.sigma * s)


def kernel_value(spec: KernelSpec, W, x, y, direction: Direction = Direction.PROJECT_X) -> float:
    W, x, y = _check(W, x, y)
    if spec.family == POLYNOMIAL:
        return ipow(float(x @ W @ y) + spec.bias, spec.degree)
    z = _residual(W, x, y, direction)
    return _rbf_of_sqdist(spec, float(z @ z))


def kernel_grad_w(spec: KernelSpec, W, x, y, direction: Direction = Direction.PROJECT_X) -> np.ndarray:
    """Analytic derivative of :func:`kernel_value` with respect to ``W``."""
    W, x, y = _check(W, x, y)
    if spec.family == POLYNOMIAL:
        base = float(x @ W @ y) + spec.bias
        return spec.degree * ipow(base, spec.degree - 1) * np.outer(x, y)
    z = _residual(W, x, y, direction)
    s = float(z @ z)
    k = _rbf_of_sqdist(spec, s)
    # dk/ds
    if spec.family == GAUSSIAN:
        dk = -k / (2.0 * spec.sigma ** 2)
    else:
        dk = -spec.sigma * k * k
    # ds/dW: 2 x z^T for W^T x - y, and -2 z y^T for x - W y
    if direction is Direction.PROJECT_X:
        return 2.0 * dk * np.outer(x, z)
    return -2.0 * dk * np.outer(z, y)


def transform_value(t: Transform, k: float) -> float:
    if t.kind == "linear":
        return t.sign * k
    if t.mode == "within":
        return (1.0 - k) ** 2
    return k * k


def transform_slope(t: Transform, k: float) -> float:
    if t.kind == "linear":
        return float(t.sign)
    if t.mode == "within":
        return -2.0 * (1.0 - k)
    return 2.0 * k


def transformed_value_grad(spec: KernelSpec, W, x, y, direction: Direction, t: Transform):
    """Value and W-gradient of ``t(k(x, y; W))``."""
    if t.kind == "squared" and not spec.is_rbf:
        raise SpecError("squared transforms need a kernel bounded in [0, 1] (gaussian or cauchy)")
    k = kernel_value(spec, W, x, y, direction)
    g = kernel_grad_w(spec, W, x, y, direction)
    return transform_value(t, k), transform_slope(t, k) * g


def gram_matrix(spec: KernelSpec, W, X, Y, direction: Direction = Direction.PROJECT_X) -> np.ndarray:
    """Kernel values between the columns of ``X`` (d x M) and ``Y`` (d_attr x P)."""
    W = np.asarray(W, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if W.ndim != 2 or X.ndim != 2 or Y.ndim != 2 or X.shape[0] != W.shape[0] or Y.shape[0] != W.shape[1]:
        raise SpecError(f"shape mismatch: W {W.shape}, X {X.shape}, Y {Y.shape}")
    if spec.family == POLYNOMIAL:
        base = X.T @ W @ Y + spec.bias
        out = np.ones_like(base)
        for _ in range(spec.degree):
            out *= base
        return out
    if direction is Direction.PROJECT_X:
        P, Q = W.T @ X, Y
    else:
        P, Q = X, W @ Y
    diff = P[:, :, None] - Q[:, None, :]
    s = np.einsum("kij,kij->ij", diff, diff)
    if spec.family == GAUSSIAN:
        return np.exp(-s / (2.0 * spec.sigma ** 2))
    return 1.0 / (1.0 + spec.sigma * s)


def base_gram(spec: KernelSpec, Z) -> np.ndarray:
    """Gram matrix of the base kernel on the columns of ``Z`` (no projection)."""
    Z = np.asarray(Z, dtype=np.float64)
    eye = np.eye(Z.shape[0])
    return gram_matrix(spec, eye, Z, Z, Direction.PROJECT_X)
