"""Kernel-score classification, per-class accuracy, harmonic mean and incoherence."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _fast
from .errors import DataError, SpecError
from .kernels import KernelSpec

STANDARD = "standard"
GENERALIZED = "generalized"


@dataclass
class EvalReport:
    per_class_acc: dict
    top1_mean: float
    incoherence: float
    protocol: str = STANDARD
    acc_seen: Optional[float] = None
    acc_unseen: Optional[float] = None
    harmonic_h: Optional[float] = None

    def __post_init__(self):
        if (self.harmonic_h is None) != (self.acc_seen is None or self.acc_unseen is None):
            raise ValueError("harmonic_h is defined exactly when both seen and unseen accuracies are")

    def to_json(self) -> dict:
        return {
            "protocol": self.protocol,
            "per_class_acc": {str(c): float(a) for c, a in sorted(self.per_class_acc.items())},
            "top1_mean": float(self.top1_mean),
            "acc_seen": self.acc_seen,
            "acc_unseen": self.acc_unseen,
            "harmonic_h": self.harmonic_h,
            "incoherence": float(self.incoherence),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["key", "value"])
            for c, a in sorted(self.per_class_acc.items()):
                w.writerow([f"class_{c}", repr(float(a))])
            summary = [("TOP1_MEAN", self.top1_mean), ("ACC_SEEN", self.acc_seen),
                       ("ACC_UNSEEN", self.acc_unseen), ("H", self.harmonic_h),
                       ("INCOHERENCE", self.incoherence)]
            for key, val in summary:
                w.writerow([key, "" if val is None else repr(float(val))])


def score_candidates(kernel: KernelSpec, variant: str, W, X, candidates) -> np.ndarray:
    """Scores (M, P) of the M columns of ``X`` against the P columns of ``candidates``.

    RBF kernels add both projection directions; the polynomial kernel is the
    same in both directions so it contributes ``2 k``.
    """
    W = np.asarray(W, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    candidates = np.asarray(candidates, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if candidates.ndim == 1:
        candidates = candidates[:, None]
    if X.shape[0] != W.shape[0] or candidates.shape[0] != W.shape[1]:
        raise SpecError(f"shape mismatch: W {W.shape}, X {X.shape}, candidates {candidates.shape}")
    return _fast.score_matrix(W, X.T, candidates.T, _fast.family_code(kernel.family),
                              kernel.sigma, kernel.degree, kernel.bias, kernel.is_rbf)


def predict(kernel: KernelSpec, variant: str, W, X, candidates, class_ids) -> np.ndarray:
    """Predicted class id for every column of ``X``; ties go to the smallest id."""
    class_ids = np.asarray(class_ids, dtype=np.int64)
    candidates = np.asarray(candidates, dtype=np.float64)
    if candidates.ndim != 2 or candidates.shape[1] != class_ids.size or class_ids.size == 0:
        raise SpecError("need one candidate column per class id and at least one candidate")
    order = np.argsort(class_ids, kind="stable")
    S = score_candidates(kernel, variant, W, X, candidates[:, order])
    return class_ids[order][np.argmax(S, axis=1)]


def classify(kernel: KernelSpec, variant: str, W, x, candidates, class_ids) -> int:
    return int(predict(kernel, variant, W, np.asarray(x, dtype=np.float64)[:, None],
                       candidates, class_ids)[0])


def per_class_top1(predictions: Sequence[int], truths: Sequence[int], weighted: bool = False):
    """Per-class accuracies and their unweighted mean.

    With ``weighted=True`` the second value is the plain sample accuracy.
    """
    pred = np.asarray(predictions)
    truth = np.asarray(truths)
    if truth.size == 0:
        raise DataError("cannot score an empty prediction set")
    if pred.shape != truth.shape:
        raise DataError("predictions and truths must have the same length")
    per_class = {}
    for c in np.unique(truth):
        mask = truth == c
        per_class[int(c)] = float(np.mean(pred[mask] == c))
    if weighted:
        return per_class, float(np.mean(pred == truth))
    return per_class, float(np.mean(list(per_class.values())))


def harmonic_mean(acc_s: float, acc_u: float) -> float:
    if acc_s < 0 or acc_u < 0:
        raise ValueError("accuracies must be non-negative")
    if acc_s == 0 or acc_u == 0:
        return 0.0
    return 2.0 * acc_s * acc_u / (acc_s + acc_u)


def normalized_gram(W) -> np.ndarray:
    """``W_hat.T @ W_hat`` where W_hat has unit-norm columns."""
    W = np.asarray(W, dtype=np.float64)
    norms = np.linalg.norm(W, axis=0)
    if np.any(norms == 0):
        raise DataError("W has a zero column; incoherence is undefined")
    Wn = W / norms
    return Wn.T @ Wn


def incoherence(W) -> float:
    """``||W_hat.T W_hat - I||_F^2`` over column-normalised W; 0 for orthogonal columns."""
    G = normalized_gram(W)
    R = G - np.eye(G.shape[0])
    return float(np.sum(R * R))


def _model_predict(model, ds, samples, candidate_classes):
    samples = np.asarray(samples, dtype=np.int64)
    if samples.size == 0:
        raise DataError("empty test set")
    cls = np.asarray(sorted(int(c) for c in candidate_classes), dtype=np.int64)
    cand = ds.attributes[:, cls - 1]
    pred = predict(model.kernel, model.objective.variant, model.W, ds.features[:, samples], cand, cls)
    return pred, ds.labels[samples]


def evaluate_standard(model, ds, test_samples, candidate_classes=None) -> EvalReport:
    """Classify ``test_samples`` of the preprocessed ``ds`` among unseen classes only."""
    if candidate_classes is None:
        candidate_classes = np.unique(ds.labels[np.asarray(test_samples, dtype=np.int64)])
    pred, truth = _model_predict(model, ds, test_samples, candidate_classes)
    per_class, mean = per_class_top1(pred, truth)
    return EvalReport(per_class_acc=per_class, top1_mean=mean, incoherence=incoherence(model.W),
                      protocol=STANDARD)


def evaluate_generalized(model, ds, seen_test, unseen_test, candidate_classes) -> EvalReport:
    """Seen and unseen test samples scored against the full candidate set."""
    if len(seen_test) == 0 or len(unseen_test) == 0:
        raise DataError("generalized protocol needs non-empty seen and unseen test sets")
    pred_s, truth_s = _model_predict(model, ds, seen_test, candidate_classes)
    pred_u, truth_u = _model_predict(model, ds, unseen_test, candidate_classes)
    per_s, acc_s = per_class_top1(pred_s, truth_s)
    per_u, acc_u = per_class_top1(pred_u, truth_u)
    per_class = {**per_s, **per_u}
    return EvalReport(
        per_class_acc=per_class,
        top1_mean=float(np.mean(list(per_class.values()))),
        incoherence=incoherence(model.W),
        protocol=GENERALIZED,
        acc_seen=acc_s,
        acc_unseen=acc_u,
        harmonic_h=harmonic_mean(acc_s, acc_u),
    )
