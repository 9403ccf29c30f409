"""Minibatch SGD with RMSprop preconditioning for the projection matrix W."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _fast
from .data import Dataset, PreprocessStats
from .errors import DataError, SpecError, TrainingError
from .kernels import KernelSpec
from .objective import NegativeSampler, ObjectiveSpec

INITS = ("gauss", "lsq")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 10
    gamma: float = 0.99
    epochs: int = 10
    beta0: float = 0.01
    decay: float = 1e-4
    epsilon: float = 1e-8
    seed: int = 0
    init: str = "gauss"
    trace_every: int = 50
    probe_size: int = 200
    true_class_counts: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise SpecError("batch_size must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise SpecError("gamma must lie in (0, 1)")
        if self.epochs < 0:
            raise SpecError("epochs must be >= 0")
        if not self.beta0 > 0:
            raise SpecError("beta0 must be > 0")
        if not self.decay >= 0:
            raise SpecError("decay must be >= 0")
        if not self.epsilon > 0:
            raise SpecError("epsilon must be > 0")
        if self.init not in INITS:
            raise SpecError(f"init must be one of {INITS}")
        if self.trace_every < 1:
            raise SpecError("trace_every must be >= 1")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    epoch: int
    batch_objective: float
    probe_objective: Optional[float] = None
    val_acc: Optional[float] = None


@dataclass
class TrainTrace:
    rows: list = field(default_factory=list)
    epoch_objective: list = field(default_factory=list)
    epoch_val_acc: list = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        if self.rows and row.iteration <= self.rows[-1].iteration:
            raise ValueError("trace iterations must be strictly increasing")
        self.rows.append(row)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "epoch", "batch_objective", "probe_objective", "val_acc"])
            for r in self.rows:
                w.writerow([r.iteration, r.epoch, repr(r.batch_objective),
                            "" if r.probe_objective is None else repr(r.probe_objective),
                            "" if r.val_acc is None else repr(r.val_acc)])


@dataclass
class Projection:
    W: np.ndarray
    kernel: KernelSpec
    objective: ObjectiveSpec
    preprocess: Optional[PreprocessStats] = None
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim != 2 or not np.all(np.isfinite(self.W)):
            raise TrainingError("projection matrix must be a finite 2-D array")

    def to_json(self) -> dict:
        out = {
            "w": {"rows": int(self.W.shape[0]), "cols": int(self.W.shape[1]),
                  "data": [float(v) for v in self.W.ravel(order="C")]},
            "kernel": self.kernel.to_json(),
            "objective": self.objective.summary(),
        }
        if self.preprocess is not None:
            out["preprocess"] = {
                "feature_mean": [float(v) for v in self.preprocess.feature_mean],
                "attribute_norms": [float(v) for v in self.preprocess.attribute_norms],
            }
            if self.preprocess.attribute_mean is not None:
                out["preprocess"]["attribute_mean"] = [float(v) for v in self.preprocess.attribute_mean]
        out["train_meta"] = self.train_meta
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Projection":
        try:
            w = obj["w"]
            W = np.asarray(w["data"], dtype=np.float64).reshape(int(w["rows"]), int(w["cols"]))
            kernel = KernelSpec.from_json(obj["kernel"])
            o = obj["objective"]
            ospec = ObjectiveSpec(variant=o["variant"], kernel=kernel, lam=o["lambda"],
                                  alpha=o.get("alpha", 0.0), transform_style=o.get("transform"))
            stats = None
            if "preprocess" in obj:
                p = obj["preprocess"]
                mean = np.asarray(p["feature_mean"], dtype=np.float64)
                norms = np.asarray(p.get("attribute_norms", [1.0]), dtype=np.float64)
                amean = p.get("attribute_mean")
                stats = PreprocessStats(feature_mean=mean, attribute_norms=norms,
                                        attribute_mean=None if amean is None else np.asarray(amean, dtype=np.float64))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"corrupt model description: {exc!r}") from exc
        return cls(W=W, kernel=kernel, objective=ospec, preprocess=stats,
                   train_meta=obj.get("train_meta", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Projection":
        try:
            obj = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise DataError(f"model file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"corrupt model file {path}: {exc}") from exc
        return cls.from_json(obj)


def lr_at(t: int, beta0: float, decay: float) -> float:
    """Inverse-time decay ``beta0 / (1 + decay * t)``."""
    return beta0 / (1.0 + decay * t)


def rmsprop_step(W, A, g_bar, sq_bar, beta_t, gamma, epsilon):
    """One RMSprop update; the accumulator is refreshed before the step.

    ``sq_bar`` is the batch mean of the *per-sample* squared gradients.
    Returns the new ``(W, A)``.
    """
    for name, arr in (("W", W), ("A", A), ("g_bar", g_bar), ("sq_bar", sq_bar)):
        if not np.all(np.isfinite(arr)):
            raise TrainingError(f"non-finite values in {name}")
    A_new = gamma * A + (1.0 - gamma) * sq_bar
    W_new = W - beta_t * g_bar / np.sqrt(A_new + epsilon)
    return W_new, A_new


def init_w(d: int, d_attr: int, init: str = "gauss", seed: int = 0, X=None, Y=None,
           ridge: float = 1e-6) -> np.ndarray:
    """Initial projection.

    ``gauss`` draws i.i.d. N(0, 1/d) entries.  ``lsq`` solves the ridge
    regularised normal equations of ``min ||W.T X - Y||_F``.
    """
    if init == "gauss":
        rng = np.random.default_rng(seed)
        return rng.normal(0.0, 1.0 / math.sqrt(d), size=(d, d_attr))
    if init != "lsq":
        raise SpecError(f"unknown init {init!r}")
    if X is None or Y is None:
        raise SpecError("least-squares init needs X and Y")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    M = X @ X.T + ridge * np.eye(d)
    try:
        W = np.linalg.solve(M, X @ Y.T)
    except np.linalg.LinAlgError as exc:
        raise TrainingError(f"least-squares init failed: {exc}") from exc
    if not np.all(np.isfinite(W)) or np.linalg.cond(M) > 1.0 / np.finfo(float).eps:
        raise TrainingError("least-squares init: system singular beyond the ridge tolerance")
    return W


class _Problem:
    """Training samples packed for the batch kernel."""

    def __init__(self, ds: Dataset, samples, ospec: ObjectiveSpec, cfg: TrainConfig):
        self.samples = np.asarray(samples, dtype=np.int64)
        if self.samples.size == 0:
            raise DataError("training partition is empty")
        self.Xr = np.ascontiguousarray(ds.features[:, self.samples].T)
        self.labels = ds.labels[self.samples]
        self.A = np.ascontiguousarray(ds.attributes.T)
        self.class_ids = sorted(set(self.labels.tolist()))
        if len(self.class_ids) < 2:
            raise DataError("training needs samples from at least two classes")
        self.sampler = NegativeSampler(self.labels, self.class_ids)
        n = self.samples.size
        if cfg.true_class_counts:
            counts = {c: self.sampler.members[c].size for c in self.class_ids}
            self.npc = np.array([counts[l] for l in self.labels], dtype=np.float64)
        else:
            self.npc = np.full(n, n / len(self.class_ids))
        self.share = 1.0 / n if ospec.variant == "poly" else 0.0
        k = ospec.kernel
        self.kargs = dict(fam=_fast.family_code(k.family), sigma=k.sigma, degree=k.degree,
                          bias=k.bias, two_dir=ospec.both_directions,
                          squared=ospec.transform_style == "squared", lam=ospec.lam,
                          share=self.share, alpha=ospec.alpha)

    def negatives(self, local_idx, rng) -> np.ndarray:
        rows = []
        for i in local_idx:
            drawn = self.sampler.draw(int(self.labels[i]), rng)
            rows.append(self.labels[drawn] - 1)
        return np.asarray(rows, dtype=np.int64).reshape(len(local_idx), -1)

    def fixed_negatives(self, local_idx) -> np.ndarray:
        rows = [[c - 1 for c in self.sampler.others(int(self.labels[i]))] for i in local_idx]
        return np.asarray(rows, dtype=np.int64).reshape(len(local_idx), -1)

    def batch(self, W, local_idx, neg):
        return _fast.batch_loss_grad(W, self.Xr[local_idx], self.A, self.labels[local_idx] - 1,
                                     neg, self.npc[local_idx], **self.kargs)


class _Validator:
    def __init__(self, ds: Dataset, samples, ospec: ObjectiveSpec):
        from .evaluation import score_candidates

        self._score = score_candidates
        samples = np.asarray(samples, dtype=np.int64)
        self.X = ds.features[:, samples]
        self.truth = ds.labels[samples]
        self.class_ids = sorted(set(self.truth.tolist()))
        self.cand = ds.attributes[:, np.asarray(self.class_ids) - 1]
        self.ospec = ospec

    def accuracy(self, W) -> float:
        from .evaluation import per_class_top1

        S = self._score(self.ospec.kernel, self.ospec.variant, W, self.X, self.cand)
        pred = np.asarray(self.class_ids)[np.argmax(S, axis=1)]
        return per_class_top1(pred, self.truth)[1]


def train(ds: Dataset, samples, ospec: ObjectiveSpec, cfg: TrainConfig = TrainConfig(),
          probe_samples=None, stats: Optional[PreprocessStats] = None):
    """Fit W on the (preprocessed) samples ``samples`` of ``ds``.

    ``probe_samples`` optionally names validation samples whose per-class
    accuracy is tracked in the trace.  Returns ``(Projection, TrainTrace)``.
    """
    prob = _Problem(ds, samples, ospec, cfg)
    n = prob.samples.size
    if cfg.init == "lsq":
        Y = ds.attributes[:, prob.labels - 1]
        W = init_w(ds.dim, ds.attr_dim, "lsq", cfg.seed, X=prob.Xr.T, Y=Y)
    else:
        W = init_w(ds.dim, ds.attr_dim, "gauss", cfg.seed)
    rng = np.random.default_rng((cfg.seed, 1))

    probe_idx = np.sort(np.random.default_rng((cfg.seed, 2)).permutation(n)[:cfg.probe_size])
    probe_neg = prob.fixed_negatives(probe_idx)

    def probe_objective(W_):
        vals, _, _ = prob.batch(W_, probe_idx, probe_neg)
        return float(np.mean(vals))

    validator = _Validator(ds, probe_samples, ospec) if probe_samples is not None and len(probe_samples) else None
    initial_probe = probe_objective(W)
    initial_val = validator.accuracy(W) if validator else None

    A = np.zeros_like(W)
    trace = TrainTrace()
    t = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        batch_vals = []
        for start in range(0, n, cfg.batch_size):
            local = order[start:start + cfg.batch_size]
            neg = prob.negatives(local, rng)
            vals, gsum, sqsum = prob.batch(W, local, neg)
            if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(gsum))):
                raise TrainingError(f"non-finite loss at iteration {t + 1}", iteration=t + 1)
            B = local.size
            W, A = rmsprop_step(W, A, gsum / B, sqsum / B, lr_at(t, cfg.beta0, cfg.decay),
                                cfg.gamma, cfg.epsilon)
            t += 1
            obj = float(np.mean(vals))
            batch_vals.append(obj)
            last_in_epoch = start + cfg.batch_size >= n
            if t % cfg.trace_every == 0 or last_in_epoch:
                trace.append(TraceRow(
                    iteration=t, epoch=epoch, batch_objective=obj,
                    probe_objective=probe_objective(W),
                    val_acc=validator.accuracy(W) if validator else None,
                ))
        trace.epoch_objective.append(float(np.mean(batch_vals)))
        if validator:
            trace.epoch_val_acc.append(trace.rows[-1].val_acc)
        if not np.all(np.isfinite(W)):
            raise TrainingError(f"non-finite projection after epoch {epoch}", iteration=t)

    meta = {
        "config": asdict(cfg),
        "n_train": int(n),
        "train_classes": prob.class_ids,
        "iterations": t,
        "initial_probe_objective": initial_probe,
        "final_probe_objective": probe_objective(W),
        "initial_val_acc": initial_val,
        "final_val_acc": validator.accuracy(W) if validator else None,
        "epoch_objective": list(trace.epoch_objective),
    }
    model = Projection(W=W, kernel=ospec.kernel, objective=ospec, preprocess=stats, train_meta=meta)
    return model, trace
