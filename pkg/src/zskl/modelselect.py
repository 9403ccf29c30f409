"""Grid-search cross-validation with validation classes standing in for unseen ones."""

from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SpecError, TrainingError, ZsklError
from .evaluation import evaluate_standard
from .kernels import POLYNOMIAL, KernelSpec
from .objective import ObjectiveSpec
from .optimizer import TrainConfig, train

PARAM_KEYS = ("sigma", "lambda", "bias", "degree", "alpha")


@dataclass(frozen=True)
class HyperGrid:
    sigma_values: tuple = (0.2, 0.4, 0.6, 0.8, 1.0, 1.4, 2.0)
    lambda_values: tuple = (0.1, 0.3, 0.8, 1.0, 2.0, 5.0, 10.0)
    bias_values: tuple = (0.25, 0.5, 1.0, 2.0, 4.0)
    degree_values: tuple = (2, 4, 6)
    alpha_values: tuple = (1.0,)

    def __post_init__(self):
        for name in ("sigma_values", "lambda_values", "bias_values", "degree_values", "alpha_values"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if any(s <= 0 for s in self.sigma_values):
            raise SpecError("sigma values must be > 0")
        if any(v < 0 for v in self.lambda_values + self.bias_values + self.alpha_values):
            raise SpecError("lambda, bias and alpha values must be >= 0")

    def points(self, variant: str) -> list:
        """Grid points for ``variant`` in a fixed enumeration order."""
        if variant == "poly":
            need = {"degree_values": self.degree_values, "bias_values": self.bias_values,
                    "lambda_values": self.lambda_values, "alpha_values": self.alpha_values}
        else:
            need = {"sigma_values": self.sigma_values, "lambda_values": self.lambda_values}
        empty = [k for k, v in need.items() if not v]
        if empty:
            raise SpecError(f"grid lists required for variant {variant!r} are empty: {empty}")
        if variant == "poly":
            return [{"degree": int(r), "bias": float(c), "lambda": float(l), "alpha": float(a)}
                    for r, c, l, a in itertools.product(self.degree_values, self.bias_values,
                                                        self.lambda_values, self.alpha_values)]
        return [{"sigma": float(s), "lambda": float(l)}
                for s, l in itertools.product(self.sigma_values, self.lambda_values)]

    def to_json(self) -> dict:
        return {"sigma": list(self.sigma_values), "lambda": list(self.lambda_values),
                "bias": list(self.bias_values), "degree": list(self.degree_values),
                "alpha": list(self.alpha_values)}

    @classmethod
    def from_json(cls, obj: dict) -> "HyperGrid":
        default = cls()
        return cls(
            sigma_values=obj.get("sigma", default.sigma_values),
            lambda_values=obj.get("lambda", default.lambda_values),
            bias_values=obj.get("bias", default.bias_values),
            degree_values=obj.get("degree", default.degree_values),
            alpha_values=obj.get("alpha", default.alpha_values),
        )


@dataclass
class CvResult:
    table: list
    best: dict
    variant: str
    family: str
    rule: str = ("maximise val top1_mean; ties -> larger sigma (or bias), "
                 "then smaller lambda, then grid order")
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"variant": self.variant, "family": self.family, "rule": self.rule,
                "best": self.best, "table": self.table, **self.extra}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(PARAM_KEYS) + ["val_top1", "final_probe_objective"])
            for row in self.table:
                p = row["params"]
                w.writerow([p.get(k, "") for k in PARAM_KEYS]
                           + [repr(row["val_top1"]), repr(row["final_probe_objective"])])


def objective_for(variant: str, family: str, params: dict, transform_style=None) -> ObjectiveSpec:
    if family == POLYNOMIAL:
        kernel = KernelSpec(POLYNOMIAL, degree=params.get("degree", 2), bias=params.get("bias", 0.0))
    else:
        kernel = KernelSpec(family, sigma=params["sigma"])
    return ObjectiveSpec(variant, kernel, lam=params["lambda"], alpha=params.get("alpha", 0.0),
                         transform_style=transform_style)


def _tie_key(i, row):
    p = row["params"]
    smooth = p.get("sigma", p.get("bias", 0.0))
    return (-row["val_top1"], -smooth, p["lambda"], i)


def grid_search(ds, part, variant: str, family: str, grid: HyperGrid = HyperGrid(),
                cfg: TrainConfig = TrainConfig(), threads: int = 1, transform_style=None) -> CvResult:
    """Train on ``part.train`` for every grid point and score on the val classes.

    ``ds`` must already be preprocessed.  Every point reuses ``cfg.seed``.
    """
    if len(part.val) == 0:
        raise SpecError("grid search needs validation samples")
    points = grid.points(variant)

    def run(params):
        ospec = objective_for(variant, family, params, transform_style)
        try:
            model, _ = train(ds, part.train, ospec, cfg)
            report = evaluate_standard(model, ds, part.val)
        except ZsklError as exc:
            raise TrainingError(f"grid point {params}: {exc}") from exc
        return {"params": params, "val_top1": report.top1_mean,
                "final_probe_objective": model.train_meta["final_probe_objective"]}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            table = list(pool.map(run, points))
    else:
        table = [run(p) for p in points]
    best_i = min(range(len(table)), key=lambda i: _tie_key(i, table[i]))
    return CvResult(table=table, best=dict(table[best_i]["params"]), variant=variant, family=family)


def refit_best(ds, part, variant: str, family: str, best: dict, cfg: TrainConfig = TrainConfig(),
               stats=None, include_val: bool = True, transform_style=None):
    """Retrain with the selected hyperparameters on train (plus val) samples."""
    samples = part.train
    if include_val and len(part.val):
        samples = np.sort(np.concatenate([part.train, part.val]))
    ospec = objective_for(variant, family, best, transform_style)
    model, _ = train(ds, samples, ospec, cfg, stats=stats)
    return model
