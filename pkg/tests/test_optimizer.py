import json
import math
from dataclasses import replace

import numpy as np
import pytest

from zskl.data import class_split, generate_synthetic, prepare
from zskl.errors import DataError, SpecError, TrainingError
from zskl.kernels import KernelSpec
from zskl.objective import ObjectiveSpec
from zskl.optimizer import (
    Projection,
    TraceRow,
    TrainConfig,
    TrainTrace,
    init_w,
    lr_at,
    rmsprop_step,
    train,
)

ORT = ObjectiveSpec("ort", KernelSpec("gaussian", sigma=0.6), lam=1.0)


# -- schedule and step ------------------------------------------------------------

def test_lr_schedule():
    assert lr_at(0, 0.3, 0.5) == 0.3
    assert all(lr_at(t, 0.02, 0.0) == 0.02 for t in (0, 7, 10000))
    assert lr_at(100, 0.1, 0.01) == pytest.approx(0.05, abs=1e-15)


def test_rmsprop_arithmetic_example():
    W = np.zeros((2, 3))
    g = np.full((2, 3), 2.0)
    W2, A2 = rmsprop_step(W, np.zeros_like(W), g, g * g, 0.5, 0.99, 0.0)
    np.testing.assert_allclose(A2, 0.04, rtol=1e-12)
    np.testing.assert_allclose(W - W2, 10 * 0.5, rtol=1e-12)


def test_rmsprop_zero_gradient(rng):
    W, A = rng.normal(size=(3, 2)), rng.uniform(0, 1, (3, 2))
    W2, A2 = rmsprop_step(W, A, np.zeros_like(W), np.zeros_like(W), 0.1, 0.9, 1e-8)
    np.testing.assert_array_equal(W2, W)
    np.testing.assert_array_equal(A2, 0.9 * A)


def test_rmsprop_accumulator_closed_form(rng):
    g = rng.normal(size=(3, 2))
    gamma = 0.95
    W, A = np.zeros_like(g), np.zeros_like(g)
    for t in range(1, 6):
        W, A = rmsprop_step(W, A, g, g * g, 0.01, gamma, 1e-8)
        np.testing.assert_allclose(A, (1 - gamma ** t) * g * g, rtol=1e-12)


def test_rmsprop_rejects_non_finite():
    W = np.zeros((2, 2))
    bad = np.array([[np.nan, 0], [0, 0]])
    with pytest.raises(TrainingError):
        rmsprop_step(W, W, bad, W, 0.1, 0.9, 1e-8)


def test_config_validation():
    for kw in (dict(batch_size=0), dict(gamma=1.0), dict(epochs=-1), dict(beta0=0.0),
               dict(decay=-1.0), dict(epsilon=0.0), dict(init="zeros"), dict(trace_every=0)):
        with pytest.raises(SpecError):
            TrainConfig(**kw)


# -- init --------------------------------------------------------------------------

def test_init_same_seed_identical():
    np.testing.assert_array_equal(init_w(7, 3, "gauss", 4), init_w(7, 3, "gauss", 4))
    assert not np.array_equal(init_w(7, 3, "gauss", 4), init_w(7, 3, "gauss", 5))


def test_init_gauss_variance():
    W = init_w(400, 50, "gauss", 0)
    assert abs(W.var() - 1 / 400) < 0.2 / 400


def test_init_lsq_recovers_lift(rng):
    G = rng.normal(size=(8, 3))
    X = rng.normal(size=(8, 40))
    Y = G.T @ X
    W = init_w(8, 3, "lsq", X=X, Y=Y)
    assert np.linalg.norm(W.T @ X - Y) < 1e-6
    np.testing.assert_allclose(W, G, atol=1e-6)


def test_init_lsq_needs_data():
    with pytest.raises(SpecError):
        init_w(4, 2, "lsq")


# -- trace ---------------------------------------------------------------------------

def test_trace_iterations_strictly_increase(tmp_path):
    tr = TrainTrace()
    tr.append(TraceRow(1, 1, 0.5))
    with pytest.raises(ValueError):
        tr.append(TraceRow(1, 1, 0.4))
    tr.append(TraceRow(3, 1, 0.25, 0.1, 0.5))
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iteration,epoch,batch_objective,probe_objective,val_acc"
    assert lines[1] == "1,1,0.5,,"
    assert lines[2] == "3,1,0.25,0.1,0.5"


# -- training -------------------------------------------------------------------------

def test_zero_epochs_returns_init(bench0):
    pds, stats, part = bench0
    model, trace = train(pds, part.train, ORT, TrainConfig(epochs=0, seed=3))
    np.testing.assert_array_equal(model.W, init_w(pds.dim, pds.attr_dim, "gauss", 3))
    assert trace.rows == [] and trace.epoch_objective == []


def test_training_deterministic(bench0):
    pds, stats, part = bench0
    cfg = TrainConfig(epochs=2, seed=11)
    a, ta = train(pds, part.train, ORT, cfg, probe_samples=part.val)
    b, tb = train(pds, part.train, ORT, cfg, probe_samples=part.val)
    np.testing.assert_array_equal(a.W, b.W)
    assert ta.rows == tb.rows
    c, _ = train(pds, part.train, ORT, replace(cfg, seed=12))
    assert not np.array_equal(a.W, c.W)


def test_noise_free_objective_decreases():
    ds = generate_synthetic(10, 30, 20, 5, 0.0, 0)
    ds = replace(ds, split=class_split(10, 0.6, 0.2, 0, seen_test_fraction=0.2))
    pds, stats, part = prepare(ds)
    model, trace = train(pds, part.train, ORT, TrainConfig(epochs=10))
    meta = model.train_meta
    assert meta["final_probe_objective"] < meta["initial_probe_objective"] - 1e-3
    ep = trace.epoch_objective
    assert len(ep) == 10
    # smoothed with a 3-epoch moving average
    smooth = np.convolve(ep, np.ones(3) / 3, mode="valid")
    assert np.all(np.diff(smooth) <= 1e-12)


@pytest.mark.slow
def test_epoch_mean_decreases_across_seeds():
    hits = 0
    for seed in range(20):
        ds = generate_synthetic(10, 30, 20, 5, 0.0, seed)
        ds = replace(ds, split=class_split(10, 0.6, 0.2, seed, seen_test_fraction=0.2))
        pds, _, part = prepare(ds)
        _, trace = train(pds, part.train, ORT, TrainConfig(epochs=10, seed=seed))
        hits += trace.epoch_objective[-1] < trace.epoch_objective[0]
    assert hits >= 19


def test_squared_objective_nonnegative_and_finite(bench0):
    pds, _, part = bench0
    model, trace = train(pds, part.train, ORT, TrainConfig(epochs=2, trace_every=1))
    assert len(trace.rows) == 2 * math.ceil(len(part.train) / 10)
    assert all(r.batch_objective >= 0 for r in trace.rows)
    assert all(r.probe_objective >= 0 for r in trace.rows)
    its = [r.iteration for r in trace.rows]
    assert its == sorted(set(its))


def test_accumulator_stays_nonnegative(rng):
    W, A = rng.normal(size=(4, 2)), np.zeros((4, 2))
    for _ in range(50):
        g = rng.normal(size=(4, 2)) * 10
        W, A = rmsprop_step(W, A, g, g * g, 0.01, 0.9, 1e-8)
        assert np.all(A >= 0)


def test_val_accuracy_traced(bench0):
    pds, _, part = bench0
    model, trace = train(pds, part.train, ORT, TrainConfig(epochs=3), probe_samples=part.val)
    assert len(trace.epoch_val_acc) == 3
    assert all(0 <= a <= 1 for a in trace.epoch_val_acc)
    assert model.train_meta["final_val_acc"] == trace.epoch_val_acc[-1]


def test_lsq_init_trains(bench0):
    pds, _, part = bench0
    model, _ = train(pds, part.train, ORT, TrainConfig(epochs=1, init="lsq"))
    assert np.all(np.isfinite(model.W))


def test_poly_variant_trains(bench0):
    pds, _, part = bench0
    o = ObjectiveSpec("poly", KernelSpec("polynomial", degree=2, bias=1.0), lam=0.3, alpha=1.0)
    model, trace = train(pds, part.train, o, TrainConfig(epochs=2))
    assert np.all(np.isfinite(model.W))


def test_non_finite_loss_reports_iteration(bench0):
    pds, _, part = bench0
    # features of magnitude 1e60 overflow a sixth-power kernel on the first batch
    huge = replace(pds, features=pds.features * 1e60)
    o = ObjectiveSpec("poly", KernelSpec("polynomial", degree=6, bias=4.0), lam=1.0, alpha=0.0)
    with pytest.raises(TrainingError) as info:
        train(huge, part.train, o, TrainConfig(epochs=1))
    assert info.value.iteration == 1


def test_single_class_rejected(bench0):
    pds, _, part = bench0
    one = part.train[pds.labels[part.train] == pds.labels[part.train][0]]
    with pytest.raises(DataError):
        train(pds, one, ORT)
    with pytest.raises(DataError):
        train(pds, np.array([], dtype=int), ORT)


def test_model_json_round_trip(tmp_path, bench0):
    pds, stats, part = bench0
    model, _ = train(pds, part.train, ORT, TrainConfig(epochs=1), stats=stats)
    path = tmp_path / "model.json"
    model.save(path)
    back = Projection.load(path)
    np.testing.assert_array_equal(back.W, model.W)
    assert back.kernel == model.kernel and back.objective == model.objective
    np.testing.assert_array_equal(back.preprocess.feature_mean, stats.feature_mean)
    np.testing.assert_array_equal(back.preprocess.attribute_mean, stats.attribute_mean)
    obj = json.loads(path.read_text())
    assert obj["w"]["rows"] == pds.dim and obj["w"]["cols"] == pds.attr_dim
    assert obj["objective"] == {"variant": "ort", "lambda": 1.0, "alpha": 0.0, "transform": "squared"}


def test_corrupt_model_rejected(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"w": {"rows": 2, "cols": 2, "data": [1, 2, 3]}}')
    with pytest.raises(DataError):
        Projection.load(p)
    p.write_text("{not json")
    with pytest.raises(DataError):
        Projection.load(p)
    with pytest.raises(DataError):
        Projection.load(tmp_path / "missing.json")
