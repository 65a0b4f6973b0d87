import csv
import math

import numpy as np
import pytest

from ecgpipe.errors import DomainError, FormatError, TrainingError
from ecgpipe.nn import (ArchSpec, Dataset, ReduceOnPlateau, TrainConfig, build, forward,
                        load_checkpoint, one_hot, predict, save_checkpoint, train,
                        write_history)
from ecgpipe.pipeline import signal_inputs
from ecgpipe.synthetic import sinusoid_dataset


@pytest.fixture(scope="module")
def toy():
    records = sinusoid_dataset(per_class=4, n_samples=256, seed=0)
    x = signal_inputs(records, 256)
    y = one_hot([r.label.index for r in records])
    return Dataset(x, y)


SMALL = ArchSpec("cnn1d", filters=8)


def test_plateau_three_reductions():
    sched = ReduceOnPlateau(1e-3, factor=0.5, patience=5, floor=1.6e-6)
    lrs = [sched.update(v) for v in [1.0] + [1.0] * 15]
    assert lrs[-1] == 1.25e-4
    assert all(b <= a for a, b in zip(lrs, lrs[1:]))


def test_plateau_floor():
    sched = ReduceOnPlateau(1e-3, 0.5, 1, 1.6e-6)
    lrs = [sched.update(1.0) for _ in range(40)]
    assert min(lrs) == 1.6e-6 and lrs[-1] == 1.6e-6
    # from 1e-3, nine halvings give 1.95e-6 and the tenth is clamped
    assert lrs[9] == pytest.approx(1e-3 * 0.5 ** 9)
    assert lrs[10] == 1.6e-6


def test_config_validation():
    with pytest.raises(DomainError):
        TrainConfig(lr_initial=1e-6, lr_floor=1e-5)
    with pytest.raises(DomainError):
        TrainConfig(batch_size=0)


def test_dataset_validation():
    with pytest.raises(DomainError):
        Dataset(np.zeros((2, 12, 16)), np.array([[0.5, 0.5, 0, 0, 0], [1, 0, 0, 0, 0]]))
    with pytest.raises(DomainError):
        Dataset(np.zeros((0, 12, 16)), np.zeros((0, 5)))


def test_early_stopping_halts(toy):
    state = build(SMALL, 0)
    # a fixed, unlearnable validation set: loss cannot keep improving
    rng = np.random.default_rng(1)
    val = Dataset(rng.normal(size=(10, 12, 256)), one_hot(rng.integers(0, 5, 10)))
    cfg = TrainConfig(lr_initial=0.05, max_epochs=40, batch_size=10, early_stopping_patience=3)
    best, hist = train(state, toy, val, cfg)
    assert len(hist) < 40
    losses = [h["val_loss"] for h in hist]
    best_epoch = int(np.argmin(losses))
    assert len(hist) == best_epoch + 1 + 3
    assert best.best_val_loss == min(losses)
    assert best.epoch == best_epoch + 1


def test_lr_monotone_and_history_fields(toy):
    cfg = TrainConfig(lr_initial=1e-3, max_epochs=12, batch_size=5, plateau_patience=1,
                      early_stopping_patience=None)
    _, hist = train(build(SMALL, 0), toy, toy, cfg)
    lrs = [h["lr"] for h in hist]
    assert all(b <= a for a, b in zip(lrs, lrs[1:]))
    assert all(lr >= cfg.lr_floor for lr in lrs)
    assert set(hist[0]) == {"epoch", "lr", "train_loss", "val_loss", "train_acc", "val_acc"}


def test_training_deterministic(toy):
    cfg = TrainConfig(max_epochs=4, batch_size=7, seed=5)
    a, ha = train(build(SMALL, 3), toy, toy, cfg)
    b, hb = train(build(SMALL, 3), toy, toy, cfg)
    assert a.params.tobytes() == b.params.tobytes()
    assert ha == hb


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_raises(toy):
    cfg = TrainConfig(lr_initial=1e305, lr_floor=1.0, max_epochs=3, batch_size=20)
    with pytest.raises(TrainingError) as err:
        train(build(SMALL, 0), toy, toy, cfg)
    assert err.value.epoch == 1


def test_predict_argmax_and_ties():
    state = build(SMALL, 0)
    state.net.views(state.params)[-1]["W"][...] = 0.0
    b = state.net.views(state.params)[-1]["b"]
    x = np.random.default_rng(0).normal(size=(3, 12, 32))
    labels, probs = predict(state, x)
    assert labels.tolist() == [0, 0, 0]  # uniform -> lowest index
    b[...] = np.log([0.1, 0.1, 0.6, 0.1, 0.1])
    labels, probs = predict(state, x)
    assert labels.tolist() == [2, 2, 2]
    np.testing.assert_allclose(probs[0], [0.1, 0.1, 0.6, 0.1, 0.1], atol=1e-12)


def test_predict_batch_invariance(toy):
    state = build(ArchSpec("cnn1d_gru", filters=4, recurrent=(("gru", 3),)), 2)
    _, together = predict(state, toy.x)
    single = np.concatenate([forward(state, toy.x[i:i + 1]) for i in range(len(toy))])
    _, chunked = predict(state, toy.x, batch_size=3)
    np.testing.assert_allclose(together, single, rtol=0, atol=1e-14)
    np.testing.assert_allclose(together, chunked, rtol=0, atol=1e-14)


def test_checkpoint_roundtrip(tmp_path, toy):
    cfg = TrainConfig(max_epochs=2, batch_size=10)
    state, hist = train(build(SMALL, 9), toy, toy, cfg)
    state.meta["preprocessing"] = {"kind": "signal", "length": 256}
    save_checkpoint(state, tmp_path / "m", cfg=cfg, metrics={"acc": 0.5})
    raw = (tmp_path / "m.params").read_bytes()
    assert len(raw) == 8 * state.n_params
    back = load_checkpoint(tmp_path / "m.json")
    assert back.params.tobytes() == state.params.tobytes()
    assert back.arch == state.arch and back.epoch == state.epoch
    assert back.best_val_loss == state.best_val_loss
    assert back.meta["preprocessing"]["length"] == 256
    assert back.meta["train_config"]["batch_size"] == 10
    np.testing.assert_array_equal(forward(back, toy.x[:3]), forward(state, toy.x[:3]))

    write_history(hist, tmp_path / "h.csv")
    rows = list(csv.DictReader(open(tmp_path / "h.csv")))
    assert list(rows[0]) == ["epoch", "lr", "train_loss", "val_loss", "train_acc", "val_acc"]
    assert len(rows) == 2


def test_checkpoint_size_mismatch(tmp_path):
    state = build(SMALL, 0)
    save_checkpoint(state, tmp_path / "m")
    (tmp_path / "m.params").write_bytes(b"\0" * 16)
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "m")


def test_initial_loss_near_ln5(toy):
    from ecgpipe.nn import loss
    state = build(ArchSpec("cnn1d"), 42)
    assert abs(loss(state, toy.x, toy.y) - math.log(5)) <= 0.05


@pytest.mark.slow
def test_cnn1d_overfits(toy):
    cfg = TrainConfig(max_epochs=200, batch_size=50, early_stopping_patience=None, seed=42)
    best, hist = train(build(ArchSpec("cnn1d"), 42), toy, toy, cfg)
    assert max(h["train_acc"] for h in hist) >= 0.95
