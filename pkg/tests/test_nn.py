import math

import numpy as np
import pytest

from hiersum.nn import (
    Adam,
    ParamStore,
    Tape,
    TrainingError,
    affine,
    affine_backward,
    bce,
    bce_grad,
    clamp_prob,
    grad_check,
    init_affine,
    init_lstm,
    load_checkpoint,
    lstm_backward,
    lstm_step,
    lstm_zero_state,
    save_checkpoint,
    sigmoid,
    uniform_init,
)
from hiersum.seeding import substream


# --- activations and losses --------------------------------------------------


def test_sigmoid_values():
    assert sigmoid(np.array([0.0]))[0] == 0.5
    assert abs(sigmoid(np.array([2.0]))[0] - 1.0 / (1.0 + math.exp(-2.0))) < 1e-15
    # stable at extremes
    assert sigmoid(np.array([800.0]))[0] == 1.0
    assert sigmoid(np.array([-800.0]))[0] == 0.0


def test_clamp_prob_bounds_and_mask():
    p, mask = clamp_prob(np.array([0.0, 0.5, 1.0]))
    assert p.tolist() == [1e-7, 0.5, 1.0 - 1e-7]
    assert mask.tolist() == [False, True, False]


def test_bce_values():
    assert abs(bce(np.array([0.5]), np.array([1.0]))[0] - math.log(2.0)) < 1e-15
    assert bce(np.array([1.0 - 1e-12]), np.array([1.0]))[0] < 1e-11
    with pytest.raises(ValueError):
        bce(np.array([1.0]), np.array([1.0]))


def test_bce_grad_closed_form_and_fd():
    assert bce_grad(np.array([0.8]), np.array([1.0]))[0] == -1.25
    h = 1e-6
    for p, y in [(0.3, 1.0), (0.7, 0.0), (0.2, 0.0)]:
        fd = (bce(np.array([p + h]), np.array([y]))[0] - bce(np.array([p - h]), np.array([y]))[0]) / (2 * h)
        assert abs(bce_grad(np.array([p]), np.array([y]))[0] - fd) < 1e-8


# --- parameter store and tape -------------------------------------------------


def test_param_store_basics():
    store = ParamStore()
    store.add("a", np.ones((2, 2)))
    store.add("b", np.zeros(3))
    assert store.names() == ["a", "b"]
    assert "a" in store
    store.grads["a"] += 2.0
    store.zero_grads(["a"])
    assert not store.grads["a"].any()
    with pytest.raises(ValueError):
        store.add("a", np.ones(1))
    store.params["b"][0] = np.nan
    with pytest.raises(TrainingError, match="'b'"):
        store.check_finite()


def test_tape_consumed_once():
    tape = Tape()
    tape.push(1)
    tape.push(2)
    assert list(tape.consume_reverse()) == [2, 1]
    with pytest.raises(RuntimeError):
        tape.consume_reverse()
    with pytest.raises(RuntimeError):
        tape.push(3)


def test_uniform_init_bounds():
    rng = substream(1, "t")
    w = uniform_init(rng, (100, 100), 16)
    assert np.all(np.abs(w) <= 0.25)
    assert w.std() > 0.05


def test_lstm_forget_bias_offset():
    store = ParamStore()
    init_lstm(store, "m", 3, 4, substream(2, "t"))
    b = store["m.b"]
    assert np.all(b[4:8] > 0.5)  # forget slice shifted by +1
    assert np.all(np.abs(np.concatenate([b[:4], b[8:]])) <= 0.5)


# --- LSTM ---------------------------------------------------------------------


def test_lstm_zero_params_zero_output():
    store = ParamStore()
    init_lstm(store, "m", 3, 4, substream(3, "t"))
    for name in store.names():
        store.params[name].fill(0.0)
    h, c = lstm_step(store, "m", np.array([1.0, -2.0, 0.5]), lstm_zero_state(store, "m"))
    assert not h.any() and not c.any()


def test_lstm_state_matters():
    store = ParamStore()
    init_lstm(store, "m", 3, 4, substream(4, "t"))
    x = np.array([0.3, -0.2, 0.9])
    s1 = lstm_step(store, "m", x, lstm_zero_state(store, "m"))
    s2 = lstm_step(store, "m", x, s1)
    assert not np.allclose(s1[0], s2[0])


def test_lstm_shape_error():
    store = ParamStore()
    init_lstm(store, "m", 3, 4, substream(5, "t"))
    with pytest.raises(ValueError, match="input dim"):
        lstm_step(store, "m", np.zeros(5), lstm_zero_state(store, "m"))


def test_lstm_gradients_match_finite_differences():
    store = ParamStore()
    init_lstm(store, "m", 3, 4, substream(6, "t"))
    rng = substream(6, "data")
    xs = rng.normal(size=(5, 3))
    weights = rng.normal(size=(5, 4))  # random projection makes the loss scalar

    def loss_fn():
        tape = Tape()
        state = lstm_zero_state(store, "m")
        hs = []
        for x in xs:
            state = lstm_step(store, "m", x, state, tape)
            hs.append(state[0])
        loss = sum(float(w @ h) for w, h in zip(weights, hs))
        lstm_backward(store, "m", tape, weights)
        return loss

    report = grad_check(loss_fn, store, step=1e-5, tolerance=1e-5)
    assert report["ok"], report


def test_lstm_backward_returns_input_grads():
    store = ParamStore()
    init_lstm(store, "m", 2, 3, substream(7, "t"))
    xs = substream(7, "d").normal(size=(4, 2))
    tape = Tape()
    state = lstm_zero_state(store, "m")
    for x in xs:
        state = lstm_step(store, "m", x, state, tape)
    dhs = np.zeros((4, 3))
    dhs[-1] = 1.0
    dxs, _, _ = lstm_backward(store, "m", tape, dhs)
    assert len(dxs) == 4
    # the loss sits on the last step only, but gradients flow back to x_0
    assert np.any(dxs[0] != 0.0)


# --- affine -------------------------------------------------------------------


def test_affine_gradcheck():
    store = ParamStore()
    init_affine(store, "a", 3, 4, substream(8, "t"))
    x = substream(8, "d").normal(size=4)
    w = substream(8, "w").normal(size=3)

    def loss_fn():
        out = affine(store, "a", x)
        affine_backward(store, "a", x, w)
        return float(w @ out)

    report = grad_check(loss_fn, store, step=1e-5, tolerance=1e-5)
    assert report["ok"], report


def test_grad_check_identity_closure():
    store = ParamStore()
    store.add("p", np.array([0.37]))

    def loss_fn():
        store.grads["p"] += 1.0
        return float(store["p"][0])

    store.zero_grads()
    loss_fn()
    assert store.grads["p"][0] == 1.0
    report = grad_check(loss_fn, store)
    assert report["ok"] and report["max_rel_error"] < 1e-9


# --- Adam ---------------------------------------------------------------------


def test_adam_zero_grads_no_change():
    store = ParamStore()
    store.add("p", np.array([1.0, -2.0]))
    opt = Adam(store, lr=0.1)
    opt.step()
    assert store["p"].tolist() == [1.0, -2.0]


def test_adam_first_step_magnitude():
    store = ParamStore()
    store.add("p", np.array([5.0]))
    opt = Adam(store, lr=0.1)
    store.grads["p"][0] = 1.0
    opt.step()
    # first step moves by ~lr regardless of gradient scale
    assert abs(store["p"][0] - 4.9) < 1e-8
    assert store.grads["p"][0] == 0.0  # gradients cleared after the step


def test_adam_converges_on_quadratic():
    store = ParamStore()
    store.add("x", np.array([8.0]))
    opt = Adam(store, lr=0.05)
    for _ in range(3000):
        store.grads["x"][0] = 2.0 * (store["x"][0] - 3.0)
        opt.step()
    assert abs(store["x"][0] - 3.0) < 1e-3


def test_adam_nonfinite_gradient_names_param():
    store = ParamStore()
    store.add("w", np.zeros(2))
    opt = Adam(store)
    store.grads["w"][0] = np.inf
    with pytest.raises(TrainingError, match="'w'"):
        opt.step()


def test_adam_group_isolation():
    store = ParamStore()
    store.add("a", np.array([1.0]))
    store.add("b", np.array([1.0]))
    opt = Adam(store, lr=0.1)
    store.grads["a"][0] = 1.0
    store.grads["b"][0] = 1.0
    opt.step(["a"])
    assert store["a"][0] != 1.0
    assert store["b"][0] == 1.0  # untouched parameter keeps value and pending grad
    assert store.grads["b"][0] == 1.0
    assert opt.t["a"] == 1 and opt.t["b"] == 0


# --- checkpoints --------------------------------------------------------------


def test_checkpoint_roundtrip(tmp_path):
    store = ParamStore()
    rng = substream(9, "t")
    store.add("w", rng.normal(size=(3, 2)))
    store.add("b", rng.normal(size=4))
    store.add("s", np.array(2.5))
    meta = {"feature_dim": 2, "hidden": 3, "seed": 9}
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, store, meta)
    back, back_meta = load_checkpoint(path)
    assert back_meta == meta
    assert back.names() == ["w", "b", "s"]
    for name in store.names():
        assert np.array_equal(back[name], store[name])
    assert not (tmp_path / "model.ckpt.tmp").exists()
    # saving the loaded store reproduces the file byte for byte
    save_checkpoint(tmp_path / "again.ckpt", back, back_meta)
    assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()


def test_checkpoint_errors(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b'{"format": "other"}\n')
    with pytest.raises(ValueError, match="format"):
        load_checkpoint(path)
    store = ParamStore()
    store.add("w", np.ones(4))
    save_checkpoint(path, store, {})
    data = path.read_bytes()
    (tmp_path / "trunc.ckpt").write_bytes(data[:-8])
    with pytest.raises(ValueError, match="truncated"):
        load_checkpoint(tmp_path / "trunc.ckpt")
    (tmp_path / "trail.ckpt").write_bytes(data + b"\x00")
    with pytest.raises(ValueError, match="trailing"):
        load_checkpoint(tmp_path / "trail.ckpt")
