"""Plain numpy neural primitives with hand-written backward passes.

Everything runs in float64 on one thread. The pieces are deliberately small:
a named parameter store, an LSTM cell with an explicit step backward, an
affine layer, stable sigmoid / binary cross-entropy, Adam, a checkpoint
format, and a central finite-difference gradient checker. Recurrent models
record their forward steps on a Tape and backpropagate through the whole
sequence with no truncation.
"""

from __future__ import annotations

import json
import os

import numpy as np

PROB_CLAMP = 1e-7  # probabilities are clipped to [PROB_CLAMP, 1 - PROB_CLAMP] before any log


class TrainingError(RuntimeError):
    """Optimization produced a non-finite quantity."""


def sigmoid(z):
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def clamp_prob(p):
    """Clip probabilities away from {0, 1} so logs stay finite.

    Returns (clamped, pass_mask); the gradient through the clamp is zero
    wherever the clip binds, which keeps analytic gradients consistent with
    finite differences.
    """
    p = np.asarray(p, dtype=np.float64)
    clamped = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return clamped, (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)


def bce(p, y):
    """Binary cross-entropy -[y log p + (1-y) log(1-p)], elementwise.

    Callers clamp p first; p must lie strictly inside (0, 1).
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("bce requires probabilities strictly inside (0, 1)")
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def bce_grad(p, y):
    """d bce / d p, elementwise; -1/p at y=1, 1/(1-p) at y=0."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return -y / p + (1.0 - y) / (1.0 - p)


class ParamStore:
    """Named float64 parameter arrays with same-shape gradient accumulators."""

    def __init__(self):
        self.params = {}
        self.grads = {}

    def add(self, name, value):
        if name in self.params:
            raise ValueError(f"parameter '{name}' already registered")
        arr = np.array(value, dtype=np.float64)
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        return arr

    def names(self):
        return list(self.params)

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def grad(self, name):
        return self.grads[name]

    def zero_grads(self, names=None):
        for name in names if names is not None else self.params:
            self.grads[name].fill(0.0)

    def check_finite(self):
        for name, value in self.params.items():
            if not np.all(np.isfinite(value)):
                raise TrainingError(f"parameter '{name}' is non-finite")


class Tape:
    """Ordered record of forward step caches, consumed exactly once in reverse."""

    def __init__(self):
        self._steps = []
        self._consumed = False

    def push(self, cache):
        if self._consumed:
            raise RuntimeError("cannot record on a consumed tape")
        self._steps.append(cache)

    def __len__(self):
        return len(self._steps)

    def consume_reverse(self):
        if self._consumed:
            raise RuntimeError("tape already consumed")
        self._consumed = True
        return reversed(self._steps)


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


# ---------------------------------------------------------------------------
# LSTM cell
#
# Parameters under a prefix: Wx (D, 4H), Wh (H, 4H), b (4H,). Gate order along
# the 4H axis is input, forget, output, candidate.


def init_lstm(store, prefix, input_dim, hidden, rng):
    store.add(f"{prefix}.Wx", uniform_init(rng, (input_dim, 4 * hidden), input_dim))
    store.add(f"{prefix}.Wh", uniform_init(rng, (hidden, 4 * hidden), hidden))
    b = uniform_init(rng, 4 * hidden, hidden)
    b[hidden : 2 * hidden] += 1.0  # forget-gate bias offset
    store.add(f"{prefix}.b", b)


def lstm_hidden_size(store, prefix):
    return store[f"{prefix}.Wh"].shape[0]


def lstm_zero_state(store, prefix):
    hidden = lstm_hidden_size(store, prefix)
    return np.zeros(hidden), np.zeros(hidden)


def lstm_step(store, prefix, x, state, tape=None):
    """One LSTM step; returns the new (h, c) and records a cache on the tape."""
    h_prev, c_prev = state
    wx, wh, b = store[f"{prefix}.Wx"], store[f"{prefix}.Wh"], store[f"{prefix}.b"]
    if x.shape[0] != wx.shape[0]:
        raise ValueError(
            f"lstm '{prefix}': input dim {x.shape[0]} does not match weights {wx.shape[0]}"
        )
    hidden = wh.shape[0]
    z = x @ wx + h_prev @ wh + b
    i = sigmoid(z[:hidden])
    f = sigmoid(z[hidden : 2 * hidden])
    o = sigmoid(z[2 * hidden : 3 * hidden])
    g = np.tanh(z[3 * hidden :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    if tape is not None:
        tape.push((x, h_prev, c_prev, i, f, o, g, c))
    return h, c


def lstm_step_backward(store, prefix, cache, dh, dc):
    """Backward for one step; accumulates parameter grads, returns (dx, dh_prev, dc_prev)."""
    x, h_prev, c_prev, i, f, o, g, c = cache
    hidden = i.shape[0]
    tanh_c = np.tanh(c)
    do = dh * tanh_c
    dc = dc + dh * o * (1.0 - tanh_c * tanh_c)
    di = dc * g
    df = dc * c_prev
    dg = dc * i
    dc_prev = dc * f
    dz = np.empty(4 * hidden)
    dz[:hidden] = di * i * (1.0 - i)
    dz[hidden : 2 * hidden] = df * f * (1.0 - f)
    dz[2 * hidden : 3 * hidden] = do * o * (1.0 - o)
    dz[3 * hidden :] = dg * (1.0 - g * g)
    store.grads[f"{prefix}.Wx"] += np.outer(x, dz)
    store.grads[f"{prefix}.Wh"] += np.outer(h_prev, dz)
    store.grads[f"{prefix}.b"] += dz
    dx = store[f"{prefix}.Wx"] @ dz
    dh_prev = store[f"{prefix}.Wh"] @ dz
    return dx, dh_prev, dc_prev


def lstm_backward(store, prefix, tape, dhs):
    """Backpropagate through a recorded sequence of steps.

    dhs[t] is the loss gradient on the hidden state emitted at step t; the
    recurrent contribution is carried backward internally. Returns gradients
    on the step inputs, newest first reversed back to input order.
    """
    dxs = [None] * len(tape)
    dh_carry = np.zeros_like(dhs[0])
    dc_carry = np.zeros_like(dhs[0])
    t = len(tape) - 1
    for cache in tape.consume_reverse():
        dx, dh_carry, dc_carry = lstm_step_backward(
            store, prefix, cache, dhs[t] + dh_carry, dc_carry
        )
        dxs[t] = dx
        t -= 1
    return dxs, dh_carry, dc_carry


# ---------------------------------------------------------------------------
# affine layer: W (out, in), b (out,)


def init_affine(store, prefix, out_dim, in_dim, rng):
    store.add(f"{prefix}.W", uniform_init(rng, (out_dim, in_dim), in_dim))
    store.add(f"{prefix}.b", uniform_init(rng, out_dim, in_dim))


def affine(store, prefix, x):
    return store[f"{prefix}.W"] @ x + store[f"{prefix}.b"]


def affine_backward(store, prefix, x, dout):
    store.grads[f"{prefix}.W"] += np.outer(dout, x)
    store.grads[f"{prefix}.b"] += dout
    return store[f"{prefix}.W"].T @ dout


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Adam with per-parameter step counts so disjoint groups update independently."""

    def __init__(self, store, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {name: np.zeros_like(p) for name, p in store.params.items()}
        self.v = {name: np.zeros_like(p) for name, p in store.params.items()}
        self.t = {name: 0 for name in store.params}

    def step(self, names=None):
        """Apply one update to the named parameters (all by default), then zero their grads."""
        for name in names if names is not None else self.store.names():
            grad = self.store.grads[name]
            if not np.all(np.isfinite(grad)):
                raise TrainingError(f"non-finite gradient for parameter '{name}'")
            self.t[name] += 1
            t = self.t[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            self.store.params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            grad.fill(0.0)


# ---------------------------------------------------------------------------
# checkpoint: one JSON header line, then raw little-endian float64 payloads
# per named parameter in header order.

CHECKPOINT_FORMAT = "hiersum-checkpoint-v1"


def save_checkpoint(path, store, meta=None):
    header = {
        "format": CHECKPOINT_FORMAT,
        "meta": meta or {},
        "params": [{"name": n, "shape": list(store[n].shape)} for n in store.names()],
    }
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for name in store.names():
            fh.write(store[name].astype("<f8").tobytes(order="C"))
    os.replace(tmp, path)  # atomic on POSIX: readers never see a partial file


def load_checkpoint(path):
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: invalid checkpoint header ({exc})") from exc
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: unsupported checkpoint format {header.get('format')!r}")
        store = ParamStore()
        for spec_entry in header["params"]:
            shape = tuple(spec_entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError(f"{path}: truncated payload for '{spec_entry['name']}'")
            store.add(spec_entry["name"], np.frombuffer(raw, dtype="<f8").reshape(shape).copy())
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after last parameter")
    return store, header["meta"]


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(loss_fn, store, names=None, step=1e-5, tolerance=1e-5, floor=1e-4):
    """Compare analytic gradients with central finite differences.

    loss_fn() must deterministically recompute the scalar loss from the
    current parameter values and leave fresh gradients in the store. The
    relative error divides by max(|analytic|, |fd|, floor): a central
    difference carries rounding noise of about eps * |loss| / step, so
    entries much smaller than the floor cannot be resolved relatively and
    are held to the absolute bound tolerance * floor instead.
    """
    names = list(names) if names is not None else store.names()
    store.zero_grads()
    loss_fn()
    analytic = {name: store.grads[name].copy() for name in names}
    per_param = {}
    for name in names:
        param = store.params[name]
        flat = param.reshape(-1)
        ana = analytic[name].reshape(-1)
        worst = 0.0
        for idx in range(flat.size):
            saved = flat[idx]
            flat[idx] = saved + step
            store.zero_grads()
            loss_plus = loss_fn()
            flat[idx] = saved - step
            store.zero_grads()
            loss_minus = loss_fn()
            flat[idx] = saved
            fd = (loss_plus - loss_minus) / (2.0 * step)
            scale = max(abs(ana[idx]), abs(fd), floor)
            worst = max(worst, abs(ana[idx] - fd) / scale)
        per_param[name] = worst
    store.zero_grads()
    loss_fn()  # leave gradients consistent with the unperturbed parameters
    max_err = max(per_param.values()) if per_param else 0.0
    return {"max_rel_error": max_err, "per_param": per_param, "ok": max_err < tolerance}
