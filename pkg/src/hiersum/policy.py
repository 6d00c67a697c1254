"""Manager and Worker networks.

The Manager runs one LSTM pass over the whole video with hidden state carried
across subtask boundaries; the hidden state at the last frame of each subtask
is that subtask's subgoal, and a sigmoid head on the subgoal predicts the
probability that the subtask contains a keyframe. The Worker runs its own
LSTM over the same frames (state also carried across subtasks), mixes each
hidden state with the current subgoal through an affine layer, and a sigmoid
head turns the mix into a per-frame importance score. Actions are Bernoulli
draws from the scores.

The Worker treats subgoals as constants: gradients from Worker objectives
never reach Manager parameters, which train only on their own loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import subtask_views
from .nn import (
    ParamStore,
    Tape,
    affine,
    affine_backward,
    bce,
    bce_grad,
    clamp_prob,
    init_affine,
    init_lstm,
    lstm_backward,
    lstm_step,
    lstm_zero_state,
    sigmoid,
)

DEFAULT_HIDDEN = 64


def init_policy(feature_dim, hidden, rng):
    """Fresh parameters for both networks; insertion order fixes checkpoint layout."""
    store = ParamStore()
    init_lstm(store, "manager.lstm", feature_dim, hidden, rng)
    init_affine(store, "manager.head", 1, hidden, rng)
    init_lstm(store, "worker.lstm", feature_dim, hidden, rng)
    init_affine(store, "worker.mix", hidden, 2 * hidden, rng)
    init_affine(store, "worker.head", 1, hidden, rng)
    return store


def manager_param_names(store):
    return [n for n in store.names() if n.startswith("manager.")]


def worker_param_names(store):
    return [n for n in store.names() if n.startswith("worker.")]


def policy_dims(store):
    feature_dim, four_h = store["manager.lstm.Wx"].shape
    return feature_dim, four_h // 4


@dataclass
class ManagerForward:
    views: list
    subgoals: np.ndarray  # (N, H), hidden state at each subtask's last frame
    logits: np.ndarray  # (N,)
    raw: np.ndarray  # (N,) sigmoid outputs before clamping
    probs: np.ndarray  # (N,) clamped subtask probabilities
    clamp_mask: np.ndarray
    tape: Tape


def manager_forward(store, features, subtask_size):
    feats = np.asarray(features, dtype=np.float64)
    views = subtask_views(feats.shape[0], subtask_size)
    tape = Tape()
    h, c = lstm_zero_state(store, "manager.lstm")
    subgoals = np.empty((len(views), h.shape[0]))
    ends = {v.end - 1: v.index for v in views}
    for t in range(feats.shape[0]):
        h, c = lstm_step(store, "manager.lstm", feats[t], (h, c), tape)
        if t in ends:
            subgoals[ends[t]] = h
    logits = np.array([affine(store, "manager.head", g)[0] for g in subgoals])
    raw = sigmoid(logits)
    probs, clamp_mask = clamp_prob(raw)
    return ManagerForward(
        views=views,
        subgoals=subgoals,
        logits=logits,
        raw=raw,
        probs=probs,
        clamp_mask=clamp_mask,
        tape=tape,
    )


def manager_backward(store, fwd, dlogits):
    """Accumulate gradients given d(loss)/d(subtask logits)."""
    num_frames = fwd.views[-1].end
    hidden = fwd.subgoals.shape[1]
    dhs = np.zeros((num_frames, hidden))
    for view, dlogit in zip(fwd.views, dlogits):
        dg = affine_backward(store, "manager.head", fwd.subgoals[view.index], np.array([dlogit]))
        dhs[view.end - 1] += dg
    lstm_backward(store, "manager.lstm", fwd.tape, dhs)


def manager_loss(fwd, task_labels):
    """Mean binary cross-entropy of subtask probabilities against weak labels."""
    labels = np.asarray(task_labels, dtype=np.float64)
    if labels.shape[0] != fwd.probs.shape[0]:
        raise ValueError(f"{labels.shape[0]} labels for {fwd.probs.shape[0]} subtasks")
    return float(bce(fwd.probs, labels).mean())


def manager_loss_backward(store, fwd, task_labels):
    """Backward pass for the Manager loss; returns the loss value."""
    labels = np.asarray(task_labels, dtype=np.float64)
    loss = manager_loss(fwd, labels)
    n = fwd.probs.shape[0]
    dprobs = bce_grad(fwd.probs, labels) / n
    dlogits = dprobs * fwd.clamp_mask * fwd.raw * (1.0 - fwd.raw)
    manager_backward(store, fwd, dlogits)
    return loss


@dataclass
class WorkerForward:
    views: list
    scores: np.ndarray  # (T,) clamped per-frame importance scores
    raw: np.ndarray  # (T,) sigmoid outputs before clamping
    clamp_mask: np.ndarray
    mixed: np.ndarray  # (T, H) affine mix of [subgoal ; hidden]
    concat: np.ndarray  # (T, 2H) mix-layer inputs, subgoal first
    tape: Tape


def worker_forward(store, features, subgoals, subtask_size):
    feats = np.asarray(features, dtype=np.float64)
    views = subtask_views(feats.shape[0], subtask_size)
    if len(views) != subgoals.shape[0]:
        raise ValueError(f"{subgoals.shape[0]} subgoals for {len(views)} subtasks")
    num_frames = feats.shape[0]
    hidden = subgoals.shape[1]
    tape = Tape()
    h, c = lstm_zero_state(store, "worker.lstm")
    concat = np.empty((num_frames, 2 * hidden))
    mixed = np.empty((num_frames, hidden))
    logits = np.empty(num_frames)
    for view in views:
        for t in range(view.start, view.end):
            h, c = lstm_step(store, "worker.lstm", feats[t], (h, c), tape)
            concat[t, :hidden] = subgoals[view.index]
            concat[t, hidden:] = h
            mixed[t] = affine(store, "worker.mix", concat[t])
            logits[t] = affine(store, "worker.head", mixed[t])[0]
    raw = sigmoid(logits)
    scores, clamp_mask = clamp_prob(raw)
    return WorkerForward(
        views=views,
        scores=scores,
        raw=raw,
        clamp_mask=clamp_mask,
        mixed=mixed,
        concat=concat,
        tape=tape,
    )


def worker_backward(store, fwd, dscores):
    """Accumulate Worker gradients given d(loss)/d(scores).

    Returns the gradient on the subgoals, which callers training the Worker
    discard: the Manager is updated only by its own loss.
    """
    num_frames, hidden = fwd.mixed.shape
    dlogits = dscores * fwd.clamp_mask * fwd.raw * (1.0 - fwd.raw)
    dhs = np.zeros((num_frames, hidden))
    dsubgoals = np.zeros((len(fwd.views), hidden))
    for view in fwd.views:
        for t in range(view.start, view.end):
            dmixed = affine_backward(store, "worker.head", fwd.mixed[t], np.array([dlogits[t]]))
            dcat = affine_backward(store, "worker.mix", fwd.concat[t], dmixed)
            dsubgoals[view.index] += dcat[:hidden]
            dhs[t] += dcat[hidden:]
    lstm_backward(store, "worker.lstm", fwd.tape, dhs)
    return dsubgoals


@dataclass
class Episode:
    actions: np.ndarray  # (T,) 0/1
    selected: np.ndarray  # indices where the action is 1
    log_prob: float


def action_log_prob(scores, actions):
    actions = np.asarray(actions, dtype=np.float64)
    return float(
        np.sum(actions * np.log(scores) + (1.0 - actions) * np.log1p(-scores))
    )


def sample_actions(scores, rng):
    """Draw one Bernoulli action per frame from the given scores."""
    actions = (rng.random(scores.shape[0]) < scores).astype(np.uint8)
    return Episode(
        actions=actions,
        selected=np.flatnonzero(actions),
        log_prob=action_log_prob(scores, actions),
    )


def log_prob_score_grad(scores, actions):
    """d log-prob / d scores for a fixed action sequence."""
    actions = np.asarray(actions, dtype=np.float64)
    return actions / scores - (1.0 - actions) / (1.0 - scores)


def greedy_scores(store, features, subtask_size):
    """Deterministic per-frame importance scores for inference."""
    mfwd = manager_forward(store, features, subtask_size)
    wfwd = worker_forward(store, features, mfwd.subgoals, subtask_size)
    return wfwd.scores
