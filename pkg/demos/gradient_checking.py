"""Check every analytic gradient in the two networks against central
finite differences. A relative error near 1e-7 is the noise floor of the
finite difference itself; anything under 1e-5 counts as exact here.

Run:  python3 demos/gradient_checking.py
"""

import numpy as np

from hiersum import grad_check, init_policy, manager_forward, substream, worker_forward
from hiersum.policy import (
    action_log_prob,
    log_prob_score_grad,
    manager_loss_backward,
    manager_param_names,
    worker_backward,
    worker_param_names,
)

store = init_policy(5, 4, substream(12, "init"))
feats = substream(12, "x").normal(size=(6, 5))
labels = np.array([1.0, 0.0, 1.0])


def manager_loss():
    fwd = manager_forward(store, feats, 2)
    return manager_loss_backward(store, fwd, labels)


print("Manager: mean binary cross-entropy of subtask probabilities")
report = grad_check(manager_loss, store, names=manager_param_names(store))
for name, err in report["per_param"].items():
    print(f"  {name:18s} rel err {err:.2e}")
print(f"  max {report['max_rel_error']:.2e}  ok={report['ok']}")

subgoals = manager_forward(store, feats, 2).subgoals
actions = np.array([1, 0, 1, 1, 0, 0], dtype=np.float64)


def worker_loss():
    wfwd = worker_forward(store, feats, subgoals, 2)
    loss = action_log_prob(wfwd.scores, actions)
    worker_backward(store, wfwd, log_prob_score_grad(wfwd.scores, actions))
    return loss


print("\nWorker: log-probability of one sampled action sequence")
report = grad_check(worker_loss, store, names=worker_param_names(store))
for name, err in report["per_param"].items():
    print(f"  {name:18s} rel err {err:.2e}")
print(f"  max {report['max_rel_error']:.2e}  ok={report['ok']}")
