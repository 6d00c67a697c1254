"""Evaluation: F score against user summaries, rank correlations, CV reports.

Precision here is overlap / |ground truth| and recall is overlap /
|generated summary|. That is the reverse of the usual naming convention,
kept deliberately; the F score is invariant under the swap. Kendall's tau
uses the tie-corrected tau-b form with exact integer pair counts; Spearman's
rho is the Pearson correlation of average ranks.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .data import ConfigurationError, num_subtasks
from .nn import load_checkpoint
from .policy import greedy_scores
from .summarize import DEFAULT_BUDGET_FRACTION, make_summary

METRIC_CHOICES = ("f", "tau", "rho", "all")


def f_score(truth_mask, generated_mask):
    """Return (precision, recall, F) between two binary frame masks.

    precision = overlap / |truth|, recall = overlap / |generated|.
    """
    a = np.asarray(truth_mask).astype(bool)
    b = np.asarray(generated_mask).astype(bool)
    if a.shape != b.shape:
        raise ValueError(f"mask lengths differ: {a.shape[0]} vs {b.shape[0]}")
    size_a = int(a.sum())
    size_b = int(b.sum())
    if size_a == 0 or size_b == 0:
        warnings.warn("empty summary mask; F score defined as 0", stacklevel=2)
        return 0.0, 0.0, 0.0
    overlap = int((a & b).sum())
    if overlap == 0:
        return 0.0, 0.0, 0.0
    precision = overlap / size_a
    recall = overlap / size_b
    return precision, recall, 2.0 * precision * recall / (precision + recall)


def f_score_multi(user_summaries, generated_mask, mode):
    """Combine per-user F scores by max or mean."""
    if mode not in ("max", "mean"):
        raise ValueError(f"mode must be 'max' or 'mean', got {mode!r}")
    values = [f_score(user, generated_mask)[2] for user in np.asarray(user_summaries)]
    if not values:
        raise ValueError("need at least one user summary")
    return max(values) if mode == "max" else sum(values) / len(values)


def _tie_term(values):
    _, counts = np.unique(values, return_counts=True)
    return int((counts * (counts - 1) // 2).sum())


def kendall_tau(pred, truth):
    """Tie-corrected Kendall tau-b from exact integer pair counts."""
    p = np.asarray(pred, dtype=np.float64)
    q = np.asarray(truth, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1 or p.shape[0] < 2:
        raise ValueError("need two equal-length vectors with at least 2 entries")
    n = p.shape[0]
    concordant = 0
    discordant = 0
    for i in range(n - 1):
        s = np.sign(p[i + 1 :] - p[i]) * np.sign(q[i + 1 :] - q[i])
        concordant += int((s > 0).sum())
        discordant += int((s < 0).sum())
    n0 = n * (n - 1) // 2
    n1 = _tie_term(p)
    n2 = _tie_term(q)
    if n0 == n1 or n0 == n2:
        warnings.warn("constant input; Kendall tau defined as 0", stacklevel=2)
        return 0.0
    return (concordant - discordant) / math.sqrt((n0 - n1) * (n0 - n2))


def spearman_rho(pred, truth):
    """Pearson correlation of average ranks (ties share the mean rank)."""
    p = np.asarray(pred, dtype=np.float64)
    q = np.asarray(truth, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1 or p.shape[0] < 2:
        raise ValueError("need two equal-length vectors with at least 2 entries")
    ra = rankdata(p, method="average")
    rb = rankdata(q, method="average")
    da = ra - ra.mean()
    db = rb - rb.mean()
    denom = math.sqrt(np.sum(da * da) * np.sum(db * db))
    if denom == 0.0:
        warnings.warn("constant input; Spearman rho defined as 0", stacklevel=2)
        return 0.0
    return float(np.sum(da * db)) / denom


# ---------------------------------------------------------------------------
# run evaluation harness


def video_truth_masks(video):
    """Per-user binary summaries if annotated, else the derived keyframes."""
    ann = video.annotations
    if ann.user_summaries is not None:
        return ann.user_summaries
    return ann.keyframes[None, :]


def video_f_for_mask(video, frame_mask, mode):
    return f_score_multi(video_truth_masks(video), frame_mask, mode)


def evaluate_video(
    store,
    video,
    subtask_size,
    f_mode,
    budget_fraction=DEFAULT_BUDGET_FRACTION,
    max_shots=None,
    penalty_weight=1.0,
):
    """Score one video with a trained model and return its F / tau / rho."""
    feats = video.features.features
    scores = greedy_scores(store, feats, subtask_size)
    summary, _ = make_summary(
        feats,
        scores,
        budget_fraction=budget_fraction,
        max_shots=max_shots,
        penalty_weight=penalty_weight,
    )
    return {
        "video_id": video.video_id,
        "F": video_f_for_mask(video, summary.frame_mask, f_mode),
        "tau": kendall_tau(scores, video.annotations.mean_scores),
        "rho": spearman_rho(scores, video.annotations.mean_scores),
    }


def load_run_folds(run_dir):
    folds_path = Path(run_dir) / "folds.json"
    if not folds_path.exists():
        raise ConfigurationError(f"{run_dir}: missing folds.json (not a training run?)")
    with open(folds_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return doc["folds"], doc.get("setting", "canonical")


def evaluate_run(
    run_dir,
    dataset,
    metric="all",
    budget_fraction=DEFAULT_BUDGET_FRACTION,
    max_shots=None,
    penalty_weight=1.0,
    jobs=1,
):
    """Evaluate every fold checkpoint of a training run on its held-out videos."""
    if metric not in METRIC_CHOICES:
        raise ValueError(f"metric must be one of {METRIC_CHOICES}, got {metric!r}")
    run_dir = Path(run_dir)
    folds, setting = load_run_folds(run_dir)
    f_mode = dataset.manifest.f_aggregate
    subtask_size = None
    per_fold = []
    fold_means = {"F": [], "tau": [], "rho": []}
    for k, video_ids in enumerate(folds):
        ckpt_path = run_dir / f"fold{k}.ckpt"
        if not ckpt_path.exists():
            raise ConfigurationError(f"missing fold checkpoint {ckpt_path}")
        store, meta = load_checkpoint(ckpt_path)
        if meta.get("feature_dim") != dataset.manifest.feature_dim:
            raise ConfigurationError(
                f"{ckpt_path}: model feature dim {meta.get('feature_dim')} does not match "
                f"dataset feature dim {dataset.manifest.feature_dim}"
            )
        subtask_size = int(meta["subtask_size"])
        videos = [dataset.by_id(video_id) for video_id in video_ids]

        def score_one(video):
            return evaluate_video(
                store,
                video,
                subtask_size,
                f_mode,
                budget_fraction=budget_fraction,
                max_shots=max_shots,
                penalty_weight=penalty_weight,
            )

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(score_one, videos))
        else:
            results = [score_one(video) for video in videos]

        entry = {"fold": k, "num_videos": len(videos)}
        for key in ("F", "tau", "rho"):
            if _metric_wanted(metric, key):
                mean = float(np.mean([r[key] for r in results])) if results else 0.0
                entry[key] = mean
                fold_means[key].append(mean)
        per_fold.append(entry)

    report = {
        "dataset": dataset.manifest.name,
        "setting": setting,
        "per_fold": per_fold,
        "labels_per_video": float(
            np.mean([num_subtasks(v.num_frames, subtask_size) for v in dataset.videos])
        ),
    }
    if _metric_wanted(metric, "F"):
        report["mean_F"] = float(np.mean(fold_means["F"]))
    if _metric_wanted(metric, "tau"):
        report["mean_tau"] = float(np.mean(fold_means["tau"]))
    if _metric_wanted(metric, "rho"):
        report["mean_rho"] = float(np.mean(fold_means["rho"]))
    return report


def _metric_wanted(metric, key):
    return metric == "all" or metric == {"F": "f", "tau": "tau", "rho": "rho"}[key]


def save_report(path, report):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
