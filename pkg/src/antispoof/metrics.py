"""Biometric evaluation metrics: EER thresholding, HTER, AUC, ACER.

Scores are live probabilities in [0, 1]; labels are 0 = live, 1 = spoof. A
sample is classified live iff its score >= the threshold. FAR is the fraction
of spoof samples accepted, FRR the fraction of live samples rejected. The
operating threshold is fixed once on a development set (the equal-error-rate
point) and applied unchanged to test data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ScoredSample:
    score: float
    label: int  # 0 = live, 1 = spoof


@dataclass(frozen=True)
class MetricReport:
    tau: float
    hter: float
    auc: float
    acer: float
    far: float
    frr: float
    n_live: int
    n_spoof: int

    def as_record(self) -> dict:
        return {
            "tau": self.tau, "hter": self.hter, "auc": self.auc, "acer": self.acer,
            "far": self.far, "frr": self.frr,
            "n_live": self.n_live, "n_spoof": self.n_spoof,
        }


def as_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    """Accepts (scores, labels) arrays or a sequence of ScoredSample."""
    if isinstance(samples, tuple) and len(samples) == 2:
        scores, labels = samples
    else:
        scores = [s.score for s in samples]
        labels = [s.label for s in samples]
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError("scores and labels must be matching 1-d sequences")
    if not np.isfinite(scores).all() or scores.min(initial=0.0) < 0 or scores.max(initial=1.0) > 1:
        raise DataError("scores must be finite and within [0, 1]")
    if not np.isin(labels, (0, 1)).all():
        raise DataError("labels must be 0 (live) or 1 (spoof)")
    return scores, labels


def _require_both_classes(labels: np.ndarray) -> None:
    if not (labels == 0).any() or not (labels == 1).any():
        raise DataError("metric requires both live and spoof samples")


def far_frr(scores, labels, tau: float) -> tuple[float, float]:
    """Error rates at a threshold: live iff score >= tau."""
    scores, labels = as_arrays((scores, labels))
    _require_both_classes(labels)
    live = labels == 0
    spoof = ~live
    far = float(np.count_nonzero(scores[spoof] >= tau)) / int(spoof.sum())
    frr = float(np.count_nonzero(scores[live] < tau)) / int(live.sum())
    return far, frr


def threshold_candidates(scores: np.ndarray) -> np.ndarray:
    """Midpoints between adjacent sorted unique scores, with +-inf sentinels."""
    uniq = np.unique(scores)
    mids = (uniq[:-1] + uniq[1:]) / 2.0
    return np.concatenate(([-np.inf], mids, [np.inf]))


def eer_threshold(scores, labels) -> float:
    """Threshold minimizing |FAR - FRR| over the candidate set; ties pick the
    lowest threshold."""
    scores, labels = as_arrays((scores, labels))
    _require_both_classes(labels)
    candidates = threshold_candidates(scores)
    live_scores = np.sort(scores[labels == 0])
    spoof_scores = np.sort(scores[labels == 1])
    n_live, n_spoof = live_scores.size, spoof_scores.size
    # counts below tau via sorted insertion points
    far = (n_spoof - np.searchsorted(spoof_scores, candidates, side="left")) / n_spoof
    frr = np.searchsorted(live_scores, candidates, side="left") / n_live
    gaps = np.abs(far - frr)
    return float(candidates[int(np.argmin(gaps))])  # argmin keeps the first, lowest tau


def hter(scores, labels, tau: float) -> tuple[float, float, float]:
    """(HTER, FAR, FRR) at the given threshold."""
    far, frr = far_frr(scores, labels, tau)
    return (far + frr) / 2.0, far, frr


def auc(scores, labels) -> float:
    """Probability that a random live sample outscores a random spoof sample,
    counting ties as one half (rank-statistic form of the ROC area)."""
    scores, labels = as_arrays((scores, labels))
    _require_both_classes(labels)
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty_like(scores)
    ranks[order] = np.arange(1, scores.size + 1, dtype=np.float64)
    # average ranks over tied score groups
    sorted_scores = scores[order]
    group_start = np.flatnonzero(np.r_[True, sorted_scores[1:] != sorted_scores[:-1]])
    group_end = np.r_[group_start[1:], sorted_scores.size]
    for start, end in zip(group_start, group_end):
        if end - start > 1:
            ranks[order[start:end]] = 0.5 * (start + 1 + end)
    live = labels == 0
    n_live = int(live.sum())
    n_spoof = scores.size - n_live
    u_stat = ranks[live].sum() - n_live * (n_live + 1) / 2.0
    return float(u_stat / (n_live * n_spoof))


def acer(scores, labels, tau: float) -> tuple[float, float, float]:
    """(ACER, APCER, BPCER): attack-acceptance and bona-fide-rejection rates
    averaged. With one attack type this equals HTER at the same threshold; it
    is reported separately to match the evaluation protocol's vocabulary."""
    apcer, bpcer = far_frr(scores, labels, tau)
    return (apcer + bpcer) / 2.0, apcer, bpcer


def compute_report(scores, labels, tau: float) -> MetricReport:
    """Full metric record at a fixed threshold."""
    scores, labels = as_arrays((scores, labels))
    hter_value, far, frr = hter(scores, labels, tau)
    acer_value, _, _ = acer(scores, labels, tau)
    return MetricReport(
        tau=float(tau),
        hter=hter_value,
        auc=auc(scores, labels),
        acer=acer_value,
        far=far,
        frr=frr,
        n_live=int(np.count_nonzero(labels == 0)),
        n_spoof=int(np.count_nonzero(labels == 1)),
    )
