"""Multi-label prediction scoring and the degenerate-predictor audit.

AUROC uses midranks for tied scores; AP treats a run of tied scores as one
block. Classes without positives (or, for AUROC, without negatives) are
left out of the macro mean and listed in ``skipped_classes``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .core import check_label_matrix, check_scores

UNDEFINED = float("nan")


def _check_inputs(y_true, scores):
    y_true = check_label_matrix(y_true)
    scores = check_scores(scores, shape=y_true.shape)
    return y_true, scores


def _f1(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def f1_scores(y_true, scores, threshold=0.5):
    """``(micro_f1, macro_f1)`` after binarizing ``scores >= threshold``."""
    y_true, scores = _check_inputs(y_true, scores)
    pred = scores >= threshold
    tp = (pred & y_true).sum(axis=0)
    fp = (pred & ~y_true).sum(axis=0)
    fn = (~pred & y_true).sum(axis=0)
    micro = _f1(tp.sum(), fp.sum(), fn.sum())
    per_class = [_f1(a, b, c) for a, b, c in zip(tp, fp, fn)]
    macro = float(np.mean(per_class)) if per_class else UNDEFINED
    return float(micro), macro


def auroc_binary(y, s):
    """ROC area for one class via the Mann-Whitney statistic; ``nan`` if one-sided."""
    y = np.asarray(y, dtype=bool)
    s = np.asarray(s, dtype=np.float64)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return UNDEFINED
    ranks = rankdata(s, method="average")
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision_binary(y, s):
    """Average precision for one class with tied scores handled as blocks."""
    y = np.asarray(y, dtype=bool)
    s = np.asarray(s, dtype=np.float64)
    n_pos = int(y.sum())
    if n_pos == 0:
        return UNDEFINED
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    # last index of each tie block
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tp_cum = np.cumsum(y_sorted)[ends]
    precision = tp_cum / (ends + 1.0)
    recall_gain = np.diff(np.r_[0, tp_cum]) / n_pos
    return float((recall_gain * precision).sum())


def _per_class(fn, y_true, scores):
    return np.array([fn(y_true[:, c], scores[:, c]) for c in range(y_true.shape[1])])


def _macro(values):
    values = values[~np.isnan(values)]
    return float(values.mean()) if values.size else UNDEFINED


def macro_auroc(y_true, scores):
    y_true, scores = _check_inputs(y_true, scores)
    return _macro(_per_class(auroc_binary, y_true, scores))


def macro_ap(y_true, scores):
    y_true, scores = _check_inputs(y_true, scores)
    return _macro(_per_class(average_precision_binary, y_true, scores))


@dataclass
class MetricReport:
    micro_f1: float
    macro_f1: float
    macro_auroc: float
    macro_ap: float
    per_class_auroc: np.ndarray
    per_class_ap: np.ndarray
    threshold: float = 0.5
    skipped_classes: list = field(default_factory=list)

    def summary(self, percent=False):
        scale = 100.0 if percent else 1.0
        return {
            "micro_f1": self.micro_f1 * scale,
            "macro_f1": self.macro_f1 * scale,
            "macro_auroc": self.macro_auroc * scale,
            "macro_ap": self.macro_ap * scale,
        }


def evaluate(y_true, scores, threshold=0.5):
    """All four metrics plus per-class AUROC/AP and the skip list."""
    y_true, scores = _check_inputs(y_true, scores)
    auroc = _per_class(auroc_binary, y_true, scores)
    ap = _per_class(average_precision_binary, y_true, scores)
    n_pos = y_true.sum(axis=0)
    skipped = []
    for c in range(y_true.shape[1]):
        if n_pos[c] == 0:
            skipped.append((c, "auroc,ap", "no positive examples"))
        elif n_pos[c] == y_true.shape[0]:
            skipped.append((c, "auroc", "no negative examples"))
    micro, macro = f1_scores(y_true, scores, threshold)
    return MetricReport(micro_f1=micro, macro_f1=macro, macro_auroc=_macro(auroc),
                        macro_ap=_macro(ap), per_class_auroc=auroc, per_class_ap=ap,
                        threshold=threshold, skipped_classes=skipped)


@dataclass
class AuditReport:
    """Scores of two trivial predictors on the same labels.

    ``all_negative`` scores 0 everywhere. ``has_label`` scores 1 for every
    class on nodes that carry any label and 0 on unlabeled nodes.
    """

    all_negative: MetricReport
    has_label: MetricReport
    unlabeled_fraction: float

    @property
    def gaps(self):
        """``macro_auroc - macro_ap`` per predictor."""
        return {name: rep.macro_auroc - rep.macro_ap
                for name, rep in (("all_negative", self.all_negative), ("has_label", self.has_label))}


def degenerate_audit(y_true, threshold=0.5):
    """Evaluate the two reference predictors that expose the AUROC sparsity bias."""
    y_true = check_label_matrix(y_true)
    constant = np.zeros(y_true.shape)
    labeled = y_true.any(axis=1)
    oracle = np.repeat(labeled[:, None].astype(np.float64), y_true.shape[1], axis=1)
    return AuditReport(all_negative=evaluate(y_true, constant, threshold),
                       has_label=evaluate(y_true, oracle, threshold),
                       unlabeled_fraction=float(1 - labeled.mean()) if labeled.size else 0.0)
