"""Metrics, ROC/AUC, pooled cross-validated evaluation, and ratio sweeps.

Evaluation protocol: stratified k-fold CV with pooled out-of-fold
predictions, so one confusion matrix covers every input row exactly
once. Standardization statistics and synthetic oversampling are fitted
on training folds only; held-out rows stay untouched.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import models as models_mod
from .errors import EmptyMatrix, LengthMismatch, NoPositives, SingleClass
from .features import FeatureSchema, encode, standardize
from .resample import ORIGINAL, SmoteConfig, smote, stratified_folds
from .seeding import derive_seed

DEFAULT_THRESHOLD = 0.5
MODEL_KINDS = ("logistic", "gbm")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


@dataclass(frozen=True)
class RocCurve:
    """Operating points swept over descending score thresholds."""

    fpr: tuple[float, ...]
    tpr: tuple[float, ...]
    thresholds: tuple[float, ...]  # +inf first, one per distinct score after

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.fpr, self.tpr, self.thresholds))


def confusion(
    labels, probabilities, threshold: float = DEFAULT_THRESHOLD
) -> ConfusionMatrix:
    """Tally counts at a probability cutoff; p >= threshold is positive."""
    y = np.asarray(labels)
    p = np.asarray(probabilities)
    if y.shape != p.shape:
        raise LengthMismatch(f"labels {y.shape} vs probabilities {p.shape}")
    pred = p >= threshold
    pos = y == 1
    return ConfusionMatrix(
        tp=int(np.sum(pred & pos)),
        fn=int(np.sum(~pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
    )


def sensitivity(cm: ConfusionMatrix) -> float:
    if cm.tp + cm.fn == 0:
        raise NoPositives("no positive rows: sensitivity undefined")
    return cm.tp / (cm.tp + cm.fn)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyMatrix("empty confusion matrix: accuracy undefined")
    return (cm.tp + cm.tn) / cm.total


def roc_curve(labels, scores) -> RocCurve:
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise LengthMismatch(f"labels {y.shape} vs scores {s.shape}")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes present")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = (y[order] == 1).astype(np.int64)

    # Last index of each tie group: one operating point per distinct score.
    boundary = np.flatnonzero(np.diff(s_sorted) != 0)
    boundary = np.append(boundary, len(s_sorted) - 1)

    tps = np.cumsum(y_sorted)[boundary]
    fps = boundary + 1 - tps
    fpr = np.concatenate([[0.0], fps / n_neg])
    tpr = np.concatenate([[0.0], tps / n_pos])
    thresholds = np.concatenate([[np.inf], s_sorted[boundary]])
    return RocCurve(fpr=tuple(fpr), tpr=tuple(tpr), thresholds=tuple(thresholds))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC curve."""
    fpr = np.asarray(curve.fpr)
    tpr = np.asarray(curve.tpr)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def write_roc_csv(curve: RocCurve, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["fpr", "tpr", "threshold"])
        for f, t, thr in curve.points:
            writer.writerow([repr(float(f)), repr(float(t)), repr(float(thr))])


# --- cross-validated evaluation ----------------------------------------------

@dataclass(frozen=True)
class FoldTrace:
    fold: int
    n_train: int
    n_test: int
    n_synthetic: int


@dataclass
class CvResult:
    confusion: ConfusionMatrix
    auc: float
    curve: RocCurve
    pooled_scores: np.ndarray
    labels: np.ndarray
    traces: list[FoldTrace]


def _fit_and_score(model_kind, train_data, test_matrix, train_config):
    if model_kind == "logistic":
        model = models_mod.fit_logistic(train_data, train_config)
        return models_mod.predict_proba_logistic(model, test_matrix)
    if model_kind == "gbm":
        model = models_mod.fit_gbm(train_data, train_config)
        return models_mod.predict_proba_gbm(model, test_matrix)
    raise ValueError(f"unknown model kind {model_kind!r}")


def cv_evaluate(
    profiles: Sequence,
    model_kind: str,
    smote_config: SmoteConfig,
    train_config: models_mod.TrainConfig,
    n_folds: int = 5,
    seed: int = 0,
    include_income: bool = False,
) -> CvResult:
    """Pooled out-of-fold evaluation over stratified folds.

    Per fold: age imputation and standardization statistics are fitted
    on the training rows, oversampling is applied to the training rows
    only, and the held-out rows are scored with the fitted model. The
    pooled scores cover every profile exactly once. Fold assignment and
    per-fold oversampling seeds derive from ``seed`` via stable labels,
    so identical inputs reproduce identical results.
    """
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"model_kind must be one of {MODEL_KINDS}")
    if include_income and any(p.income is None for p in profiles):
        raise ValueError(
            "include_income requires profiles with income; filter first so "
            "the pooled matrix still covers every row"
        )

    labels = np.asarray([p.readmit for p in profiles], dtype=np.int64)
    schema = FeatureSchema(include_income=include_income)
    plan = stratified_folds(labels, n_folds, derive_seed(seed, "folds"))

    pooled = np.empty(len(labels), dtype=np.float64)
    traces: list[FoldTrace] = []
    for fold in range(n_folds):
        train_idx = plan.train_indices(fold)
        test_idx = plan.test_indices(fold)
        train_profiles = [profiles[i] for i in train_idx]
        test_profiles = [profiles[i] for i in test_idx]

        enc_train = encode(train_profiles, schema)
        std_train, stats = standardize(enc_train.dataset)
        enc_test = encode(test_profiles, schema, age_median=enc_train.age_median)
        std_test, _ = standardize(enc_test.dataset, stats)

        fold_config = replace(
            smote_config, seed=derive_seed(seed, "smote", fold)
        )
        train_final = smote(std_train, fold_config)
        pooled[test_idx] = _fit_and_score(
            model_kind, train_final, std_test.matrix, train_config
        )
        traces.append(
            FoldTrace(
                fold=fold,
                n_train=len(train_idx),
                n_test=len(test_idx),
                n_synthetic=train_final.n_rows - std_train.n_rows,
            )
        )

    cm = confusion(labels, pooled)
    curve = roc_curve(labels, pooled)
    return CvResult(
        confusion=cm,
        auc=auc(curve),
        curve=curve,
        pooled_scores=pooled,
        labels=labels,
        traces=traces,
    )


# --- ratio sweep ---------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    ratio: str
    accuracy: float
    tp: int
    fn: int
    fp: int
    tn: int
    auc: float
    sensitivity: float

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "accuracy": self.accuracy,
            "tp": self.tp,
            "fn": self.fn,
            "fp": self.fp,
            "tn": self.tn,
            "auc": self.auc,
            "sensitivity": self.sensitivity,
        }


@dataclass
class SweepReport:
    rows: list[SweepRow]
    curves: dict[str, RocCurve]


def ratio_label(ratio: float | str) -> str:
    return ORIGINAL if ratio == ORIGINAL else repr(float(ratio))


def sweep(
    profiles: Sequence,
    ratios: Sequence[float | str],
    model_kind: str = "gbm",
    k: int = 5,
    train_config: models_mod.TrainConfig | None = None,
    n_folds: int = 5,
    seed: int = 0,
    include_income: bool = False,
) -> SweepReport:
    """One pooled CV evaluation per oversampling ratio, in the given order.

    Each ratio gets an independent seed derived from the master seed and
    its position, so rows are reproducible in isolation.
    """
    if not ratios:
        raise ValueError("ratios must be non-empty")
    if train_config is None:
        train_config = models_mod.TrainConfig()

    rows: list[SweepRow] = []
    curves: dict[str, RocCurve] = {}
    for i, ratio in enumerate(ratios):
        sub_seed = derive_seed(seed, "ratio", i)
        result = cv_evaluate(
            profiles,
            model_kind,
            SmoteConfig(ratio=ratio, k=k, seed=sub_seed),
            train_config,
            n_folds=n_folds,
            seed=sub_seed,
            include_income=include_income,
        )
        label = ratio_label(ratio)
        cm = result.confusion
        rows.append(
            SweepRow(
                ratio=label,
                accuracy=accuracy(cm),
                tp=cm.tp,
                fn=cm.fn,
                fp=cm.fp,
                tn=cm.tn,
                auc=result.auc,
                sensitivity=sensitivity(cm),
            )
        )
        curves[label] = result.curve
    return SweepReport(rows=rows, curves=curves)
