"""Evaluation statistics: confusion metrics, ROC/AUC, t-based CIs, OLS.

The Student-t tail machinery (regularized incomplete beta via a Lentz
continued fraction) and the Cholesky normal-equation solver are implemented
here directly so the test suite can check them against independent oracles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

BETA_TOL = 1e-10
BETA_MAX_ITER = 300
CONDITION_WARN = 1e12


class MetricsError(Exception):
    pass


class EmptyCountsError(MetricsError):
    pass


class OneClassOnlyError(MetricsError):
    pass


class TooFewSamplesError(MetricsError):
    pass


class SingularError(MetricsError):
    pass


class UnderdeterminedError(MetricsError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassificationMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    degenerate: bool  # a zero denominator was clamped to 0


@dataclass(frozen=True)
class RocCurve:
    points: tuple[tuple[float, float], ...]  # (fpr, tpr), staircase
    auc: float


@dataclass(frozen=True)
class OLSResult:
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_statistics: np.ndarray
    p_values: np.ndarray
    r_squared: float
    dof: int


def classification_metrics(counts: ConfusionCounts) -> ClassificationMetrics:
    if counts.total() == 0:
        raise EmptyCountsError("no observations")
    degenerate = False
    if counts.tp + counts.fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = counts.tp / (counts.tp + counts.fp)
    if counts.tp + counts.fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = counts.tp / (counts.tp + counts.fn)
    if precision + recall == 0.0:
        f1, degenerate = 0.0, True
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    accuracy = (counts.tp + counts.tn) / counts.total()
    return ClassificationMetrics(precision, recall, f1, accuracy, degenerate)


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> RocCurve:
    """Threshold sweep over unique scores, ties grouped; AUC by trapezoid."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == -1))
    if n_pos + n_neg != labels.size:
        raise ValueError("labels must be -1 or +1")
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnlyError("need both classes for a ROC curve")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    points = [(0.0, 0.0)]
    auc = 0.0
    tp = fp = 0
    i = 0
    while i < sorted_scores.size:
        j = i
        while j < sorted_scores.size and sorted_scores[j] == sorted_scores[i]:
            j += 1
        block = sorted_labels[i:j]
        d_tp = int(np.sum(block == 1))
        d_fp = block.size - d_tp
        prev_tpr = tp / n_pos
        tp += d_tp
        fp += d_fp
        tpr = tp / n_pos
        fpr = fp / n_neg
        auc += (d_fp / n_neg) * (prev_tpr + tpr) / 2.0
        points.append((fpr, tpr))
        i = j
    return RocCurve(tuple(points), auc)


# --------------------------------------------------------- Student-t machinery


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETA_TOL:
            return h
    warnings.warn("incomplete beta continued fraction did not converge")
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x out of [0,1]: {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, dof: int) -> float:
    """One-sided survival P(T > t)."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    x = dof / (dof + t * t)
    tail = 0.5 * regularized_incomplete_beta(dof / 2.0, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


def student_t_two_sided_p(t: float, dof: int) -> float:
    return 2.0 * student_t_sf(abs(t), dof)


def student_t_quantile(p: float, dof: int) -> float:
    """Inverse CDF by bisection on the analytic CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p out of (0,1): {p}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -student_t_quantile(1.0 - p, dof)
    lo, hi = 0.0, 2.0
    while 1.0 - student_t_sf(hi, dof) < p:
        hi *= 2.0
        if hi > 1e12:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 1.0 - student_t_sf(mid, dof) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def mean_ci(samples: Sequence[float], level: float = 0.95) -> tuple[float, float]:
    """Sample mean and Student-t half-width at the given confidence level."""
    data = np.asarray(samples, dtype=np.float64)
    if data.size < 2:
        raise TooFewSamplesError(f"need n >= 2, got {data.size}")
    mean = float(np.mean(data))
    sd = float(np.std(data, ddof=1))
    quantile = student_t_quantile(0.5 + level / 2.0, data.size - 1)
    return mean, quantile * sd / math.sqrt(data.size)


# ----------------------------------------------------------------------- OLS


def cholesky_solve(a: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve a x = rhs for symmetric positive-definite a; returns (x, a^-1)."""
    a = np.asarray(a, dtype=np.float64)
    k = a.shape[0]
    low = np.zeros_like(a)
    for i in range(k):
        for j in range(i + 1):
            s = a[i, j] - low[i, :j] @ low[j, :j]
            if i == j:
                # pivot must stay a meaningful fraction of its diagonal entry,
                # otherwise the column is numerically dependent on earlier ones
                if a[i, i] <= 0.0 or s <= 1e-12 * a[i, i]:
                    raise SingularError("matrix is not positive definite")
                low[i, j] = math.sqrt(s)
            else:
                low[i, j] = s / low[j, j]

    def solve_vec(v: np.ndarray) -> np.ndarray:
        y = np.zeros(k)
        for i in range(k):
            y[i] = (v[i] - low[i, :i] @ y[:i]) / low[i, i]
        x = np.zeros(k)
        for i in range(k - 1, -1, -1):
            x[i] = (y[i] - low[i + 1 :, i] @ x[i + 1 :]) / low[i, i]
        return x

    inv = np.column_stack([solve_vec(np.eye(k)[:, i]) for i in range(k)])
    if rhs.ndim == 1:
        return solve_vec(rhs), inv
    return np.column_stack([solve_vec(rhs[:, i]) for i in range(rhs.shape[1])]), inv


def ols_fit(x: np.ndarray, y: np.ndarray) -> OLSResult:
    """Normal-equation least squares with t-statistics and two-sided p-values.

    The design is used as given; include a column of ones for an intercept.
    R-squared is computed against the centered total sum of squares, which is
    the standard definition when an intercept column is present.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("design must be 2-D")
    n, k = x.shape
    if y.shape != (n,):
        raise ValueError(f"y must have shape ({n},)")
    if n <= k:
        raise UnderdeterminedError(f"n={n} rows for k={k} regressors")
    xtx = x.T @ x
    cond = _condition_estimate(xtx)
    if cond > CONDITION_WARN:
        warnings.warn(f"design is ill-conditioned (cond ~ {cond:.2e})")
    beta, xtx_inv = cholesky_solve(xtx, x.T @ y)
    residuals = y - x @ beta
    rss = float(residuals @ residuals)
    sigma2 = rss / (n - k)
    std_errors = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(std_errors > 0, beta / std_errors, np.inf * np.sign(beta))
    p_values = np.array([student_t_two_sided_p(float(t), n - k) for t in t_stats])
    tss = float(np.sum((y - np.mean(y)) ** 2))
    r_squared = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0.0 else 0.0)
    r_squared = min(max(r_squared, 0.0), 1.0) if tss > 0 else r_squared
    return OLSResult(beta, std_errors, t_stats, p_values, r_squared, n - k)


def _condition_estimate(a: np.ndarray) -> float:
    eigs = np.linalg.eigvalsh(a)
    smallest = float(np.min(np.abs(eigs)))
    if smallest == 0.0:
        return math.inf
    return float(np.max(np.abs(eigs))) / smallest


ATTACK_REGRESSORS = ("normal", "troll", "random", "traitor", "orchestrated")
IMPACT_METRICS = ("precision", "recall", "f1", "accuracy")


def attack_impact_regression(
    runs: Sequence[Mapping[str, float]],
) -> dict[str, OLSResult]:
    """Regress each quality metric on the user-type percentages.

    Each run record carries the type percentages (orchestrated = slander +
    whitewash combined) and the four quality metrics.  An intercept column
    is prepended; target share is omitted (it is nearly collinear with the
    rest).
    """
    if len(runs) < 30:
        raise UnderdeterminedError(f"need >= 30 runs, got {len(runs)}")
    design = np.column_stack(
        [np.ones(len(runs))] + [np.array([r[name] for r in runs]) for name in ATTACK_REGRESSORS]
    )
    out = {}
    for metric in IMPACT_METRICS:
        y = np.array([r[metric] for r in runs])
        out[metric] = ols_fit(design, y)
    return out


def format_ols_table(results: Mapping[str, OLSResult]) -> str:
    """Fixed-width text rendering of per-metric regression summaries."""
    lines = []
    for metric, res in results.items():
        lines.append(f"{metric:<9s}  R^2 = {res.r_squared:.3f}")
        lines.append(f"{'term':<14s}{'coef':>12s}{'std err':>12s}{'t':>10s}{'P>|t|':>10s}")
        names = ("intercept",) + ATTACK_REGRESSORS
        for name, c, se, t, p in zip(
            names, res.coefficients, res.std_errors, res.t_statistics, res.p_values
        ):
            lines.append(f"{name:<14s}{c:>12.5f}{se:>12.5f}{t:>10.3f}{p:>10.3f}")
        lines.append("")
    return "\n".join(lines)
