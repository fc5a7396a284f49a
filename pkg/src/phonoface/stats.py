"""Per-pair predictability testing on repeated MSE ratios.

For a (phoneme, measurement) pair, each repeat contributes the ratio of the
trained estimator's MSE to the MSE of a constant chance-level predictor (the
training-split target mean). A one-sided Student-t confidence interval on
the mean ratio decides the pair:

    ci = mean(ratios) -/+ t_{1-alpha, N-1} * sd(ratios) / sqrt(N)

with sd the sample standard deviation (N-1 divisor). The pair is predictable
iff the upper bound is strictly below 1; its score is ``1 - ci_upper``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegeneratePairError


@dataclass(frozen=True)
class RepeatResult:
    """One repeat's estimator MSE, chance MSE, and their ratio."""

    repeat_index: int
    epsilon: float
    epsilon_chance: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not math.isfinite(self.epsilon_chance) or self.epsilon_chance <= 0:
            raise DegeneratePairError(
                f"chance MSE must be positive, got {self.epsilon_chance} "
                "(constant targets in the test split?)"
            )

    @property
    def ratio(self) -> float:
        return self.epsilon / self.epsilon_chance


@dataclass(frozen=True)
class PairTestResult:
    """Decision record for one (phoneme, measurement) pair."""

    phoneme: str
    am: str
    repeats: tuple[RepeatResult, ...]
    mean_ratio: float
    std_ratio: float
    ci_lower: float
    ci_upper: float
    predictable: bool
    score: float

    @property
    def n_repeats(self) -> int:
        return len(self.repeats)


@dataclass(frozen=True)
class PredictabilityMatrix:
    """Full pair grid plus per-phoneme and per-measurement mean scores."""

    grid: dict[tuple[str, str], PairTestResult]
    phoneme_means: dict[str, float]
    am_means: dict[str, float]


def chance_estimator(train_targets) -> float:
    """Constant chance-level predictor: the training-target mean."""
    targets = np.asarray(train_targets, dtype=np.float64)
    if targets.size == 0:
        raise ValueError("cannot compute a chance level from no targets")
    return float(targets.mean())


def chance_mse(c: float, test_targets) -> float:
    """Mean squared deviation of the test targets from the constant ``c``."""
    targets = np.asarray(test_targets, dtype=np.float64)
    if targets.size == 0:
        raise ValueError("cannot compute chance MSE on no targets")
    return float(np.mean((c - targets) ** 2))


def t_critical(alpha: float, dof: int) -> float:
    """Upper (1 - alpha) quantile of Student's t with ``dof`` degrees of freedom.

    Computed through the inverse regularized incomplete beta function via
    ``P(T > t) = I_x(dof/2, 1/2) / 2`` with ``x = dof / (dof + t^2)``.
    """
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 0.5), got {alpha}")
    if dof < 1:
        raise ValueError(f"dof must be >= 1, got {dof}")
    x = float(special.betaincinv(dof / 2.0, 0.5, 2.0 * alpha))
    return math.sqrt(dof * (1.0 - x) / x)


def ci_bounds(ratios, alpha: float) -> tuple[float, float]:
    """One-sided-t interval bounds ``mean -/+ t * sd / sqrt(N)`` (sd uses N-1)."""
    r = np.asarray(ratios, dtype=np.float64)
    if r.size < 2:
        raise ValueError(f"need at least 2 ratios, got {r.size}")
    mu = float(r.mean())
    sd = float(r.std(ddof=1))
    half = t_critical(alpha, r.size - 1) * sd / math.sqrt(r.size)
    return mu - half, mu + half


def decide_pair(repeats, alpha: float = 0.05, *, phoneme: str = "", am: str = "") -> PairTestResult:
    """Turn per-repeat MSE pairs into a predictability decision.

    ``predictable`` is strict: an upper bound exactly at 1 does not reject.
    """
    repeats = tuple(repeats)
    if len(repeats) < 2:
        raise ValueError(f"need at least 2 repeats, got {len(repeats)}")
    for rep in repeats:
        if rep.epsilon_chance <= 0:
            raise DegeneratePairError(
                f"pair ({phoneme!r}, {am!r}): repeat {rep.repeat_index} has "
                "non-positive chance MSE"
            )
    ratios = np.array([rep.ratio for rep in repeats])
    lower, upper = ci_bounds(ratios, alpha)
    return PairTestResult(
        phoneme=phoneme,
        am=am,
        repeats=repeats,
        mean_ratio=float(ratios.mean()),
        std_ratio=float(ratios.std(ddof=1)),
        ci_lower=lower,
        ci_upper=upper,
        predictable=bool(upper < 1.0),
        score=float(1.0 - upper),
    )


def aggregate(results, phonemes=None, ams=None) -> PredictabilityMatrix:
    """Assemble the pair grid and unweighted marginal mean scores.

    ``phonemes``/``ams`` optionally fix the label universe; labels without
    any entry are dropped with a warning. Mean computation iterates in sorted
    key order, so the outcome is independent of input ordering.
    """
    grid = {(r.phoneme, r.am): r for r in results}
    phonemes = sorted({p for p, _ in grid}) if phonemes is None else list(phonemes)
    ams = sorted({a for _, a in grid}) if ams is None else list(ams)

    def marginal(labels, selector):
        means = {}
        for label in labels:
            scores = [grid[key].score for key in sorted(grid) if selector(key) == label]
            if not scores:
                warnings.warn(f"no pair results for {label!r}; marginal omitted")
                continue
            means[label] = float(np.mean(scores))
        return means

    return PredictabilityMatrix(
        grid=grid,
        phoneme_means=marginal(phonemes, lambda key: key[0]),
        am_means=marginal(ams, lambda key: key[1]),
    )


# ---------------------------------------------------------------------------
# CSV serialization (all reals with 9 significant digits)

def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def write_results_csv(path, results) -> None:
    """``phoneme,am,mean_ratio,ci_lower,ci_upper,score,predictable,n_repeats``
    sorted by (phoneme, am)."""
    rows = sorted(results, key=lambda r: (r.phoneme, r.am))
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ("phoneme", "am", "mean_ratio", "ci_lower", "ci_upper",
             "score", "predictable", "n_repeats")
        )
        for r in rows:
            writer.writerow(
                (r.phoneme, r.am, _fmt(r.mean_ratio), _fmt(r.ci_lower),
                 _fmt(r.ci_upper), _fmt(r.score),
                 "true" if r.predictable else "false", r.n_repeats)
            )


def read_results_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    for row in rows:
        for key in ("mean_ratio", "ci_lower", "ci_upper", "score"):
            row[key] = float(row[key])
        row["predictable"] = row["predictable"] == "true"
        row["n_repeats"] = int(row["n_repeats"])
    return rows


def write_marginals_csv(path, matrix: PredictabilityMatrix) -> None:
    """``kind,label,mean_score,rank`` with rank 1 = highest mean per kind."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(("kind", "label", "mean_score", "rank"))
        for kind, means in (("phoneme", matrix.phoneme_means), ("am", matrix.am_means)):
            ordered = sorted(means.items(), key=lambda kv: (-kv[1], kv[0]))
            for rank, (label, mean_score) in enumerate(ordered, start=1):
                writer.writerow((kind, label, _fmt(mean_score), rank))


def read_marginals_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    for row in rows:
        row["mean_score"] = float(row["mean_score"])
        row["rank"] = int(row["rank"])
    return rows
