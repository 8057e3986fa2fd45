"""Ridge regression to quality scores and the correlation evaluation protocol.

Ridge is solved in closed form (normal equations on centered data, intercept
never penalized).  Evaluation follows the standard protocol: random
70/10/20 train/validation/test splits repeated 10 times, the regularizer
chosen on the validation set by L1 error, and mean SROCC/PLCC over repeats
reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, ValidationError
from .seeding import derive_seed

LAMBDA_GRID: tuple[float, ...] = tuple(10.0**k for k in range(-3, 4))


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray
    intercept: float

    def predict(self, features) -> np.ndarray:
        X = _as_features(features)
        if X.shape[1] != self.weights.shape[0]:
            raise ValidationError(
                f"feature dim {X.shape[1]} != model dim {self.weights.shape[0]}"
            )
        return X @ self.weights + self.intercept


def _as_features(values) -> np.ndarray:
    X = np.asarray(values, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValidationError("feature matrix must be 2-D and nonempty")
    if not np.isfinite(X).all():
        raise ValidationError("feature matrix contains non-finite values")
    return X


def _as_targets(values, n_rows: int) -> np.ndarray:
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != n_rows:
        raise ValidationError(
            f"target vector must have one entry per row ({n_rows})"
        )
    if not np.isfinite(y).all():
        raise ValidationError("target vector contains non-finite values")
    return y


def ridge_fit(features, targets, lam: float) -> RidgeModel:
    """Minimize ||Xw + b - y||^2 + lam ||w||^2 in closed form.

    Centering makes the intercept unpenalized and the system symmetric
    positive (semi)definite.  A singular system at lam = 0 is reported,
    never silently regularized.
    """
    if lam < 0:
        raise ValidationError(f"ridge penalty must be nonnegative, got {lam}")
    X = _as_features(features)
    y = _as_targets(targets, X.shape[0])
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    singular_msg = (
        "normal equations are singular at lam=0; add regularization "
        "or drop collinear features"
    )
    if lam == 0.0 and np.linalg.matrix_rank(Xc) < X.shape[1]:
        # rounding can hand Cholesky a spuriously positive pivot on an
        # exactly collinear system, so rank-check before solving
        raise DegenerateInputError(singular_msg)
    gram = Xc.T @ Xc + lam * np.eye(X.shape[1])
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise DegenerateInputError(singular_msg)
    w = np.linalg.solve(chol.T, np.linalg.solve(chol, Xc.T @ yc))
    return RidgeModel(weights=w, intercept=float(y_mean - x_mean @ w))


def select_lambda(
    train_features,
    train_targets,
    val_features,
    val_targets,
    grid: tuple[float, ...] = LAMBDA_GRID,
) -> float:
    """Grid-search the ridge penalty, minimizing validation L1 error.

    Ties go to the smaller penalty (the grid is scanned in ascending
    order and only strict improvements switch).
    """
    if not grid:
        raise ValidationError("lambda grid must be nonempty")
    best_lam = None
    best_err = np.inf
    for lam in sorted(grid):
        model = ridge_fit(train_features, train_targets, lam)
        err = float(np.abs(model.predict(val_features) - np.asarray(val_targets)).mean())
        if err < best_err:
            best_err = err
            best_lam = lam
    return best_lam


def _check_paired(a, b) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValidationError("score lists must be 1-D")
    if x.shape[0] != y.shape[0]:
        raise ValidationError(
            f"score lists differ in length: {x.shape[0]} vs {y.shape[0]}"
        )
    if x.shape[0] < 2:
        raise ValidationError("need at least 2 scores for a correlation")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValidationError("scores contain non-finite values")
    return x, y


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank span."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.shape[0], dtype=np.float64)
    i = 0
    while i < x.shape[0]:
        j = i
        while j + 1 < x.shape[0] and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def plcc(a, b) -> float:
    """Pearson linear correlation on raw values, in [-1, 1]."""
    x, y = _check_paired(a, b)
    xd = x - x.mean()
    yd = y - y.mean()
    denom = np.sqrt((xd**2).sum() * (yd**2).sum())
    if denom == 0.0:
        raise DegenerateInputError(
            "correlation undefined: at least one score list is constant"
        )
    return float(np.clip((xd * yd).sum() / denom, -1.0, 1.0))


def srocc(a, b) -> float:
    """Spearman rank-order correlation: Pearson on average ranks."""
    x, y = _check_paired(a, b)
    return plcc(average_ranks(x), average_ranks(y))


@dataclass(frozen=True)
class SplitProtocol:
    """Random split fractions, repeat count, and the driving seed."""

    train_frac: float = 0.70
    val_frac: float = 0.10
    test_frac: float = 0.20
    repeats: int = 10
    seed: int = 0

    def __post_init__(self):
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1, got {total}")
        if min(self.train_frac, self.val_frac, self.test_frac) < 0:
            raise ValidationError("split fractions must be nonnegative")
        if self.repeats < 1:
            raise ValidationError(f"repeats must be >= 1, got {self.repeats}")


def split_indices(
    n: int, protocol: SplitProtocol, repeat: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic permutation split for one repeat.

    Train and validation sizes are floored; the remainder is the test set.
    """
    rng = np.random.Generator(
        np.random.Philox(key=derive_seed(protocol.seed, "split", repeat))
    )
    perm = rng.permutation(n)
    n_train = int(np.floor(protocol.train_frac * n))
    n_val = int(np.floor(protocol.val_frac * n))
    return (
        perm[:n_train],
        perm[n_train : n_train + n_val],
        perm[n_train + n_val :],
    )


@dataclass(frozen=True)
class RepeatResult:
    repeat: int
    lam: float
    srocc: float
    plcc: float


@dataclass(frozen=True)
class EvaluationReport:
    per_repeat: tuple[RepeatResult, ...]
    mean_srocc: float = field(init=False)
    mean_plcc: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "mean_srocc", float(np.mean([r.srocc for r in self.per_repeat]))
        )
        object.__setattr__(
            self, "mean_plcc", float(np.mean([r.plcc for r in self.per_repeat]))
        )


def evaluate(features, mos, protocol: SplitProtocol) -> EvaluationReport:
    """Run the full split/select/fit/test protocol and report correlations."""
    X = _as_features(features)
    y = _as_targets(mos, X.shape[0])
    if X.shape[0] < 10:
        raise ValidationError(
            f"need at least 10 samples for the split protocol, got {X.shape[0]}"
        )
    results = []
    for repeat in range(protocol.repeats):
        train, val, test = split_indices(X.shape[0], protocol, repeat)
        lam = select_lambda(X[train], y[train], X[val], y[val])
        model = ridge_fit(X[train], y[train], lam)
        predictions = model.predict(X[test])
        results.append(
            RepeatResult(
                repeat=repeat,
                lam=lam,
                srocc=srocc(predictions, y[test]),
                plcc=plcc(predictions, y[test]),
            )
        )
    return EvaluationReport(per_repeat=tuple(results))
