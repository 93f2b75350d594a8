"""Detector-score calibration and top-object selection.

Raw per-category classifier margins arrive as data; this module maps them to
probabilities with Platt's sigmoid p(s) = 1 / (1 + exp(A*s + B)) and picks
the n most probable categories per image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DegenerateLabels


@dataclass(frozen=True)
class DetectionScores:
    image_id: str
    scores: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.scores)):
            raise DataError(f"non-finite detector score for image {self.image_id}")


@dataclass
class PlattFit:
    """Result of fitting one category's sigmoid."""

    a: float
    b: float
    nll_path: list[float] = field(default_factory=list)


@dataclass
class PlattParams:
    """Per-category (A, B) sigmoid parameters."""

    categories: tuple[str, ...]
    a: np.ndarray
    b: np.ndarray

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for name, a, b in zip(self.categories, self.a, self.b):
                f.write(f"{name} {float(a)!r} {float(b)!r}\n")

    @classmethod
    def load(cls, path: str | Path) -> "PlattParams":
        names, avals, bvals = [], [], []
        for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            parts = line.split()
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 'name A B'")
            names.append(parts[0])
            avals.append(float(parts[1]))
            bvals.append(float(parts[2]))
        return cls(tuple(names), np.array(avals), np.array(bvals))


@dataclass(frozen=True)
class TopObjects:
    image_id: str
    ranked: tuple[tuple[int, float], ...]

    @property
    def categories(self) -> tuple[int, ...]:
        return tuple(c for c, _ in self.ranked)


def _nll_and_derivs(theta, s, t):
    a, b = theta
    z = a * s + b
    # p = sigmoid(-z); nll written via softplus for stability
    nll = float(np.sum(np.where(z > 0, z, 0.0) + np.log1p(np.exp(-np.abs(z))) - (1.0 - t) * z))
    p = 1.0 / (1.0 + np.exp(z))
    r = t - p  # dNLL/dz per sample
    grad = np.array([np.dot(r, s), np.sum(r)])
    w = p * (1.0 - p)
    hess = np.array(
        [
            [np.dot(w, s * s), np.dot(w, s)],
            [np.dot(w, s), np.sum(w)],
        ]
    )
    return nll, grad, hess


def fit_platt(
    scores, labels, tol: float = 1e-8, max_iter: int = 100
) -> PlattFit:
    """Fit (A, B) by damped Newton descent on the negative log-likelihood.

    Targets use Platt's smoothing, t+ = (N+ + 1)/(N+ + 2) and
    t- = 1/(N- + 2), which keeps the optimum finite even for separable data.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("need at least one positive and one negative label")
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    theta = np.array([0.0, np.log((n_neg + 1.0) / (n_pos + 1.0))])
    nll, grad, hess = _nll_and_derivs(theta, s, t)
    path = [nll]
    for _ in range(max_iter):
        if np.linalg.norm(grad) < tol:
            break
        # small ridge keeps the Hessian invertible on degenerate score sets
        step = np.linalg.solve(hess + 1e-12 * np.eye(2), grad)
        alpha = 1.0
        for _bt in range(50):
            cand = theta - alpha * step
            cand_nll, cand_grad, cand_hess = _nll_and_derivs(cand, s, t)
            if cand_nll <= nll:
                theta, nll, grad, hess = cand, cand_nll, cand_grad, cand_hess
                break
            alpha *= 0.5
        else:
            break
        path.append(nll)
    return PlattFit(float(theta[0]), float(theta[1]), path)


def calibrate(s: float, params: PlattParams, category: int) -> float:
    """Probability for a raw score under the category's fitted sigmoid."""
    return float(1.0 / (1.0 + np.exp(params.a[category] * s + params.b[category])))


def calibrate_all(scores: np.ndarray, params: PlattParams) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(params.a * scores + params.b))


def top_n(scores: DetectionScores, params: PlattParams, n: int) -> TopObjects:
    """The n categories with the highest calibrated probability.

    Ties break toward the lower category index, so output is deterministic.
    """
    if not 1 <= n <= scores.scores.shape[0]:
        raise DataError(f"n must be in [1, {scores.scores.shape[0]}]")
    probs = calibrate_all(scores.scores, params)
    order = sorted(range(probs.shape[0]), key=lambda c: (-probs[c], c))
    return TopObjects(
        scores.image_id, tuple((c, float(probs[c])) for c in order[:n])
    )
