"""Bradley-Terry strength fitting from pairwise preference counts.

P(i beats j) = e^{s_i} / (e^{s_i} + e^{s_j}).  Scores are anchored at
s[items[0]] = 0 (the gauge is otherwise free), fitted by Newton iterations
on the reduced system, with standard errors from the inverse observed
information (the anchor reports stderr 0 by convention).
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    DisconnectedGraphError,
    MissingFileError,
    SeparationError,
    TecoError,
)

_GRAD_TOL = 1e-10
_MAX_ITER = 500

# |s| beyond this cannot arise from finite two-sided counts; treat as
# divergence toward an infinite MLE.
_DIVERGE = 36.0


@dataclass(frozen=True, eq=False)
class VoteMatrix:
    """Ordered item names plus a wins[i][j] = "i preferred over j" matrix."""

    items: tuple[str, ...]
    wins: np.ndarray

    def __post_init__(self) -> None:
        k = len(self.items)
        if k < 2:
            raise TecoError("need at least 2 items")
        if len(set(self.items)) != k:
            raise TecoError("item names must be unique")
        w = self.wins
        if w.shape != (k, k):
            raise TecoError(f"wins must be {k}x{k}, got {w.shape}")
        if not np.issubdtype(w.dtype, np.integer):
            raise TecoError("wins must be an integer array")
        if (w < 0).any():
            raise TecoError("wins must be non-negative")
        if np.diagonal(w).any():
            raise TecoError("wins diagonal must be zero")


def load_votes_csv(path: str) -> VoteMatrix:
    """Read ``winner,loser,count`` rows; items ordered by first appearance.

    A leading header row is skipped if its third field is not an integer.
    Repeated pairs accumulate.
    """
    if not os.path.isfile(path):
        raise MissingFileError(f"no such file: {path}")
    rows: list[tuple[str, str, int]] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 3:
                raise TecoError(f"{path}:{lineno}: expected winner,loser,count")
            try:
                count = int(row[2])
            except ValueError:
                if lineno == 1:
                    continue
                raise TecoError(
                    f"{path}:{lineno}: bad count {row[2]!r}"
                ) from None
            winner, loser = row[0].strip(), row[1].strip()
            if winner == loser:
                raise TecoError(f"{path}:{lineno}: self-comparison {winner!r}")
            if count < 0:
                raise TecoError(f"{path}:{lineno}: negative count")
            rows.append((winner, loser, count))
    if not rows:
        raise TecoError(f"{path}: no vote rows")
    items: list[str] = []
    index: dict[str, int] = {}
    for winner, loser, _ in rows:
        for name in (winner, loser):
            if name not in index:
                index[name] = len(items)
                items.append(name)
    wins = np.zeros((len(items), len(items)), dtype=np.int64)
    for winner, loser, count in rows:
        wins[index[winner], index[loser]] += count
    return VoteMatrix(items=tuple(items), wins=wins)


def _check_connected(items: tuple[str, ...], pairs: np.ndarray) -> None:
    k = len(items)
    totals = pairs.sum(axis=1)
    for i in range(k):
        if totals[i] == 0:
            raise DisconnectedGraphError(
                f"item {items[i]!r} has no comparisons"
            )
    seen = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j in np.nonzero(pairs[i] > 0)[0]:
            if int(j) not in seen:
                seen.add(int(j))
                frontier.append(int(j))
    if len(seen) != k:
        missing = next(i for i in range(k) if i not in seen)
        raise DisconnectedGraphError(
            f"comparison graph is disconnected: {items[missing]!r} is not "
            f"reachable from {items[0]!r}"
        )


def fit_bradley_terry(v: VoteMatrix,
                      smooth: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Maximum-likelihood scores and standard errors, anchored s[0] = 0.

    ``smooth`` adds half a pseudo-win in each direction to every compared
    pair, which keeps unanimously swept pairs finite.  Without it, one-sided
    data raises :class:`SeparationError` instead of looping.
    """
    w = v.wins.astype(np.float64)
    if smooth:
        compared = (v.wins + v.wins.T) > 0
        w = w + 0.5 * compared
    pairs = w + w.T
    _check_connected(v.items, pairs)
    if not smooth:
        win_totals = w.sum(axis=1)
        loss_totals = w.sum(axis=0)
        for i in range(len(v.items)):
            if win_totals[i] == 0.0 or loss_totals[i] == 0.0:
                raise SeparationError(
                    f"item {v.items[i]!r} "
                    f"{'never wins' if win_totals[i] == 0.0 else 'never loses'}"
                    ": the MLE diverges; re-fit with smoothing enabled"
                )
    k = len(v.items)
    s = np.zeros(k, dtype=np.float64)
    wins_row = w.sum(axis=1)

    def grad_hess(scores: np.ndarray):
        diff = scores[:, None] - scores[None, :]
        p = 1.0 / (1.0 + np.exp(-diff))
        np.fill_diagonal(p, 0.0)
        expected = (pairs * p).sum(axis=1)
        g = wins_row - expected
        info = pairs * p * (1.0 - p)
        h = -np.diag(info.sum(axis=1)) + info
        return g[1:], h[1:, 1:]

    converged = False
    for _ in range(_MAX_ITER):
        g, h = grad_hess(s)
        if np.max(np.abs(g)) <= _GRAD_TOL:
            converged = True
            break
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError as exc:
            raise SeparationError(
                "singular information matrix: the MLE is not identified"
            ) from exc
        s[1:] -= step
        if np.max(np.abs(s)) > _DIVERGE:
            raise SeparationError(
                "scores diverged: vote data is separable; "
                "re-fit with smoothing enabled"
            )
    if not converged:
        raise ConvergenceError(
            f"Newton iterations did not reach |grad| <= {_GRAD_TOL} "
            f"within {_MAX_ITER} steps"
        )
    _, h = grad_hess(s)
    try:
        cov = np.linalg.inv(-h)
    except np.linalg.LinAlgError as exc:
        raise SeparationError(
            "singular information matrix at optimum"
        ) from exc
    stderr = np.zeros(k, dtype=np.float64)
    stderr[1:] = np.sqrt(np.maximum(np.diagonal(cov), 0.0))
    return s, stderr


def predict_win_prob(scores: np.ndarray, i: int, j: int) -> float:
    """Logistic of the score difference: P(items[i] beats items[j])."""
    s = np.asarray(scores, dtype=np.float64)
    if not (0 <= i < s.size and 0 <= j < s.size):
        raise TecoError("item index out of range")
    return float(1.0 / (1.0 + np.exp(s[j] - s[i])))
