"""Pairwise verdict grids shared by the frequentist and Bayesian evaluators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

X_BETTER = "x_better"
Y_BETTER = "y_better"
ROPE = "rope"
NO_DECISION = "no_decision"
VERDICTS = (X_BETTER, Y_BETTER, ROPE, NO_DECISION)

_MIRROR = {X_BETTER: Y_BETTER, Y_BETTER: X_BETTER, ROPE: ROPE, NO_DECISION: NO_DECISION}


def mirror_verdict(verdict: str) -> str:
    return _MIRROR[verdict]


@dataclass
class DecisionMatrix:
    """k-by-k grid of verdicts; cell (i, j) reads "model i vs model j".

    ``x_better`` in cell (i, j) means the row model beats the column model.
    The diagonal is ``rope`` by convention.
    """

    models: tuple[str, ...]
    cells: list[list[str]]
    threshold: float | None = None
    flagged: list[tuple[str, str]] = field(default_factory=list)

    @classmethod
    def empty(cls, models, threshold=None) -> "DecisionMatrix":
        k = len(models)
        cells = [[ROPE if i == j else NO_DECISION for j in range(k)] for i in range(k)]
        return cls(tuple(models), cells, threshold)

    def set(self, i: int, j: int, verdict: str) -> None:
        if verdict not in _MIRROR:
            raise ValueError(f"unknown verdict {verdict!r}")
        self.cells[i][j] = verdict
        self.cells[j][i] = _MIRROR[verdict]

    def verdict(self, x: str, y: str) -> str:
        return self.cells[self.models.index(x)][self.models.index(y)]

    def decided_fraction(self) -> float:
        """Share of unordered off-diagonal pairs that received a decision."""
        k = len(self.models)
        total = k * (k - 1) // 2
        if total == 0:
            return 0.0
        decided = sum(
            self.cells[i][j] != NO_DECISION for i in range(k) for j in range(i + 1, k)
        )
        return decided / total

    def is_consistent(self) -> bool:
        k = len(self.models)
        for i in range(k):
            if self.cells[i][i] != ROPE:
                return False
            for j in range(k):
                if self.cells[j][i] != _MIRROR[self.cells[i][j]]:
                    return False
        return True

    def reordered(self, order) -> "DecisionMatrix":
        idx = [self.models.index(m) for m in order]
        cells = [[self.cells[a][b] for b in idx] for a in idx]
        return DecisionMatrix(tuple(order), cells, self.threshold, list(self.flagged))

    def as_array(self) -> np.ndarray:
        return np.array(self.cells, dtype=object)
