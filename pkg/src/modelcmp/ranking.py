"""Per-dataset mid-ranks, average ranks, and the naive-average selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .perfdata import PerfTable, dataset_means

__all__ = [
    "RankMatrix",
    "FamilyOfBest",
    "TieError",
    "mid_ranks",
    "rank_matrix",
    "overall_means",
    "naive_best",
]

NAIVE_NOTE = (
    "naive average: every observed difference is taken to be real and practically "
    "significant; no uncertainty is quantified"
)
NHST_NOTE = (
    "no-conclusion semantics: members are statistically indistinguishable from the "
    "top-ranked model, which is not evidence that they are equivalent"
)
BAYES_NOTE = "positively practically equivalent: each member has P(ROPE) above the threshold against the top model"


class TieError(ValueError):
    def __init__(self, message: str, tied: list[str]):
        self.tied = tied
        super().__init__(message)


@dataclass(frozen=True)
class RankMatrix:
    per_dataset_ranks: np.ndarray  # (N, k); 1 = best
    avg_ranks: np.ndarray  # (k,)

    @property
    def n_datasets(self) -> int:
        return self.per_dataset_ranks.shape[0]

    @property
    def n_models(self) -> int:
        return self.per_dataset_ranks.shape[1]

    @classmethod
    def from_avg_ranks(cls, avg_ranks, n_datasets: int) -> "RankMatrix":
        """Build a matrix carrying only average ranks (every row equal to them).

        Useful when only published average ranks are available; the Friedman
        statistic and Nemenyi test depend on nothing else.
        """
        avg = np.asarray(avg_ranks, dtype=float)
        return cls(np.tile(avg, (n_datasets, 1)), avg)


@dataclass(frozen=True)
class FamilyOfBest:
    method: str  # naive | nhst | bayes
    members: tuple[str, ...]
    epistemic_note: str

    def __post_init__(self):
        if not self.members:
            raise ValueError("family of best models cannot be empty")
        if len(set(self.members)) != len(self.members):
            raise ValueError("family contains duplicate members")

    @property
    def best(self) -> str:
        return self.members[0]


def mid_ranks(row, higher_is_better: bool = True) -> np.ndarray:
    """Rank scores with 1 for the best; tied scores share their mean rank."""
    row = np.asarray(row, dtype=float)
    return rankdata(-row if higher_is_better else row, method="average")


def rank_matrix(means, higher_is_better: bool = True) -> RankMatrix:
    means = np.asarray(means, dtype=float)
    keyed = -means if higher_is_better else means
    ranks = rankdata(keyed, method="average", axis=1)
    return RankMatrix(ranks, ranks.mean(axis=0))


def overall_means(table: PerfTable) -> np.ndarray:
    # Balanced design: equals the mean of the dataset means.
    return table.values.mean(axis=(0, 2))


def table_ranks(table: PerfTable) -> RankMatrix:
    return rank_matrix(dataset_means(table), table.higher_is_better)


def naive_best(table: PerfTable) -> FamilyOfBest:
    means = overall_means(table)
    score = means if table.higher_is_better else -means
    top = np.flatnonzero(score == score.max())
    if len(top) > 1:
        tied = [table.models[j] for j in top]
        raise TieError(f"naive average is tied for best between {', '.join(tied)}", tied)
    return FamilyOfBest("naive", (table.models[int(top[0])],), NAIVE_NOTE)
