"""Hard community assignment from a nonnegative representation matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

__all__ = ["Partition", "assign"]


@dataclass(frozen=True)
class Partition:
    labels: np.ndarray
    K: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ContractViolation("partition labels must be a vector")
        if labels.size and (labels.min() < 0 or labels.max() >= self.K):
            raise ContractViolation(f"labels must lie in 0..{self.K - 1}")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        return cls(labels, int(labels.max()) + 1 if labels.size else 1)

    @property
    def n(self) -> int:
        return self.labels.size

    def __len__(self):
        return self.labels.size


def assign(X) -> Partition:
    """Put node ``j`` in the community of the largest entry of row ``j``.

    Ties go to the lowest column index. Columns that win no row simply leave
    an empty community.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.size == 0:
        raise ContractViolation(f"need a nonempty n x K matrix, got shape {X.shape}")
    # np.argmax returns the first maximal index
    return Partition(np.argmax(X, axis=1), X.shape[1])
