"""Per-hypothesis decision vectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

SCREENED_OUT, CLEANED_ZERO, SELECTED = 0, 1, 2
PROVENANCE_NAMES = ("screened_out", "cleaned_zero", "selected")


@dataclass(frozen=True)
class DecisionVector:
    """0/1 rejections ``delta`` with optional per-index provenance codes.

    Provenance codes index :data:`PROVENANCE_NAMES`; procedures without a
    screening stage (BH, BY, the oracle) leave it ``None``.
    """

    delta: np.ndarray
    provenance: Optional[np.ndarray] = None

    def __post_init__(self):
        delta = np.asarray(self.delta).astype(np.int8)
        object.__setattr__(self, "delta", delta)
        if self.provenance is not None:
            prov = np.asarray(self.provenance).astype(np.int8)
            if prov.shape != delta.shape:
                raise ValueError("provenance and delta lengths differ")
            if np.any((delta == 1) != (prov == SELECTED)):
                raise ValueError("delta must be 1 exactly where provenance is 'selected'")
            object.__setattr__(self, "provenance", prov)

    @property
    def rejected(self):
        return np.flatnonzero(self.delta)

    def provenance_labels(self):
        if self.provenance is None:
            return ["selected" if d else "not_selected" for d in self.delta]
        return [PROVENANCE_NAMES[c] for c in self.provenance]

    @classmethod
    def from_mask(cls, mask):
        return cls(np.asarray(mask, dtype=bool).astype(np.int8))
