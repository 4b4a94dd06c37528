"""Dense LU factorization, cached once per switch configuration."""

from __future__ import annotations

import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .formulation import EquationSystem, SingularSystem

PIVOT_TOL = 1e-12


@dataclass
class FactorizedSystem:
    system: EquationSystem
    lu: np.ndarray = field(repr=False)
    piv: np.ndarray = field(repr=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.lu.shape[0]:
            raise ValueError(f"rhs has length {rhs.shape[0]}, expected {self.lu.shape[0]}")
        return lu_solve((self.lu, self.piv), rhs, check_finite=False)

    @property
    def condition(self) -> float:
        """2-norm condition estimate of the assembled matrix."""
        if not hasattr(self, "_condition"):
            self._condition = float(np.linalg.cond(self.system.A))
        return self._condition


def _row_permutation(piv: np.ndarray) -> np.ndarray:
    perm = np.arange(len(piv))
    for i, j in enumerate(piv):
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def factorize_matrix(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, int | None]:
    """LU with partial pivoting; third item is the first tiny pivot position, if any."""
    n = A.shape[0]
    if n == 0:
        return A.copy(), np.zeros(0, dtype=np.int32), None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A, check_finite=False)
    threshold = PIVOT_TOL * max(float(np.abs(A).sum(axis=1).max()), np.finfo(float).tiny)
    small = np.flatnonzero(np.abs(np.diag(lu)) < threshold)
    return lu, piv, (int(small[0]) if small.size else None)


def factorize(system: EquationSystem) -> FactorizedSystem:
    A = system.A
    if A.shape[0] != A.shape[1]:
        raise SingularSystem(f"matrix is {A.shape[0]}x{A.shape[1]}, not square")
    lu, piv, bad = factorize_matrix(A)
    if bad is not None:
        row = int(_row_permutation(piv)[bad])
        eq = system.equations[row]
        raise SingularSystem(
            f"singular system for {system.config.to_text() or 'the circuit'}: "
            f"pivot {bad} vanishes at {eq.tag} row '{eq.label}'",
            tag=eq.tag,
            label=eq.label,
        )
    return FactorizedSystem(system, lu, piv)


class ConfigCache:
    """LRU map from configuration bitmask to factorization.

    ``build`` is called with the mask on a miss and must return a
    FactorizedSystem; ``factorizations`` counts those calls.
    """

    def __init__(self, build: Callable[[int], FactorizedSystem], capacity: int = 64):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self._build = build
        self.capacity = capacity
        self._entries: OrderedDict[int, FactorizedSystem] = OrderedDict()
        self.factorizations = 0
        self.active: int | None = None

    def get(self, mask: int) -> FactorizedSystem:
        if mask in self._entries:
            self._entries.move_to_end(mask)
        else:
            self._entries[mask] = self._build(mask)
            self.factorizations += 1
            while len(self._entries) > self.capacity:
                victim = next(k for k in self._entries if k != mask)
                del self._entries[victim]
        self.active = mask
        return self._entries[mask]

    def __contains__(self, mask: int) -> bool:
        return mask in self._entries

    def __len__(self) -> int:
        return len(self._entries)
