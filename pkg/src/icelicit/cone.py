"""Pointed polyhedral cones in the nonnegative orthant, kept as extreme rays.

The cone ``{x >= 0 : a_j . x >= 0}`` is updated one halfspace at a time
with the double-description step: rays on the kept side survive, and each
adjacent (kept, removed) pair contributes the ray where their edge crosses
the new hyperplane. Adjacency is decided combinatorially from the sets of
constraints tight at each ray, so it does not degrade as the cone narrows.

Rays are stored scaled to sum 1, i.e. as vertices of the slice of the cone
by the probability simplex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

ZERO_TOL = 1e-14


class EmptyCone(ValueError):
    pass


@dataclass(frozen=True)
class Cone:
    n: int
    normals: NDArray[np.float64]  # (m, n) unit normals; rows 0..n-1 are the orthant facets
    rays: NDArray[np.float64]  # (k, n) extreme rays, each summing to 1
    tight: tuple[int, ...]  # bitmask of constraints tight at each ray

    @classmethod
    def orthant(cls, n: int) -> "Cone":
        eye = np.eye(n)
        full = (1 << n) - 1
        return cls(n, eye.copy(), eye.copy(), tuple(full ^ (1 << i) for i in range(n)))

    @property
    def n_constraints(self) -> int:
        return self.normals.shape[0]

    def values(self, a) -> NDArray[np.float64]:
        return self.rays @ np.asarray(a, dtype=float)

    def cut(self, a, tol: float = ZERO_TOL) -> "Cone":
        """Intersect with ``{x : a . x >= 0}``."""
        a = np.asarray(a, dtype=float)
        a = a / np.linalg.norm(a)
        vals = self.rays @ a
        pos = vals > tol
        neg = vals < -tol
        zer = ~(pos | neg)
        if not (pos.any() or zer.any()):
            raise EmptyCone("halfspace misses the cone")
        idx = self.n_constraints
        bit = 1 << idx
        new_rays, new_tight = [], []
        for i in np.flatnonzero(pos | zer):
            new_rays.append(self.rays[i])
            new_tight.append(self.tight[i] | bit if zer[i] else self.tight[i])
        if neg.any():
            need = self.n - 2
            tight = self.tight
            k = len(tight)
            for i in np.flatnonzero(pos):
                ti = tight[i]
                for j in np.flatnonzero(neg):
                    common = ti & tight[j]
                    if common.bit_count() < need:
                        continue
                    if any(r != i and r != j and (tight[r] & common) == common for r in range(k)):
                        continue
                    r = vals[i] * self.rays[j] - vals[j] * self.rays[i]
                    s = r.sum()
                    if s <= 0:
                        continue
                    new_rays.append(r / s)
                    new_tight.append(common | bit)
        if not new_rays:
            raise EmptyCone("cut removed every ray")
        return Cone(self.n, np.vstack([self.normals, a]), np.array(new_rays), tuple(new_tight))

    def facet_indices(self) -> list[int]:
        """Constraints tight at ``n - 1`` or more rays (the facets of the cone)."""
        counts = np.zeros(self.n_constraints, dtype=int)
        for t in self.tight:
            m = t
            while m:
                low = m & -m
                counts[low.bit_length() - 1] += 1
                m ^= low
        need = max(1, self.n - 1)
        return [i for i in range(self.n_constraints) if counts[i] >= need]

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.normals @ x >= -tol))
