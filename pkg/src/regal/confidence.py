"""Visit counts, empirical transitions, and L1 confidence sets around them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mdp import Mdp, MdpError

RADIUS_CAP = 2.0
MEMBERSHIP_TOL = 1e-12


@dataclass
class VisitCounts:
    """Cumulative N(s, a, s'), N(s, a) and the global step count t."""

    n_sas: np.ndarray
    n_sa: np.ndarray = field(init=False)
    t: int = field(init=False)

    def __post_init__(self):
        self.n_sas = np.asarray(self.n_sas, dtype=np.int64)
        self.refresh()

    @classmethod
    def zeros(cls, S: int, A: int) -> "VisitCounts":
        return cls(np.zeros((S, A, S), dtype=np.int64))

    @property
    def shape(self):
        return self.n_sa.shape

    def refresh(self):
        """Recompute N(s, a) and t after ``n_sas`` was modified in place."""
        self.n_sa = self.n_sas.sum(axis=2)
        self.t = int(self.n_sa.sum())

    def update(self, s: int, a: int, s2: int) -> "VisitCounts":
        self.n_sas[s, a, s2] += 1
        self.n_sa[s, a] += 1
        self.t += 1
        return self

    def copy(self) -> "VisitCounts":
        return VisitCounts(self.n_sas.copy())

    def to_dict(self) -> dict:
        return {"t": self.t, "n_sa": self.n_sa.tolist(), "n_sas": self.n_sas.tolist()}


def update(counts: VisitCounts, s: int, a: int, s2: int) -> VisitCounts:
    return counts.update(s, a, s2)


def empirical_model(counts: VisitCounts, fill_unvisited: bool = True) -> np.ndarray:
    """N(s, a, s') / max{N(s, a), 1}; unvisited rows become uniform unless ``fill_unvisited`` is off."""
    n_sa = counts.n_sa
    p = counts.n_sas / np.maximum(n_sa, 1)[:, :, None]
    if fill_unvisited:
        S = p.shape[2]
        p[n_sa == 0] = 1.0 / S
    return p


def radius(counts: VisitCounts, S: int, A: int, delta: float, at_time: int) -> np.ndarray:
    """sqrt(12 S log(2 A t / delta) / max{N(s, a), 1}), clipped to 2."""
    if at_time < 1:
        raise ValueError("at_time must be at least 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    num = 12.0 * S * math.log(2.0 * A * at_time / delta)
    rad = np.sqrt(num / np.maximum(counts.n_sa, 1))
    return np.minimum(rad, RADIUS_CAP)


@dataclass(frozen=True)
class ConfidenceSet:
    center: np.ndarray
    radius: np.ndarray
    delta: float
    built_at: int

    @property
    def num_states(self) -> int:
        return self.center.shape[0]

    @property
    def num_actions(self) -> int:
        return self.center.shape[1]

    def to_dict(self) -> dict:
        return {"built_at": self.built_at, "delta": self.delta,
                "center": self.center.tolist(), "radius": self.radius.tolist()}


def build_confidence_set(counts: VisitCounts, delta: float, at_time: int | None = None) -> ConfidenceSet:
    """The set M(t) at ``at_time`` (defaults to the current count; t = 0 is treated as 1)."""
    S, A = counts.shape
    t = counts.t if at_time is None else at_time
    center = np.ascontiguousarray(empirical_model(counts))
    rad = np.ascontiguousarray(radius(counts, S, A, delta, max(t, 1)))
    return ConfidenceSet(center, rad, float(delta), int(t))


def l1_distances(cset: ConfidenceSet, m: Mdp) -> np.ndarray:
    if m.transition.shape != cset.center.shape:
        raise MdpError(f"MDP shape {m.transition.shape} does not match set shape {cset.center.shape}")
    return np.abs(m.transition - cset.center).sum(axis=2)


def contains(cset: ConfidenceSet, m: Mdp) -> bool:
    return bool(np.all(l1_distances(cset, m) <= cset.radius + MEMBERSHIP_TOL))
