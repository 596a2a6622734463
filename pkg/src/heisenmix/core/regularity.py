"""
Regularity Module

Oscillation of grid fields over nested gauge balls B_{r 2^-k}(centre), the least-squares
Holder fit of the resulting dyadic profile, and the worst per-step contraction ratio.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import DomainError
from .fields import FieldWithExterior
from .hgroup import GaugeBall, GroupPoint
from .reporting import warn


MIN_FIT_NODES = 8
GAMMA_FLOOR = 1e-6


def _ball_values(u: FieldWithExterior, ball: GaugeBall) -> np.ndarray:
    return u.values_on_nodes[ball.contains_coords(u.grid.nodes)]


def oscillation(u: FieldWithExterior, ball: GaugeBall) -> float:
    """max - min of u over the grid nodes inside `ball`"""
    values = _ball_values(u, ball)
    if values.size < 2:
        raise DomainError(f"ball of radius {ball.radius:g} holds {values.size} grid node(s); need at least 2")
    return float(np.max(values) - np.min(values))


@dataclass(frozen=True)
class ProfileEntry:
    k: int
    radius: float
    osc: float
    nodes: int


@dataclass
class DyadicProfile:
    entries: List[ProfileEntry]
    center: List[float]
    truncated: bool = False
    warnings: List[str] = field(default_factory=list)

    def rows(self) -> List[List[float]]:
        return [[e.k, e.radius, e.osc, e.nodes] for e in self.entries]

    def to_dict(self) -> dict:
        return {
            'center': self.center,
            'truncated': self.truncated,
            'warnings': list(self.warnings),
            'entries': [{'k': e.k, 'radius': e.radius, 'osc': e.osc, 'nodes': e.nodes} for e in self.entries],
        }


def dyadic_profile(u: FieldWithExterior, k_max: int, radius: float = 1.0,
                   center: Optional[GroupPoint] = None) -> DyadicProfile:
    """osc over B_{radius 2^-k}(center) for k = 0..k_max; stops early once a ball has < 2 nodes"""
    if k_max < 0:
        raise DomainError(f"k_max must be >= 0, got {k_max}")
    center = center or GroupPoint.origin(u.grid.N)
    profile = DyadicProfile([], center.to_list())
    for k in range(k_max + 1):
        r = radius * 2.0 ** (-k)
        values = _ball_values(u, GaugeBall(center, r))
        if values.size < 2:
            message = f"grid resolves the dyadic balls only up to k = {k - 1}; truncating the profile (k_max = {k_max})"
            profile.truncated = True
            profile.warnings.append(message)
            warn(message)
            break
        profile.entries.append(ProfileEntry(k, r, float(np.max(values) - np.min(values)), int(values.size)))
    return profile


@dataclass
class HolderFit:
    C_fit: float
    gamma: float
    constant: bool = False
    ks: List[int] = field(default_factory=list)

    @property
    def delta(self) -> float:
        """The per-step contraction 1 - 2^-gamma implied by the fitted exponent"""
        return 1.0 - 2.0 ** (-self.gamma)

    def to_dict(self) -> dict:
        return {'C_fit': self.C_fit, 'gamma': self.gamma, 'delta': self.delta,
                'constant': self.constant, 'ks': list(self.ks)}


def fit_holder(profile: DyadicProfile, min_nodes: int = MIN_FIT_NODES) -> HolderFit:
    """Least-squares slope of log osc against log radius, clamped to (0, 1]

    C_fit is the smallest C with osc <= C radius^gamma at every fitted k. An all-zero
    profile is reported as a constant field.
    """
    if profile.entries and all(e.osc == 0 for e in profile.entries):
        return HolderFit(0.0, 1.0, constant=True)
    used = [e for e in profile.entries if e.nodes >= min_nodes and e.osc > 0]
    if len(used) < 3:
        raise DomainError(f"need at least 3 resolved non-zero profile entries, got {len(used)}")
    log_r = np.log([e.radius for e in used])
    log_osc = np.log([e.osc for e in used])
    slope = float(np.polyfit(log_r, log_osc, 1)[0])
    gamma = min(1.0, max(GAMMA_FLOOR, slope))
    C_fit = max(e.osc / e.radius ** gamma for e in used)
    return HolderFit(float(C_fit), gamma, ks=[e.k for e in used])


@dataclass
class ContractionRate:
    worst_ratio: float
    ratios: List[float]

    @property
    def delta(self) -> float:
        return 1.0 - self.worst_ratio

    def to_dict(self) -> dict:
        return {'worst_ratio': self.worst_ratio, 'delta': self.delta, 'ratios': list(self.ratios)}


def contraction_rate(profile: DyadicProfile) -> ContractionRate:
    """Worst ratio osc_{k+1} / osc_k over consecutive entries with osc_k > 0"""
    ratios = [b.osc / a.osc for a, b in zip(profile.entries, profile.entries[1:]) if a.osc > 0]
    if not ratios:
        raise DomainError("profile has no consecutive entries with positive oscillation")
    return ContractionRate(max(ratios), ratios)
