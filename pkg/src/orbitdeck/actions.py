"""Discretized 4D action vocabulary: trinary throttle per axis + burn duration.

Axis conventions (vessel frame): Forward -> +Y, Backward -> -Y,
Right -> +X, Left -> -X, Up -> +Z, Down -> -Z.  The third call parameter
keeps the surface name "Down Throttle" but takes the value vocabulary
{Down, Up, None} with Up mapping to +Z.

Combined-axis burns are not renormalized: a full three-axis burn has
magnitude sqrt(3) * max_accel, matching independent per-axis throttles.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

#: Burn-duration defaults and bounds (seconds).
DURATION_DEFAULT = 1.0
DURATION_MIN = 0.1
DURATION_MAX = 10.0

_THROTTLE_VALUES = (-1, 0, 1)


@dataclass(frozen=True)
class DiscreteAction:
    """One command: throttle in {-1, 0, +1} per axis and a burn duration."""

    forward: int = 0
    right: int = 0
    up: int = 0
    duration: float = DURATION_DEFAULT

    def __post_init__(self):
        for name in ("forward", "right", "up"):
            if getattr(self, name) not in _THROTTLE_VALUES:
                raise ValueError(f"{name} throttle must be -1, 0 or +1")
        if not (DURATION_MIN <= self.duration <= DURATION_MAX):
            raise ValueError(
                f"duration {self.duration} outside [{DURATION_MIN}, {DURATION_MAX}]"
            )

    @property
    def throttles(self) -> tuple[int, int, int]:
        return (self.forward, self.right, self.up)


#: The coasting action.
NULL_ACTION = DiscreteAction(0, 0, 0)


def enumerate_actions(single_axis: bool = False) -> list[tuple[int, int, int]]:
    """All throttle triples in lexicographic (forward, right, up) order.

    The full combined space has 3 x 3 x 3 = 27 permutations.  With
    ``single_axis=True`` the list is restricted to the 7 triples having at
    most one non-zero axis (the reduced single-axis vocabulary).
    """
    triples = list(itertools.product(_THROTTLE_VALUES, repeat=3))
    if single_axis:
        triples = [t for t in triples if sum(1 for v in t if v != 0) <= 1]
    return triples


def to_accel(action: DiscreteAction, max_accel: float) -> tuple[np.ndarray, float]:
    """Vessel-frame acceleration (m/s^2) and burn duration for ``action``."""
    if max_accel <= 0:
        raise ValueError(f"max_accel must be > 0 (got {max_accel})")
    accel = max_accel * np.array(
        [action.right, action.forward, action.up], dtype=np.float64
    )
    return accel, action.duration


_FORWARD_WORDS = {1: "Forward", -1: "Backward", 0: "None"}
_RIGHT_WORDS = {1: "Right", -1: "Left", 0: "None"}
_DOWN_WORDS = {1: "Up", -1: "Down", 0: "None"}


def format_action(action: DiscreteAction) -> str:
    """Canonical call text for ``action``.

    Emits ``perform_action(Forward Throttle: ..., Right Throttle: ...,
    Down Throttle: ...)``; a ``Duration`` argument is appended only when it
    differs from the default.
    """
    parts = [
        f"Forward Throttle: {_FORWARD_WORDS[action.forward]}",
        f"Right Throttle: {_RIGHT_WORDS[action.right]}",
        f"Down Throttle: {_DOWN_WORDS[action.up]}",
    ]
    if action.duration != DURATION_DEFAULT:
        parts.append(f"Duration: {action.duration:g}")
    return f"perform_action({', '.join(parts)})"
