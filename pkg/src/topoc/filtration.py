"""Sublevel / superlevel filtrations of a channel and their binary slices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image_io import MAX_SCALED, ChannelMatrix

DIRECTIONS = ("sublevel", "superlevel")


@dataclass(frozen=True)
class FiltrationField:
    """Per-pixel activation values; a pixel is active at threshold t iff activation <= t.

    Superlevel fields store ``765 - value`` so both directions are processed
    in ascending order.
    """

    activation: np.ndarray
    direction: str = "sublevel"
    channel: str = "gray"

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        a = np.ascontiguousarray(np.asarray(self.activation, dtype=np.int32))
        if a.ndim != 2 or a.size == 0:
            raise ValueError("activation must be a non-empty 2-D grid")
        if a.min() < 0 or a.max() > MAX_SCALED:
            raise ValueError(f"activation values must lie in [0, {MAX_SCALED}]")
        a.setflags(write=False)
        object.__setattr__(self, "activation", a)

    @property
    def rows(self) -> int:
        return self.activation.shape[0]

    @property
    def cols(self) -> int:
        return self.activation.shape[1]

    def to_channel_value(self, v):
        """Map an activation value back to the (scaled) channel value it came from."""
        if self.direction == "sublevel":
            return v
        return MAX_SCALED - v


@dataclass(frozen=True)
class BinaryImage:
    active: np.ndarray  # bool (rows, cols)

    def __post_init__(self):
        a = np.asarray(self.active, dtype=bool)
        if a.ndim != 2:
            raise ValueError("binary image must be 2-D")
        object.__setattr__(self, "active", a)

    @property
    def rows(self) -> int:
        return self.active.shape[0]

    @property
    def cols(self) -> int:
        return self.active.shape[1]


def invert(ch: ChannelMatrix) -> ChannelMatrix:
    return ChannelMatrix(MAX_SCALED - ch.values, ch.channel)


def build_filtration(ch: ChannelMatrix, direction: str = "sublevel") -> FiltrationField:
    if direction == "sublevel":
        act = ch.values
    elif direction == "superlevel":
        act = MAX_SCALED - ch.values
    else:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    return FiltrationField(act, direction, ch.channel)


def binary_slice(f: FiltrationField, t) -> BinaryImage:
    if not 0 <= t <= MAX_SCALED:
        raise ValueError(f"threshold {t} outside [0, {MAX_SCALED}]")
    return BinaryImage(f.activation <= t)


def threshold_grid(n: int = 50) -> list[int]:
    """``n`` evenly spaced scaled thresholds covering [0, 765], both ends included."""
    if n < 2:
        raise ValueError("threshold grid needs at least 2 points")
    # round-half-up in exact integer arithmetic: round(765*k/(n-1))
    den = n - 1
    grid = [(2 * MAX_SCALED * k + den) // (2 * den) for k in range(n)]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"n={n} is too fine for a strictly increasing integer grid")
    return grid
