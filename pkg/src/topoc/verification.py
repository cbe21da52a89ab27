"""Brute-force oracles used to validate the persistence engine.

Nothing here shares code with :mod:`topoc.persistence`.  Cells of the cubical
complex live on a doubled grid of shape ``(2R+1, 2C+1)``: pixel ``(r, c)`` is
the cell ``(2r+1, 2c+1)``, vertices have two even coordinates and edges one.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .filtration import BinaryImage, FiltrationField
from .persistence import PersistenceDiagram

MAX_ORACLE_CELLS = 4096

_EIGHT = np.ones((3, 3), dtype=bool)


class ComplexTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class CubicalComplexCounts:
    vertices: int
    edges: int
    faces: int

    @property
    def euler(self) -> int:
        return self.vertices - self.edges + self.faces


def _closure_mask(active: np.ndarray) -> np.ndarray:
    """Cells of the doubled grid lying in the closure of the active squares."""
    rows, cols = active.shape
    mask = np.zeros((2 * rows + 1, 2 * cols + 1), dtype=bool)
    for dr in (0, 1, 2):
        for dc in (0, 1, 2):
            mask[dr : dr + 2 * rows : 2, dc : dc + 2 * cols : 2] |= active
    return mask


def cell_counts(b: BinaryImage) -> CubicalComplexCounts:
    mask = _closure_mask(b.active)
    i, j = np.nonzero(mask)
    dims = (i % 2) + (j % 2)
    return CubicalComplexCounts(
        vertices=int(np.sum(dims == 0)), edges=int(np.sum(dims == 1)), faces=int(np.sum(dims == 2))
    )


def label_components(b: BinaryImage) -> int:
    """Number of 8-connected components of the active pixels."""
    _, n = ndimage.label(b.active, structure=_EIGHT)
    return int(n)


def flood_fill_components(b: BinaryImage) -> int:
    """Plain BFS reference for :func:`label_components`."""
    a = b.active
    rows, cols = a.shape
    seen = np.zeros_like(a)
    count = 0
    for r0 in range(rows):
        for c0 in range(cols):
            if not a[r0, c0] or seen[r0, c0]:
                continue
            count += 1
            seen[r0, c0] = True
            queue = deque([(r0, c0)])
            while queue:
                r, c = queue.popleft()
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr, cc = r + dr, c + dc
                        if 0 <= rr < rows and 0 <= cc < cols and a[rr, cc] and not seen[rr, cc]:
                            seen[rr, cc] = True
                            queue.append((rr, cc))
    return count


def euler_characteristic(b: BinaryImage) -> int:
    return cell_counts(b).euler


def betti_by_counting(b: BinaryImage) -> tuple[int, int]:
    b0 = label_components(b)
    # a planar 2-complex has no 2-cycles, so chi = b0 - b1
    return b0, b0 - euler_characteristic(b)


def _boundary(i: int, j: int) -> list[tuple[int, int]]:
    if i % 2 == 1 and j % 2 == 1:
        return [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
    if i % 2 == 1:
        return [(i - 1, j), (i + 1, j)]
    if j % 2 == 1:
        return [(i, j - 1), (i, j + 1)]
    return []


def reduce_boundary_matrix(f: FiltrationField) -> tuple[PersistenceDiagram, PersistenceDiagram]:
    """Persistence by left-to-right Z/2 column reduction of the full boundary matrix.

    Cell values follow the lower-star rule: a vertex or edge takes the minimum
    activation of the pixels containing it.  Columns are ordered by
    (value, dimension, row-major id on the doubled grid).
    """
    rows, cols = f.rows, f.cols
    H, W = 2 * rows + 1, 2 * cols + 1
    if H * W > MAX_ORACLE_CELLS:
        raise ComplexTooLarge(f"{H * W} cells exceeds the dense oracle limit of {MAX_ORACLE_CELLS}")

    act = f.activation.astype(np.int64)
    value = np.full((H, W), np.iinfo(np.int64).max, dtype=np.int64)
    for dr in (0, 1, 2):
        for dc in (0, 1, 2):
            view = value[dr : dr + 2 * rows : 2, dc : dc + 2 * cols : 2]
            np.minimum(view, act, out=view)

    cells = [(int(value[i, j]), (i % 2) + (j % 2), i * W + j) for i in range(H) for j in range(W)]
    cells.sort()
    pos = {cid: k for k, (_, _, cid) in enumerate(cells)}

    # columns as Python-int bitsets over filtration positions
    low_owner: dict[int, int] = {}
    reduced: list[int] = []
    pairs: list[tuple[int, int]] = []
    for k, (_, dim, cid) in enumerate(cells):
        i, j = divmod(cid, W)
        col = 0
        for bi, bj in _boundary(i, j):
            col ^= 1 << pos[bi * W + bj]
        while col:
            low = col.bit_length() - 1
            other = low_owner.get(low)
            if other is None:
                break
            col ^= reduced[other]
        reduced.append(col)
        if col:
            low = col.bit_length() - 1
            low_owner[low] = k
            pairs.append((low, k))

    killed = {b for b, _ in pairs}
    killers = {d for _, d in pairs}
    bars: dict[int, list] = {0: [], 1: []}
    for b, d in pairs:
        vb, dim, _ = cells[b]
        vd = cells[d][0]
        if vb < vd:
            bars[dim].append((vb, vd))
    for k, (v, dim, _) in enumerate(cells):
        if k not in killed and k not in killers:
            if dim > 1:
                raise AssertionError("unexpected essential 2-cycle")
            bars[dim].append((v, math.inf))
    return PersistenceDiagram(0, bars[0]), PersistenceDiagram(1, bars[1])
