"""Cubical persistence (dimensions 0 and 1) of a 2-D filtration field.

Each pixel is a closed unit square (T-construction), so foreground pixels
touching at a corner are connected (8-connectivity).  Dimension 0 is computed
with a union-find sweep over pixels in ascending activation.  Dimension 1 uses
Alexander duality: holes of the foreground are the bounded 4-connected
components of the background, so a descending union-find sweep over the
background, with one extra node standing for everything outside the image,
yields the dimension-1 bars.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np

from .filtration import FiltrationField
from .image_io import SCALE

INF = math.inf


@dataclass(frozen=True)
class PersistenceDiagram:
    """Multiset of (birth, death) bars; ``death`` may be ``inf``."""

    dim: int
    bars: np.ndarray  # (n, 2) float64

    def __post_init__(self):
        b = np.asarray(self.bars, dtype=np.float64).reshape(-1, 2)
        if self.dim not in (0, 1):
            raise ValueError("only dimensions 0 and 1 are supported")
        if b.size and not np.all(b[:, 0] < b[:, 1]):
            raise ValueError("every bar needs birth < death")
        # canonical order makes equality a multiset comparison
        order = np.lexsort((b[:, 1], b[:, 0]))
        b = np.ascontiguousarray(b[order])
        b.setflags(write=False)
        object.__setattr__(self, "bars", b)

    def __len__(self) -> int:
        return len(self.bars)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PersistenceDiagram):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.bars, other.bars)

    def __hash__(self):
        return hash((self.dim, self.bars.tobytes()))

    def as_tuples(self) -> list[tuple[float, float]]:
        return [(float(b), float(d)) for b, d in self.bars]

    @property
    def births(self) -> np.ndarray:
        return self.bars[:, 0]

    @property
    def deaths(self) -> np.ndarray:
        return self.bars[:, 1]

    def n_essential(self) -> int:
        return int(np.isinf(self.deaths).sum())

    def map_values(self, fn) -> "PersistenceDiagram":
        """Apply ``fn`` to every finite endpoint (infinite deaths stay infinite)."""
        out = []
        for b, d in self.bars:
            out.append((fn(b), d if math.isinf(d) else fn(d)))
        return PersistenceDiagram(self.dim, out)


def bars_alive_at(pd: PersistenceDiagram, t) -> int:
    b = pd.bars
    return int(np.count_nonzero((b[:, 0] <= t) & (t < b[:, 1])))


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True, inline="always")
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@numba.njit(cache=True)
def _dim0_kernel(act, order, rows, cols):
    n = rows * cols
    parent = np.arange(n)
    active = np.zeros(n, dtype=np.bool_)
    births = np.empty(n, dtype=np.int64)
    deaths = np.empty(n, dtype=np.int64)
    nbars = 0
    for k in range(n):
        p = order[k]
        v = act[p]
        active[p] = True
        r = p // cols
        c = p - r * cols
        for dr in range(-1, 2):
            rr = r + dr
            if rr < 0 or rr >= rows:
                continue
            for dc in range(-1, 2):
                cc = c + dc
                if cc < 0 or cc >= cols or (dr == 0 and dc == 0):
                    continue
                q = rr * cols + cc
                if not active[q]:
                    continue
                a = _find(parent, p)
                b = _find(parent, q)
                if a == b:
                    continue
                # elder rule: the root is the component's first pixel, so
                # (activation, index) of the root orders components by age
                if act[a] < act[b] or (act[a] == act[b] and a < b):
                    old, young = a, b
                else:
                    old, young = b, a
                if act[young] < v:
                    births[nbars] = act[young]
                    deaths[nbars] = v
                    nbars += 1
                parent[young] = old
    return births[:nbars], deaths[:nbars]


@numba.njit(cache=True)
def _dim1_kernel(act, order_desc, rows, cols):
    n = rows * cols
    outside = n
    parent = np.arange(n + 1)
    added = np.zeros(n + 1, dtype=np.bool_)
    added[outside] = True
    # birth of a background component = largest activation it contains
    top = np.empty(n + 1, dtype=np.int64)
    top[outside] = np.iinfo(np.int64).max
    births = np.empty(n, dtype=np.int64)
    deaths = np.empty(n, dtype=np.int64)
    nbars = 0
    for k in range(n):
        p = order_desc[k]
        v = act[p]
        added[p] = True
        top[p] = v
        r = p // cols
        c = p - r * cols
        for j in range(5):
            if j == 0:
                if r == 0 or c == 0 or r == rows - 1 or c == cols - 1:
                    q = outside
                else:
                    continue
            elif j == 1:
                if r == 0:
                    continue
                q = p - cols
            elif j == 2:
                if r == rows - 1:
                    continue
                q = p + cols
            elif j == 3:
                if c == 0:
                    continue
                q = p - 1
            else:
                if c == cols - 1:
                    continue
                q = p + 1
            if not added[q]:
                continue
            a = _find(parent, p)
            b = _find(parent, q)
            if a == b:
                continue
            if top[a] > top[b] or (top[a] == top[b] and a < b):
                old, young = a, b
            else:
                old, young = b, a
            # the younger region stops being a separate hole once p is removed
            if v < top[young]:
                births[nbars] = v
                deaths[nbars] = top[young]
                nbars += 1
            parent[young] = old
    return births[:nbars], deaths[:nbars]


def _pairs_to_bars(births, deaths) -> np.ndarray:
    return np.column_stack([births.astype(np.float64), deaths.astype(np.float64)])


def compute_pd(f: FiltrationField) -> tuple[PersistenceDiagram, PersistenceDiagram]:
    """Dimension-0 and dimension-1 diagrams of ``f`` in activation units."""
    act = f.activation.ravel().astype(np.int64)
    rows, cols = f.rows, f.cols
    order = np.argsort(act, kind="stable")
    b0, d0 = _dim0_kernel(act, order, rows, cols)
    bars0 = _pairs_to_bars(b0, d0)
    bars0 = np.vstack([bars0, [[float(act.min()), INF]]])
    order_desc = order[::-1].copy()
    b1, d1 = _dim1_kernel(act, order_desc, rows, cols)
    return PersistenceDiagram(0, bars0), PersistenceDiagram(1, _pairs_to_bars(b1, d1))


# ---------------------------------------------------------------- JSON


def diagram_records(pds, scale: int = SCALE) -> list[dict]:
    """JSON-ready bar records in unscaled [0, 255] units."""
    out = []
    for pd in pds:
        for b, d in pd.bars:
            out.append(
                {
                    "dim": pd.dim,
                    "birth": float(b) / scale,
                    "death": None if math.isinf(d) else float(d) / scale,
                    "birth_exact": str(Fraction(int(b), scale)),
                    "death_exact": None if math.isinf(d) else str(Fraction(int(d), scale)),
                }
            )
    return out


def diagrams_to_json(pds, scale: int = SCALE) -> str:
    return json.dumps(diagram_records(pds, scale), indent=1)


def diagrams_from_json(text: str, scale: int = SCALE) -> tuple[PersistenceDiagram, PersistenceDiagram]:
    bars: dict[int, list] = {0: [], 1: []}
    for rec in json.loads(text):
        b = Fraction(rec["birth_exact"]) * scale
        d = INF if rec["death"] is None else Fraction(rec["death_exact"]) * scale
        bars[rec["dim"]].append((float(b), float(d)))
    return PersistenceDiagram(0, bars[0]), PersistenceDiagram(1, bars[1])
