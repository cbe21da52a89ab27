"""Betti-curve vectorization, the 400-feature layout and class band curves."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .filtration import build_filtration, threshold_grid
from .image_io import CHANNELS, SCALE, RgbImage, extract_channel
from .persistence import PersistenceDiagram, compute_pd

N_THRESHOLDS = 50
DIMS = (0, 1)
BLOCK_ORDER = tuple((ch, dim) for ch in ("red", "green", "blue", "gray") for dim in DIMS)
N_FEATURES = len(BLOCK_ORDER) * N_THRESHOLDS


@dataclass(frozen=True)
class BettiVector:
    dim: int
    values: np.ndarray
    thresholds: tuple
    channel: str = "gray"


@dataclass(frozen=True)
class TopoFeatureVector:
    values: np.ndarray  # int64, length 400 (or 800 with superlevel blocks)
    layout: tuple = BLOCK_ORDER

    def block(self, channel: str, dim: int, direction: str = "sublevel") -> np.ndarray:
        return self.values[feature_slice(channel, dim, direction)]


def feature_slice(channel: str, dim: int, direction: str = "sublevel", n: int = N_THRESHOLDS) -> slice:
    """Column range of one (channel, dim) block in the fixed layout."""
    if (channel, dim) not in BLOCK_ORDER:
        raise ValueError(f"unknown block ({channel!r}, {dim!r})")
    k = BLOCK_ORDER.index((channel, dim))
    if direction == "superlevel":
        k += len(BLOCK_ORDER)
    elif direction != "sublevel":
        raise ValueError(f"unknown direction {direction!r}")
    return slice(k * n, (k + 1) * n)


def feature_name(j: int) -> str:
    return f"f{j:03d}"


def describe_feature(j: int, n: int = N_THRESHOLDS) -> str:
    """Human-readable name of column ``j``, e.g. ``gray/b1/sub/t=16``."""
    block, k = divmod(j, n)
    direction = "sub" if block < len(BLOCK_ORDER) else "super"
    ch, dim = BLOCK_ORDER[block % len(BLOCK_ORDER)]
    return f"{ch}/b{dim}/{direction}/t={threshold_grid(n)[k]}"


def betti_vector(pd: PersistenceDiagram, grid, channel: str = "gray") -> BettiVector:
    t = np.asarray(grid, dtype=np.float64)
    if np.any(np.diff(t) <= 0):
        raise ValueError("threshold grid must be strictly increasing")
    b = pd.births[:, None]
    d = pd.deaths[:, None]
    values = np.count_nonzero((b <= t[None, :]) & (t[None, :] < d), axis=0).astype(np.int64)
    return BettiVector(pd.dim, values, tuple(grid), channel)


def topo_feature_vector(img: RgbImage, superlevel: bool = False, n: int = N_THRESHOLDS) -> TopoFeatureVector:
    grid = threshold_grid(n)
    directions = ("sublevel", "superlevel") if superlevel else ("sublevel",)
    blocks = []
    for direction in directions:
        for ch in ("red", "green", "blue", "gray"):
            pds = compute_pd(build_filtration(extract_channel(img, ch), direction))
            for dim in DIMS:
                blocks.append(betti_vector(pds[dim], grid, ch).values)
    return TopoFeatureVector(np.concatenate(blocks))


# ---------------------------------------------------------------- band curves


@dataclass(frozen=True)
class BandCurves:
    classes: list
    median: np.ndarray  # (n_classes, n_thresholds)
    lower: np.ndarray
    upper: np.ndarray
    thresholds: tuple
    channel: str
    dim: int
    band: float = 0.40
    counts: list = field(default_factory=list)


def sample_quantile(values: np.ndarray, q: float, axis: int = 0) -> np.ndarray:
    """Smallest sample value whose empirical CDF reaches ``q``.

    Always returns an observed value; on two samples the median is the lower one.
    """
    return np.quantile(np.asarray(values), q, axis=axis, method="inverted_cdf")


def class_band_curves(
    matrix, labels, channel: str = "gray", dim: int = 0, band: float = 0.40, classes=None
) -> BandCurves:
    if not 0 < band < 1:
        raise ValueError("band must lie in (0, 1)")
    if channel not in CHANNELS or dim not in DIMS:
        raise ValueError(f"unknown channel/dim ({channel!r}, {dim!r})")
    X = np.asarray(matrix)
    labels = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] != len(labels):
        raise ValueError("matrix rows and labels must align")
    if X.shape[0] == 0:
        raise ValueError("no samples")
    if X.shape[1] not in (N_FEATURES, 2 * N_FEATURES):
        raise ValueError(f"expected {N_FEATURES} feature columns, got {X.shape[1]}")
    cols = X[:, feature_slice(channel, dim)]
    if classes is None:
        classes = sorted(set(labels.tolist()), key=str)
    lo_q, hi_q = (1 - band) / 2, (1 + band) / 2
    med, lo, hi, counts = [], [], [], []
    for c in classes:
        rows = cols[labels == c]
        if len(rows) == 0:
            raise ValueError(f"class {c!r} has no samples")
        med.append(sample_quantile(rows, 0.5))
        lo.append(sample_quantile(rows, lo_q))
        hi.append(sample_quantile(rows, hi_q))
        counts.append(len(rows))
    grid = tuple(threshold_grid(N_THRESHOLDS))
    return BandCurves(list(classes), np.array(med), np.array(lo), np.array(hi), grid, channel, dim, band, counts)


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


def render_betti_svg(curves: BandCurves, width: int = 640, height: int = 400) -> str:
    if not curves.classes:
        raise ValueError("no curves to plot")
    left, right, top, bottom = 60, 150, 30, 50
    pw, ph = width - left - right, height - top - bottom
    xs = np.asarray(curves.thresholds, dtype=float) / SCALE
    ymax = max(1.0, float(np.max(curves.upper)))

    def sx(x):
        return left + pw * x / 255.0

    def sy(y):
        return top + ph * (1 - y / ymax)

    def pts(xv, yv):
        return " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xv, yv))

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<title>{escape(f'Betti-{curves.dim} curves ({curves.channel})')}</title>",
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
    ]
    for tick in range(0, 256, 51):
        out.append(
            f'<text x="{sx(tick):.2f}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{tick}</text>'
        )
    for frac in (0, 0.5, 1):
        out.append(
            f'<text x="{left - 6}" y="{sy(ymax * frac) + 4:.2f}" font-size="11" text-anchor="end">'
            f"{ymax * frac:g}</text>"
        )
    out.append(
        f'<text x="{left + pw / 2:.2f}" y="{height - 10}" font-size="12" text-anchor="middle">'
        f"threshold ({escape(curves.channel)})</text>"
    )
    for k, c in enumerate(curves.classes):
        color = _PALETTE[k % len(_PALETTE)]
        poly = pts(xs, curves.upper[k]) + " " + pts(xs[::-1], curves.lower[k][::-1])
        out.append(f'<polygon class="band" points="{poly}" fill="{color}" fill-opacity="0.25" stroke="none"/>')
    for k, c in enumerate(curves.classes):
        color = _PALETTE[k % len(_PALETTE)]
        out.append(
            f'<polyline class="median" points="{pts(xs, curves.median[k])}" fill="none" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        ly = top + 14 + 18 * k
        out.append(
            f'<g class="legend"><rect x="{left + pw + 12}" y="{ly - 9}" width="12" height="12" fill="{color}"/>'
            f'<text x="{left + pw + 30}" y="{ly + 1}" font-size="12">{escape(str(c))}</text></g>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_betti_svg(curves: BandCurves, path) -> Path:
    svg = render_betti_svg(curves)
    path = Path(path)
    path.write_text(svg, encoding="utf-8")
    return path
