"""Netpbm / CSV image loading and exact-integer channel extraction.

Channel values are stored scaled by 3 so the grayscale mean of R, G, B is an
integer: ``gray = r + g + b`` and ``red = 3 * r``.  Every stored value lies in
``[0, 765]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCALE = 3
MAX_SCALED = 255 * SCALE
CHANNELS = ("red", "green", "blue", "gray")
FORMATS = ("pgm-ascii", "pgm-binary", "ppm-ascii", "ppm-binary", "csv")

_MAGIC = {"P2": "pgm-ascii", "P3": "ppm-ascii", "P5": "pgm-binary", "P6": "ppm-binary"}
_MAGIC_OF = {v: k for k, v in _MAGIC.items()}


class ImageFormatError(ValueError):
    """Raised for malformed or unsupported image files; carries the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


@dataclass(frozen=True)
class RgbImage:
    pixels: np.ndarray  # (rows, cols, 3) uint8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (rows, cols, 3) pixel array, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must have at least one row and one column")
        if px.dtype != np.uint8:
            if np.issubdtype(px.dtype, np.floating) and not np.all(px == np.round(px)):
                raise ValueError("pixel components must be integers")
            if px.min() < 0 or px.max() > 255:
                raise ValueError("pixel components must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def from_gray(cls, gray) -> "RgbImage":
        g = np.asarray(gray)
        return cls(np.repeat(g[:, :, None], 3, axis=2))

    def is_monochrome(self) -> bool:
        p = self.pixels
        return bool(np.all(p[..., 0] == p[..., 1]) and np.all(p[..., 1] == p[..., 2]))


@dataclass(frozen=True)
class ChannelMatrix:
    values: np.ndarray  # (rows, cols) int32, scaled by 3
    channel: str = "gray"

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.int32))
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"channel matrix must be a non-empty 2-D grid, got shape {v.shape}")
        if v.min() < 0 or v.max() > MAX_SCALED:
            raise ValueError(f"channel values must lie in [0, {MAX_SCALED}]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def scale(self) -> int:
        return SCALE


def extract_channel(img: RgbImage, channel: str) -> ChannelMatrix:
    px = img.pixels.astype(np.int32)
    if channel == "gray":
        vals = px.sum(axis=2)
    elif channel in CHANNELS:
        vals = SCALE * px[..., CHANNELS.index(channel)]
    else:
        raise ValueError(f"unknown channel {channel!r}; expected one of {CHANNELS}")
    return ChannelMatrix(vals, channel)


# ---------------------------------------------------------------- decoding


class _Reader:
    """Token reader for Netpbm headers (handles '#' comments)."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _skip_ws(self):
        d = self.data
        while self.pos < len(d):
            c = d[self.pos]
            if c == 0x23:  # '#'
                while self.pos < len(d) and d[self.pos] not in (0x0A, 0x0D):
                    self.pos += 1
            elif c in b" \t\r\n\v\f":
                self.pos += 1
            else:
                break

    def token(self, what: str) -> tuple[bytes, int]:
        self._skip_ws()
        start = self.pos
        d = self.data
        while self.pos < len(d) and d[self.pos] not in b" \t\r\n\v\f#":
            self.pos += 1
        if start == self.pos:
            raise ImageFormatError(f"unexpected end of data while reading {what}", start)
        return d[start : self.pos], start

    def integer(self, what: str) -> tuple[int, int]:
        tok, off = self.token(what)
        if not tok.isdigit():
            raise ImageFormatError(f"malformed {what}: {tok[:20]!r}", off)
        return int(tok), off


def _decode_netpbm(data: bytes, fmt: str) -> RgbImage:
    rd = _Reader(data)
    magic, off = rd.token("magic number")
    if _MAGIC.get(magic.decode("latin-1")) != fmt:
        raise ImageFormatError(f"malformed header: magic {magic[:4]!r} does not match format {fmt}", off)
    cols, off = rd.integer("width")
    rows, _ = rd.integer("height")
    if rows == 0 or cols == 0:
        raise ImageFormatError(f"zero-sized image ({cols}x{rows})", off)
    maxval, maxval_off = rd.integer("maxval")
    if maxval != 255:
        raise ImageFormatError(f"unsupported maxval {maxval} (only 255 is accepted)", maxval_off)
    depth = 3 if fmt.startswith("ppm") else 1
    count = rows * cols * depth

    if fmt.endswith("binary"):
        # exactly one whitespace byte separates maxval from the raster
        if rd.pos >= len(data) or data[rd.pos] not in b" \t\r\n\v\f":
            raise ImageFormatError("missing whitespace after maxval", rd.pos)
        start = rd.pos + 1
        raster = data[start : start + count]
        if len(raster) < count:
            raise ImageFormatError(
                f"truncated pixel data: expected {count} bytes, found {len(raster)}", start + len(raster)
            )
        vals = np.frombuffer(raster, dtype=np.uint8).copy()
    else:
        vals = np.empty(count, dtype=np.int64)
        for i in range(count):
            try:
                tok, toff = rd.token("pixel value")
            except ImageFormatError as exc:
                raise ImageFormatError(
                    f"truncated pixel data: expected {count} values, found {i}", exc.offset
                ) from None
            if not tok.isdigit() or int(tok) > 255:
                raise ImageFormatError(f"invalid pixel value {tok[:20]!r}", toff)
            vals[i] = int(tok)
        vals = vals.astype(np.uint8)

    if depth == 1:
        return RgbImage.from_gray(vals.reshape(rows, cols))
    return RgbImage(vals.reshape(rows, cols, 3))


def _decode_csv(data: bytes) -> RgbImage:
    rows: list[list[int]] = []
    offset = 0
    for line in data.split(b"\n"):
        line_off = offset
        offset += len(line) + 1
        stripped = line.strip()
        if not stripped:
            continue
        row = []
        col_off = line_off
        for cell in line.split(b","):
            c = cell.strip()
            if not c.isdigit() or int(c) > 255:
                raise ImageFormatError(f"invalid CSV pixel value {c[:20]!r}", col_off)
            row.append(int(c))
            col_off += len(cell) + 1
        if rows and len(row) != len(rows[0]):
            raise ImageFormatError(
                f"ragged CSV matrix: row has {len(row)} values, expected {len(rows[0])}", line_off
            )
        rows.append(row)
    if not rows:
        raise ImageFormatError("zero-sized image (empty CSV)", 0)
    return RgbImage.from_gray(np.array(rows, dtype=np.uint8))


def guess_format(path) -> str:
    """Pick a format from the file extension, falling back to the magic number."""
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".csv":
        return "csv"
    with open(p, "rb") as fh:
        magic = fh.read(2).decode("latin-1")
    if magic in _MAGIC:
        return _MAGIC[magic]
    raise ImageFormatError(f"cannot determine image format of {p}", 0)


def load_image(path, format: str | None = None) -> RgbImage:
    if format is None:
        format = guess_format(path)
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    data = Path(path).read_bytes()
    return decode_image(data, format)


def decode_image(data: bytes, format: str) -> RgbImage:
    if format == "csv":
        return _decode_csv(data)
    return _decode_netpbm(data, format)


# ---------------------------------------------------------------- encoding


def encode_image(img: RgbImage, format: str) -> bytes:
    px = img.pixels
    if format in ("pgm-ascii", "pgm-binary", "csv") and not img.is_monochrome():
        raise ValueError(f"{format} can only store grayscale images")
    if format == "csv":
        return "".join(",".join(str(int(v)) for v in row) + "\n" for row in px[..., 0]).encode()
    magic = _MAGIC_OF[format]
    header = f"{magic}\n{img.cols} {img.rows}\n255\n".encode()
    body = px[..., 0] if format.startswith("pgm") else px
    if format.endswith("binary"):
        return header + body.tobytes()
    flat = body.reshape(img.rows, -1)
    return header + "".join(" ".join(str(int(v)) for v in row) + "\n" for row in flat).encode()


def save_image(img: RgbImage, path, format: str | None = None) -> None:
    if format is None:
        format = {".csv": "csv", ".pgm": "pgm-binary", ".ppm": "ppm-binary"}.get(
            Path(path).suffix.lower(), "ppm-binary"
        )
    Path(path).write_bytes(encode_image(img, format))


def read_matrix_csv(path) -> np.ndarray:
    """Plain integer matrix (no header, comma separated); used for test fixtures."""
    return np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
