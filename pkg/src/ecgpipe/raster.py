"""
Deterministic rendering of 12-lead records to 8-bit grayscale images.

Each lead gets its own horizontal band. A lead is min-max scaled into its
band, drawn as a 1 px polyline on a canvas ``supersample`` times larger in
each direction, then box-averaged back down and rounded half-to-even.
Only integer arithmetic touches the canvas, so output is byte-identical
across platforms.
"""

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError
from .records import N_LEADS

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
WIDTH, HEIGHT = 506, 187


@dataclass(frozen=True)
class RasterConfig:
    width: int = WIDTH
    height: int = HEIGHT
    supersample: int = 4
    background: int = 255
    trace: int = 0

    def __post_init__(self):
        if self.supersample < 1:
            raise DomainError("supersample must be >= 1")
        if self.width < 2 or self.height < N_LEADS:
            raise DomainError(f"image {self.width}x{self.height} too small for 12 bands")
        for v in (self.background, self.trace):
            if not 0 <= v <= 255:
                raise DomainError("luminance values must lie in 0..255")

    @property
    def band_height(self):
        return self.height // N_LEADS

    @property
    def top_margin(self):
        return (self.height - N_LEADS * self.band_height) // 2

    def band_rows(self, k):
        """Output rows [start, stop) of band ``k``."""
        start = self.top_margin + k * self.band_height
        return start, start + self.band_height


@dataclass(frozen=True, eq=False)
class RasterImage:
    width: int
    height: int
    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.shape != (self.height, self.width) or px.dtype != np.uint8:
            raise DomainError(
                f"pixels must be uint8 of shape {(self.height, self.width)}, "
                f"got {px.dtype} {px.shape}")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    def tobytes(self):
        return self.pixels.tobytes()


def sample_columns(n_samples, canvas_width):
    """Canvas x of each sample: round-half-even of i*(W-1)/(n-1)."""
    i = np.arange(n_samples, dtype=np.int64)
    num = i * (canvas_width - 1)
    den = n_samples - 1
    q, r = np.divmod(num, den)
    up = (2 * r > den) | ((2 * r == den) & (q % 2 == 1))
    return q + up


def _lead_rows(values, top, band_px):
    """Canvas y of each sample inside a band of ``band_px`` rows starting at ``top``."""
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full(len(values), top + int(np.rint((band_px - 1) / 2)), dtype=np.int64)
    scaled = (values - lo) / (hi - lo)
    return top + np.rint((band_px - 1) * (1.0 - scaled)).astype(np.int64)


def line_pixels(x0, y0, x1, y1):
    """Integer DDA between consecutive vertices, vectorised over segments.

    Each segment of length L = max(|dx|, |dy|) contributes points
    k = 0..L with coordinates rounded half-up in exact integer arithmetic.
    """
    dx, dy = x1 - x0, y1 - y0
    steps = np.maximum(np.abs(dx), np.abs(dy))
    counts = steps + 1
    seg = np.repeat(np.arange(len(x0)), counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    s = np.maximum(steps[seg], 1)
    xs = x0[seg] + (2 * dx[seg] * offsets + s) // (2 * s)
    ys = y0[seg] + (2 * dy[seg] * offsets + s) // (2 * s)
    return xs, ys


def rasterize(record, cfg=None):
    """Render ``record`` to a ``cfg.width`` x ``cfg.height`` grayscale image."""
    cfg = cfg or RasterConfig()
    leads = np.asarray(record.leads, dtype=np.float64)
    if leads.ndim != 2 or leads.shape[0] != N_LEADS or leads.shape[1] < 2:
        raise DomainError(
            f"record {record.record_id!r}: need 12 leads of at least 2 samples")
    S = cfg.supersample
    cw, ch = cfg.width * S, cfg.height * S
    ink = np.zeros((ch, cw), dtype=bool)

    n = leads.shape[1]
    xs = sample_columns(n, cw)
    band_px = cfg.band_height * S
    for k in range(N_LEADS):
        top = cfg.band_rows(k)[0] * S
        ys = _lead_rows(leads[k], top, band_px)
        px, py = line_pixels(xs[:-1], ys[:-1], xs[1:], ys[1:])
        ink[py, px] = True

    # box average of S x S blocks; sums are integers so rounding is exact
    levels = np.where(ink, cfg.trace, cfg.background).astype(np.int64)
    sums = levels.reshape(cfg.height, S, cfg.width, S).sum(axis=(1, 3))
    area = S * S
    q, r = np.divmod(sums, area)
    up = (2 * r > area) | ((2 * r == area) & (q % 2 == 1))
    pixels = (q + up).astype(np.uint8)
    return RasterImage(cfg.width, cfg.height, pixels)


def _chunk(kind, data):
    crc = zlib.crc32(data, zlib.crc32(kind))
    return struct.pack(">L", len(data)) + kind + data + struct.pack(">L", crc)


def encode_png(img):
    """8-bit grayscale, non-interlaced PNG bytes (filter type 0 on every row)."""
    header = struct.pack(">LLBBBBB", img.width, img.height, 8, 0, 0, 0, 0)
    rows = np.hstack([np.zeros((img.height, 1), np.uint8), img.pixels])
    return (PNG_SIGNATURE
            + _chunk(b"IHDR", header)
            + _chunk(b"IDAT", zlib.compress(rows.tobytes(), 9))
            + _chunk(b"IEND", b""))


def write_png(img, path):
    Path(path).write_bytes(encode_png(img))


def _unfilter(ftype, line, prev, bpp=1):
    out = bytearray(line)
    n = len(out)
    if ftype == 0:
        return out
    for i in range(n):
        a = out[i - bpp] if i >= bpp else 0
        b = prev[i]
        c = prev[i - bpp] if i >= bpp else 0
        if ftype == 1:
            pred = a
        elif ftype == 2:
            pred = b
        elif ftype == 3:
            pred = (a + b) // 2
        elif ftype == 4:
            p = a + b - c
            pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
            pred = a if pa <= pb and pa <= pc else (b if pb <= pc else c)
        else:
            raise FormatError(f"unknown PNG filter type {ftype}")
        out[i] = (out[i] + pred) & 0xFF
    return out


def decode_png(data):
    """Decode an 8-bit grayscale non-interlaced PNG into a RasterImage."""
    if data[:8] != PNG_SIGNATURE:
        raise FormatError("not a PNG file")
    pos, idat, header = 8, bytearray(), None
    while pos < len(data):
        (length,) = struct.unpack(">L", data[pos:pos + 4])
        kind = data[pos + 4:pos + 8]
        body = data[pos + 8:pos + 8 + length]
        pos += 12 + length
        if kind == b"IHDR":
            header = struct.unpack(">LLBBBBB", body)
        elif kind == b"IDAT":
            idat += body
        elif kind == b"IEND":
            break
    if header is None:
        raise FormatError("PNG without IHDR")
    width, height, depth, color, _, _, interlace = header
    if (depth, color, interlace) != (8, 0, 0):
        raise FormatError("only 8-bit grayscale non-interlaced PNGs are supported")
    raw = zlib.decompress(bytes(idat))
    stride = width + 1
    if len(raw) != stride * height:
        raise FormatError("PNG image data has the wrong length")
    prev = bytearray(width)
    rows = []
    for y in range(height):
        line = raw[y * stride:(y + 1) * stride]
        prev = _unfilter(line[0], line[1:], prev)
        rows.append(bytes(prev))
    pixels = np.frombuffer(b"".join(rows), dtype=np.uint8).reshape(height, width)
    return RasterImage(width, height, pixels)


def read_png(path):
    return decode_png(Path(path).read_bytes())


def heat_grid(matrix, cell=24):
    """Grayscale heat-grid of a non-negative matrix (dark = large)."""
    m = np.asarray(matrix, dtype=np.float64)
    peak = m.max() if m.size and m.max() > 0 else 1.0
    levels = 255 - np.rint(255 * m / peak).astype(np.int64)
    pixels = np.kron(levels, np.ones((cell, cell), dtype=np.int64)).astype(np.uint8)
    # 1 px separators between cells
    pixels[::cell, :] = 128
    pixels[:, ::cell] = 128
    return RasterImage(pixels.shape[1], pixels.shape[0], pixels)
