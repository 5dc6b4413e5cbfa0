"""Grayscale containers, binarization and rectangular-kernel morphology.

Foreground convention throughout the package: foreground = ink. Dark ink on
a light background is binarized with ``ink_is_dark=True``; light-on-dark
inputs are handled by the polarity auto-detection in :func:`otsu_threshold`.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class PgmError(ValueError):
    """Raised for unreadable or malformed PGM/PNG input."""


class GrayImage:
    """A width x height grayscale raster, values 0..255, row-major."""

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels)
        if pixels.ndim != 2 or pixels.size == 0:
            raise ValueError(f"expected non-empty 2-D array, got shape {pixels.shape}")
        if pixels.dtype != np.uint8:
            if pixels.min() < 0 or pixels.max() > 255:
                raise ValueError("luminance values must be within 0..255")
            pixels = pixels.astype(np.uint8)
        self.pixels = pixels

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


class BinaryImage:
    """A width x height mask; True = ink/foreground."""

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels)
        if pixels.ndim != 2 or pixels.size == 0:
            raise ValueError(f"expected non-empty 2-D array, got shape {pixels.shape}")
        self.pixels = pixels.astype(bool)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def foreground_fraction(self) -> float:
        return float(self.pixels.mean())

    def invert(self) -> "BinaryImage":
        return BinaryImage(~self.pixels)

    def __eq__(self, other) -> bool:
        return isinstance(other, BinaryImage) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"BinaryImage({self.width}x{self.height})"


@dataclass(frozen=True)
class StructKernel:
    """Rectangular all-ones structuring element."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"kernel dims must be >= 1, got {self.width}x{self.height}")

    @property
    def anchor(self) -> tuple[int, int]:
        # (row, col); even dims anchor at floor of the geometric center
        return (self.height - 1) // 2, (self.width - 1) // 2


# ---------------------------------------------------------------------------
# PGM / PNG I/O


def _read_pgm_tokens(data: bytes, path: str, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated ASCII integers, skipping # comments.

    Returns the tokens and the byte offset just past the last one.
    """
    tokens: list[int] = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PgmError(f"{path}: malformed header at byte {start}")
        tok = data[start:pos]
        if not tok.isdigit():
            raise PgmError(f"{path}: malformed header at byte {start}: {tok!r}")
        tokens.append(int(tok))
    return tokens, pos


def _load_png_gray(path: Path) -> GrayImage:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "1":
            im = im.convert("L")
        if im.mode != "L":
            raise PgmError(f"{path}: unsupported format: color input (mode {im.mode})")
        return GrayImage(np.asarray(im, dtype=np.uint8))


def load_gray(path: str | Path) -> GrayImage:
    """Load a PGM (P2/P5) or grayscale PNG image.

    Color inputs are rejected; callers convert upstream.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image: {path}")
    data = path.read_bytes()
    if data[:8].startswith(b"\x89PNG"):
        return _load_png_gray(path)
    if len(data) < 2:
        raise PgmError(f"{path}: malformed header")
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"{path}: unsupported format: magic {magic!r}")
    body = data[2:]
    header, consumed = _read_pgm_tokens(body, str(path), 3)
    w, h, maxval = header
    if w < 1 or h < 1:
        raise PgmError(f"{path}: malformed header: size {w}x{h}")
    if not 0 < maxval <= 255:
        raise PgmError(f"{path}: unsupported format: maxval {maxval}")
    if magic == b"P2":
        values, _ = _read_pgm_tokens(body[consumed:], str(path), w * h)
        arr = np.array(values, dtype=np.int64)
    else:
        # single whitespace byte after maxval, then raw payload
        payload = body[consumed + 1 :]
        if len(payload) < w * h:
            raise PgmError(
                f"{path}: truncated payload at byte {2 + consumed + 1 + len(payload)}"
                f" (expected {w * h} bytes, got {len(payload)})"
            )
        arr = np.frombuffer(payload[: w * h], dtype=np.uint8).astype(np.int64)
    if arr.max(initial=0) > maxval:
        raise PgmError(f"{path}: pixel value exceeds maxval {maxval}")
    return GrayImage(arr.reshape(h, w).astype(np.uint8))


def save_pgm(img: GrayImage, path: str | Path) -> None:
    """Write a GrayImage as binary PGM: header ``P5\\n<w> <h>\\n255\\n`` + raw bytes."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels.tobytes())


def save_binary_pgm(bin_img: BinaryImage, path: str | Path) -> None:
    """Write a BinaryImage as binary PGM, foreground -> 0, background -> 255."""
    gray = np.where(bin_img.pixels, 0, 255).astype(np.uint8)
    save_pgm(GrayImage(gray), path)


# ---------------------------------------------------------------------------
# Thresholding


def global_threshold(img: GrayImage, t: float, ink_is_dark: bool = True) -> BinaryImage:
    """Threshold at t: foreground iff luminance < t (ink_is_dark) else >= t."""
    if ink_is_dark:
        return BinaryImage(img.pixels < t)
    return BinaryImage(img.pixels >= t)


@dataclass
class OtsuResult:
    threshold: int
    image: BinaryImage
    constant: bool  # single gray level in the input
    inverted: bool  # polarity was flipped (light ink on dark background)


def otsu_threshold(img: GrayImage) -> OtsuResult:
    """Threshold minimizing the weighted intra-class variance.

    Candidates t in 1..255 split pixels into class 0 (< t) and class 1 (>= t);
    ties break to the smallest t. The comparison is exact (integer
    arithmetic), so the result always agrees with a brute-force scan.
    Polarity: ink is assumed dark; if the foreground fraction exceeds 0.5 the
    polarity is flipped.
    """
    hist = np.bincount(img.pixels.ravel(), minlength=256)
    levels = np.nonzero(hist)[0]
    if len(levels) == 1:
        t = int(levels[0]) + 1
        out = _auto_polarity(img, t)
        return OtsuResult(t, out[0], constant=True, inverted=out[1])

    total = int(img.pixels.size)
    # minimizing weighted intra-class variance == maximizing
    # S0^2/n0 + S1^2/n1, compared exactly as rationals via cross-multiplication
    best_t = None
    best = None  # (numerator, denominator) of the objective, both ints
    n0 = 0
    s0 = 0
    s_total = int(sum(int(v) * i for i, v in enumerate(hist)))
    for t in range(1, 256):
        n0 += int(hist[t - 1])
        s0 += int(hist[t - 1]) * (t - 1)
        n1 = total - n0
        s1 = s_total - s0
        if n0 == 0:
            num, den = s1 * s1, n1
        elif n1 == 0:
            num, den = s0 * s0, n0
        else:
            num, den = s0 * s0 * n1 + s1 * s1 * n0, n0 * n1
        if best is None or num * best[1] > best[0] * den:
            best = (num, den)
            best_t = t
    assert best_t is not None
    out = _auto_polarity(img, best_t)
    return OtsuResult(best_t, out[0], constant=False, inverted=out[1])


def _auto_polarity(img: GrayImage, t: float) -> tuple[BinaryImage, bool]:
    out = global_threshold(img, t, ink_is_dark=True)
    if out.foreground_fraction() > 0.5:
        return global_threshold(img, t, ink_is_dark=False), True
    return out, False


def mean_adaptive_threshold(
    img: GrayImage, kernel: StructKernel = StructKernel(73, 17), c: float = 2.0
) -> BinaryImage:
    """Foreground iff luminance < (mean of the kernel window) - c.

    Window means are exact (integral image over a replicate-padded frame).
    """
    ay, ax = kernel.anchor
    kh, kw = kernel.height, kernel.width
    padded = np.pad(
        img.pixels.astype(np.int64),
        ((ay, kh - 1 - ay), (ax, kw - 1 - ax)),
        mode="edge",
    )
    ii = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    ii[1:, 1:] = padded.cumsum(0).cumsum(1)
    h, w = img.pixels.shape
    sums = ii[kh : kh + h, kw : kw + w] - ii[kh : kh + h, :w] - ii[:h, kw : kw + w] + ii[:h, :w]
    area = kh * kw
    # lum < sum/area - c  <=>  (lum + c) * area < sum, exact for integer sums
    fg = (img.pixels.astype(np.float64) + c) * area < sums
    return BinaryImage(fg)


# ---------------------------------------------------------------------------
# Morphology


def _padded_windows(pixels: np.ndarray, kernel: StructKernel, reflect: bool, fill):
    ay, ax = kernel.anchor
    kh, kw = kernel.height, kernel.width
    pads = ((ay, kh - 1 - ay), (ax, kw - 1 - ax))
    if reflect:
        pads = (pads[0][::-1], pads[1][::-1])
    padded = np.pad(pixels, pads, mode="constant", constant_values=fill)
    return sliding_window_view(padded, (kh, kw))


def erode(bin_img: BinaryImage, kernel: StructKernel) -> BinaryImage:
    """Keep a pixel iff every pixel under the kernel is foreground.

    Out-of-bounds pixels count as background.
    """
    windows = _padded_windows(bin_img.pixels, kernel, reflect=False, fill=False)
    return BinaryImage(windows.all(axis=(2, 3)))


def dilate(bin_img: BinaryImage, kernel: StructKernel) -> BinaryImage:
    """Set a pixel iff any pixel under the reflected kernel is foreground.

    The reflected window makes (erode, dilate) an adjunction, so the
    morphological filter laws hold exactly for every rectangular kernel.
    Out-of-bounds pixels count as background.
    """
    windows = _padded_windows(bin_img.pixels, kernel, reflect=True, fill=False)
    return BinaryImage(windows.any(axis=(2, 3)))


def open_binary(bin_img: BinaryImage, kernel: StructKernel) -> BinaryImage:
    """Morphological opening: erode then dilate."""
    return dilate(erode(bin_img, kernel), kernel)


def gray_erode(img: GrayImage, kernel: StructKernel) -> GrayImage:
    """Minimum filter; out-of-bounds counts as 0 (background for bright ink)."""
    windows = _padded_windows(img.pixels.astype(np.int16), kernel, reflect=False, fill=0)
    return GrayImage(windows.min(axis=(2, 3)).astype(np.uint8))


def weighted_sum(a: GrayImage, b: GrayImage, alpha: float, beta: float) -> GrayImage:
    """Per-pixel alpha*a + beta*b, rounded half-up, clamped to 0..255."""
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    merged = alpha * a.pixels.astype(np.float64) + beta * b.pixels.astype(np.float64)
    rounded = np.floor(merged + 0.5)
    return GrayImage(np.clip(rounded, 0, 255).astype(np.uint8))
