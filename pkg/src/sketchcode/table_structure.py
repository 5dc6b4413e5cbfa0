"""Recover the cell structure of a tool-drawn single-column table image.

Pipeline: extract horizontal and vertical line masks, merge them into a grid,
find the regions between the lines, filter out non-cell regions, then group
the surviving boxes into rows for top-to-bottom OCR.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import (
    BinaryImage,
    GrayImage,
    StructKernel,
    dilate,
    erode,
    gray_erode,
    open_binary,
    otsu_threshold,
    weighted_sum,
)


class EmptyRoiError(ValueError):
    """Raised when a cell degenerates to nothing after padding."""


@dataclass(frozen=True)
class CellBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"degenerate cell box {self}")


@dataclass
class GridExtraction:
    cells: list[CellBox]  # row-major: top-to-bottom, then left-to-right
    mean_height: float
    rows: list[list[int]]  # indices into cells


def line_kernel_size(image_width: int) -> int:
    """Line-extraction kernel length: 1/50th of the width, floor of 2."""
    return max(2, image_width // 50)


def extract_lines(bin_img: BinaryImage, orientation: str) -> BinaryImage:
    """Keep only line segments of one orientation (erode then dilate).

    Horizontal uses a 1xN kernel, vertical Nx1, N = max(2, width // 50).
    """
    n = line_kernel_size(bin_img.width)
    if orientation == "horizontal":
        kernel = StructKernel(width=n, height=1)
    elif orientation == "vertical":
        kernel = StructKernel(width=1, height=n)
    else:
        raise ValueError(f"orientation must be 'horizontal' or 'vertical', got {orientation!r}")
    return dilate(erode(bin_img, kernel), kernel)


def reconstruct_grid(horiz: BinaryImage, vert: BinaryImage) -> BinaryImage:
    """Merge line masks into the table lattice.

    The masks are combined as 0/255 grays with equal weights 0.5, eroded with
    a 2x2 kernel, and Otsu-thresholded back to binary.
    """
    if horiz.pixels.shape != vert.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {horiz.width}x{horiz.height} vs {vert.width}x{vert.height}"
        )
    h_gray = GrayImage(np.where(horiz.pixels, 255, 0).astype(np.uint8))
    v_gray = GrayImage(np.where(vert.pixels, 255, 0).astype(np.uint8))
    merged = weighted_sum(h_gray, v_gray, 0.5, 0.5)
    eroded = gray_erode(merged, StructKernel(2, 2))
    return otsu_threshold(eroded).image


def find_contours(bin_img: BinaryImage) -> list[CellBox]:
    """Bounding boxes of the 8-connected regions of the non-line polarity.

    Cell interiors are the background holes between grid lines; the outer
    background and any stray regions are returned too, for the filter step to
    reject. Order is deterministic: scanline discovery order.
    """
    background = ~bin_img.pixels
    labels, count = ndimage.label(background, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        return []
    slices = ndimage.find_objects(labels)
    # first-encounter scan position of each label
    flat = labels.ravel()
    first_seen = np.full(count + 1, flat.size, dtype=np.int64)
    idx = np.arange(flat.size - 1, -1, -1)
    first_seen[flat[::-1]] = idx
    order = sorted(range(1, count + 1), key=lambda lab: first_seen[lab])
    boxes = []
    for lab in order:
        sy, sx = slices[lab - 1]
        boxes.append(
            CellBox(x=int(sx.start), y=int(sy.start), w=int(sx.stop - sx.start), h=int(sy.stop - sy.start))
        )
    return boxes


def filter_cells(
    boxes: list[CellBox], image_height: int, min_cell_px: int = 8
) -> tuple[list[CellBox], float]:
    """Keep boxes with min_cell_px <= h <= 0.9 * image_height.

    Returns the kept boxes and the mean of their heights (0 if none kept).
    The whole-table and whole-image regions fail the upper bound.
    """
    valid = [b for b in boxes if min_cell_px <= b.h <= 0.9 * image_height]
    if not valid:
        return [], 0.0
    return valid, sum(b.h for b in valid) / len(valid)


def classify_rows(valid: list[CellBox], mean_height: float) -> GridExtraction:
    """Group boxes into rows by the half-mean-height rule.

    Boxes sorted by (y, x); a box joins the current row when its y is within
    mean_height/2 of the row anchor's y, else it starts a new row. Cells are
    flattened row-major.
    """
    if not valid:
        return GridExtraction(cells=[], mean_height=mean_height, rows=[])
    ordered = sorted(valid, key=lambda b: (b.y, b.x))
    row_groups: list[list[CellBox]] = [[ordered[0]]]
    anchor_y = ordered[0].y
    for box in ordered[1:]:
        if abs(box.y - anchor_y) <= mean_height / 2:
            row_groups[-1].append(box)
        else:
            row_groups.append([box])
            anchor_y = box.y
    cells: list[CellBox] = []
    rows: list[list[int]] = []
    for group in row_groups:
        group.sort(key=lambda b: b.x)
        rows.append(list(range(len(cells), len(cells) + len(group))))
        cells.extend(group)
    return GridExtraction(cells=cells, mean_height=mean_height, rows=rows)


def extract_grid(bin_img: BinaryImage, min_cell_px: int = 8) -> GridExtraction:
    """Full table-structure pipeline on a binarized table image."""
    horiz = extract_lines(bin_img, "horizontal")
    vert = extract_lines(bin_img, "vertical")
    grid = reconstruct_grid(horiz, vert)
    boxes = find_contours(grid)
    valid, mean_height = filter_cells(boxes, bin_img.height, min_cell_px=min_cell_px)
    return classify_rows(valid, mean_height)


def extract_cell_roi(gray: GrayImage, cell: CellBox, pad: int = 2) -> GrayImage:
    """Crop a cell shrunk inward by `pad` and clear isolated ink specks.

    The crop excludes rule lines; a 2x2 opening on the binarized crop marks
    sub-kernel components as noise, and those pixels are cleared to the
    background level in the returned gray crop.
    """
    if not (0 <= cell.x and 0 <= cell.y and cell.x + cell.w <= gray.width and cell.y + cell.h <= gray.height):
        raise ValueError(f"cell {cell} outside {gray.width}x{gray.height} image")
    x0, y0 = cell.x + pad, cell.y + pad
    x1, y1 = cell.x + cell.w - pad, cell.y + cell.h - pad
    if x1 - x0 < 1 or y1 - y0 < 1:
        raise EmptyRoiError(f"empty ROI: cell {cell.w}x{cell.h} with pad {pad}")
    crop = gray.pixels[y0:y1, x0:x1].copy()
    result = otsu_threshold(GrayImage(crop))
    mask = result.image
    opened = open_binary(mask, StructKernel(2, 2))
    specks = mask.pixels & ~opened.pixels
    crop[specks] = 0 if result.inverted else 255
    return GrayImage(crop)
