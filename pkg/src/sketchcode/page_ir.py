"""Page-level intermediate representation: the JSON object file sitting
between detection and code generation.

Linker detections never become page elements; their OCR text turns into the
link_target of the element they overlap most.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .detections import Box, DetectionSet, TextDetection, UiClass, ioe
from .ocr import Recognizer
from .raster import GrayImage

log = logging.getLogger(__name__)

TEXT_ATTACH_FLOOR = 0.25  # below this IoE a text is free-standing content


class IrSchemaError(ValueError):
    """Malformed PageIr JSON."""


@dataclass
class PageElement:
    cls: UiClass
    box: Box
    text: str | None = None
    link_target: str | None = None


@dataclass
class PageIr:
    image_id: str
    canvas_w: int
    canvas_h: int
    elements: list[PageElement] = field(default_factory=list)
    rows: list[list[int]] = field(default_factory=list)  # indices into elements


def _crop_region(gray: GrayImage | None, box: Box) -> GrayImage:
    """Crop the page image under a box; a 1x1 blank stands in when no image
    is available (fixture recognizers ignore region content)."""
    if gray is None:
        return GrayImage(np.full((1, 1), 255, dtype=np.uint8))
    x0 = max(0, min(gray.width - 1, math.floor(box.x_min)))
    y0 = max(0, min(gray.height - 1, math.floor(box.y_min)))
    x1 = max(x0 + 1, min(gray.width, math.ceil(box.x_max)))
    y1 = max(y0 + 1, min(gray.height, math.ceil(box.y_max)))
    return GrayImage(gray.pixels[y0:y1, x0:x1])


def infer_layout(elements: list[PageElement]) -> list[list[int]]:
    """Cluster elements into rows by vertical overlap.

    Two elements share a row iff their vertical overlap is at least half the
    smaller height; sharing is transitive. Rows come out ordered by their
    topmost y, members by ascending x_min.
    """
    n = len(elements)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            a, b = elements[i].box, elements[j].box
            overlap = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
            if overlap >= 0.5 * min(a.height, b.height):
                parent[find(i)] = find(j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    rows = sorted(groups.values(), key=lambda g: min(elements[i].box.y_min for i in g))
    for row in rows:
        row.sort(key=lambda i: (elements[i].box.x_min, i))
    return rows


def build_ir(
    dets: DetectionSet,
    retained: list[TextDetection],
    ocr: Recognizer,
    gray: GrayImage | None = None,
) -> PageIr:
    """Assemble the page IR from overlap-resolved detections and retained
    text boxes.

    Retained texts are recognized first (input order), then Linkers; a text
    attaches to the non-Linker element of maximal IoE when that maximum
    reaches the attach floor, otherwise it becomes a standalone Paragraph.
    Each Linker's text becomes the link_target of the element it overlaps
    most (ties to the highest score); Linkers with no overlap are dropped
    with a warning.
    """
    elements = [
        PageElement(cls=d.cls, box=d.box) for d in dets.uis if d.cls is not UiClass.LINKER
    ]
    element_scores = [d.score for d in dets.uis if d.cls is not UiClass.LINKER]
    linkers = [d for d in dets.uis if d.cls is UiClass.LINKER]

    for text_det in retained:
        text = text_det.text
        if text is None:
            text = ocr.recognize(_crop_region(gray, text_det.box)).text
        best_i, best_ioe = None, 0.0
        for i, element in enumerate(elements):
            value = ioe(text_det.box, element.box)
            if value > best_ioe:
                best_i, best_ioe = i, value
        if best_i is not None and best_ioe >= TEXT_ATTACH_FLOOR:
            target = elements[best_i]
            target.text = text if target.text is None else f"{target.text} {text}"
        else:
            elements.append(PageElement(cls=UiClass.PARAGRAPH, box=text_det.box, text=text))
            element_scores.append(text_det.score)

    for linker in linkers:
        target_text = ocr.recognize(_crop_region(gray, linker.box)).text
        best_i, best_key = None, (0.0, 0.0)
        for i, element in enumerate(elements):
            key = (ioe(linker.box, element.box), element_scores[i])
            if key > best_key:
                best_i, best_key = i, key
        if best_i is None or best_key[0] == 0.0:
            log.warning("%s: Linker at %s overlaps no element; dropped", dets.image_id, linker.box)
            continue
        if not target_text:
            log.warning("%s: Linker at %s has empty OCR text; dropped", dets.image_id, linker.box)
            continue
        elements[best_i].link_target = target_text

    return PageIr(
        image_id=dets.image_id,
        canvas_w=dets.image_w,
        canvas_h=dets.image_h,
        elements=elements,
        rows=infer_layout(elements),
    )


# ---------------------------------------------------------------------------
# Serialization


def serialize_ir(ir: PageIr) -> str:
    """Canonical JSON: fixed field order, 2-space indent, trailing newline."""
    doc = {
        "image_id": ir.image_id,
        "canvas_w": ir.canvas_w,
        "canvas_h": ir.canvas_h,
        "elements": [
            {
                "cls": e.cls.value,
                "box": [e.box.x_min, e.box.y_min, e.box.x_max, e.box.y_max],
                "text": e.text,
                "link_target": e.link_target,
            }
            for e in ir.elements
        ],
        "rows": ir.rows,
    }
    return json.dumps(doc, indent=2) + "\n"


def _expect(cond: bool, pointer: str, message: str) -> None:
    if not cond:
        raise IrSchemaError(f"{message} at {pointer}")


def deserialize_ir(text: str) -> PageIr:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IrSchemaError(f"invalid JSON: {exc}") from exc
    _expect(isinstance(doc, dict), "/", "document must be an object")
    for key in ("image_id", "canvas_w", "canvas_h", "elements", "rows"):
        _expect(key in doc, f"/{key}", "missing required field")
    _expect(isinstance(doc["image_id"], str), "/image_id", "image_id must be a string")
    for key in ("canvas_w", "canvas_h"):
        _expect(isinstance(doc[key], int) and not isinstance(doc[key], bool) and doc[key] >= 1,
                f"/{key}", "must be a positive integer")
    _expect(isinstance(doc["elements"], list), "/elements", "elements must be an array")
    elements: list[PageElement] = []
    for i, entry in enumerate(doc["elements"]):
        p = f"/elements/{i}"
        _expect(isinstance(entry, dict), p, "entry must be an object")
        for key in ("cls", "box", "text", "link_target"):
            _expect(key in entry, f"{p}/{key}", "missing required field")
        _expect(isinstance(entry["cls"], str), f"{p}/cls", "cls must be a string")
        try:
            cls = UiClass.parse(entry["cls"])
        except ValueError as exc:
            raise IrSchemaError(f"{exc} at {p}/cls") from exc
        box_val = entry["box"]
        _expect(
            isinstance(box_val, list) and len(box_val) == 4
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in box_val),
            f"{p}/box", "box must be [x_min,y_min,x_max,y_max]",
        )
        try:
            box = Box(*[float(v) for v in box_val])
        except ValueError as exc:
            raise IrSchemaError(f"{exc} at {p}/box") from exc
        for key in ("text", "link_target"):
            _expect(entry[key] is None or isinstance(entry[key], str),
                    f"{p}/{key}", f"{key} must be a string or null")
        elements.append(PageElement(cls=cls, box=box, text=entry["text"], link_target=entry["link_target"]))
    _expect(isinstance(doc["rows"], list), "/rows", "rows must be an array")
    rows: list[list[int]] = []
    seen: set[int] = set()
    for i, row in enumerate(doc["rows"]):
        p = f"/rows/{i}"
        _expect(isinstance(row, list), p, "row must be an array")
        for j, idx in enumerate(row):
            _expect(isinstance(idx, int) and not isinstance(idx, bool), f"{p}/{j}", "index must be an integer")
            _expect(0 <= idx < len(elements), f"{p}/{j}", f"index {idx} out of range")
            _expect(idx not in seen, f"{p}/{j}", f"index {idx} appears twice")
            seen.add(idx)
        rows.append(list(row))
    _expect(len(seen) == len(elements), "/rows", "rows must partition all element indices")
    return PageIr(
        image_id=doc["image_id"],
        canvas_w=doc["canvas_w"],
        canvas_h=doc["canvas_h"],
        elements=elements,
        rows=rows,
    )
