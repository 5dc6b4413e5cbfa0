"""UI-element and text detections: ingestion, box geometry and filtering.

Detections arrive from files (Pascal-VOC XML or the JSON interchange format);
the neural detector and text detector that produce them are upstream tools.
"""
from __future__ import annotations

import enum
import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path


class DetectionSchemaError(ValueError):
    """Malformed detections file (VOC XML or interchange JSON)."""


class UiClass(enum.Enum):
    PARAGRAPH = "Paragraph"
    IMAGE = "Image"
    INPUT = "Input"
    BUTTON = "Button"
    HYPERLINK = "Hyperlink"
    SELECT = "Select"
    TABLE = "Table"
    NAVBAR = "Navbar"
    CHECKBOX = "Checkbox"
    RADIO = "Radio"
    LINKER = "Linker"

    @classmethod
    def parse(cls, name: str) -> "UiClass":
        for member in cls:
            if member.value.lower() == name.lower():
                return member
        raise DetectionSchemaError(f"unknown class: {name}")


# overlap-resolution ranks, high priority first; Linker last (it is exempt
# from suppression against non-Linkers anyway)
DEFAULT_PRIORITIES: dict[UiClass, int] = {
    cls: rank
    for rank, cls in enumerate(
        [
            UiClass.NAVBAR,
            UiClass.TABLE,
            UiClass.SELECT,
            UiClass.INPUT,
            UiClass.BUTTON,
            UiClass.HYPERLINK,
            UiClass.CHECKBOX,
            UiClass.RADIO,
            UiClass.IMAGE,
            UiClass.PARAGRAPH,
            UiClass.LINKER,
        ]
    )
}


@dataclass(frozen=True)
class Box:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"inverted box: ({self.x_min},{self.y_min},{self.x_max},{self.y_max})"
            )

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class UiDetection:
    cls: UiClass
    box: Box
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score outside [0,1]: {self.score}")


@dataclass(frozen=True)
class TextDetection:
    box: Box
    score: float
    text: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score outside [0,1]: {self.score}")


@dataclass
class DetectionSet:
    image_id: str
    image_w: int
    image_h: int
    uis: list[UiDetection] = field(default_factory=list)
    texts: list[TextDetection] = field(default_factory=list)


def _check_inside(box: Box, image_w: int, image_h: int, where: str) -> None:
    if box.x_min < 0 or box.y_min < 0 or box.x_max > image_w or box.y_max > image_h:
        raise DetectionSchemaError(
            f"{where}: box ({box.x_min},{box.y_min},{box.x_max},{box.y_max})"
            f" outside image {image_w}x{image_h}"
        )


# ---------------------------------------------------------------------------
# Pascal VOC ingestion


def parse_voc(xml_path: str | Path) -> DetectionSet:
    """Parse a Pascal-VOC annotation file into a DetectionSet.

    UiClass-named objects become UiDetections with score 1.0; object name
    "text" becomes a TextDetection. Any other names abort with an error
    listing them.
    """
    xml_path = Path(xml_path)
    try:
        root = ET.parse(xml_path).getroot()
    except ET.ParseError as exc:
        raise DetectionSchemaError(f"{xml_path}: malformed XML: {exc}") from exc

    size = root.find("size")
    if size is None or size.find("width") is None or size.find("height") is None:
        raise DetectionSchemaError(f"{xml_path}: missing <size> with width/height")
    image_w = int(size.findtext("width"))
    image_h = int(size.findtext("height"))

    filename = root.findtext("filename")
    image_id = Path(filename).stem if filename else xml_path.stem

    ds = DetectionSet(image_id=image_id, image_w=image_w, image_h=image_h)
    unknown: list[str] = []
    for i, obj in enumerate(root.iter("object")):
        name = (obj.findtext("name") or "").strip()
        bnd = obj.find("bndbox")
        if bnd is None:
            raise DetectionSchemaError(f"{xml_path}: object {i} has no <bndbox>")
        try:
            coords = [float(bnd.findtext(k)) for k in ("xmin", "ymin", "xmax", "ymax")]
        except (TypeError, ValueError) as exc:
            raise DetectionSchemaError(f"{xml_path}: object {i}: bad bndbox") from exc
        try:
            box = Box(*coords)
        except ValueError as exc:
            raise DetectionSchemaError(f"{xml_path}: object {i} ({name}): {exc}") from exc
        _check_inside(box, image_w, image_h, f"{xml_path}: object {i} ({name})")
        if name.lower() == "text":
            ds.texts.append(TextDetection(box=box, score=1.0))
            continue
        try:
            cls = UiClass.parse(name)
        except DetectionSchemaError:
            unknown.append(name)
            continue
        ds.uis.append(UiDetection(cls=cls, box=box, score=1.0))
    if unknown:
        raise DetectionSchemaError(f"{xml_path}: unknown class: {', '.join(unknown)}")
    return ds


# ---------------------------------------------------------------------------
# JSON interchange


def _expect(cond: bool, pointer: str, message: str) -> None:
    if not cond:
        raise DetectionSchemaError(f"{message} at {pointer}")


def _box_from_json(value, pointer: str) -> Box:
    _expect(isinstance(value, list) and len(value) == 4, pointer, "box must be [x_min,y_min,x_max,y_max]")
    _expect(all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value), pointer, "box values must be numbers")
    try:
        return Box(*[float(v) for v in value])
    except ValueError as exc:
        raise DetectionSchemaError(f"{exc} at {pointer}") from exc


def _score_from_json(value, pointer: str) -> float:
    _expect(isinstance(value, (int, float)) and not isinstance(value, bool), pointer, "score must be a number")
    _expect(0.0 <= value <= 1.0, pointer, f"score outside [0,1]: {value}")
    return float(value)


def detection_set_from_dict(doc, pointer: str = "") -> DetectionSet:
    _expect(isinstance(doc, dict), pointer or "/", "document must be an object")
    for key in ("image_id", "image_w", "image_h", "uis", "texts"):
        _expect(key in doc, f"{pointer}/{key}", "missing required field")
    _expect(isinstance(doc["image_id"], str), f"{pointer}/image_id", "image_id must be a string")
    for key in ("image_w", "image_h"):
        _expect(isinstance(doc[key], int) and not isinstance(doc[key], bool) and doc[key] >= 1,
                f"{pointer}/{key}", "must be a positive integer")
    ds = DetectionSet(image_id=doc["image_id"], image_w=doc["image_w"], image_h=doc["image_h"])
    _expect(isinstance(doc["uis"], list), f"{pointer}/uis", "uis must be an array")
    for i, entry in enumerate(doc["uis"]):
        p = f"{pointer}/uis/{i}"
        _expect(isinstance(entry, dict), p, "entry must be an object")
        for key in ("class", "box", "score"):
            _expect(key in entry, f"{p}/{key}", "missing required field")
        _expect(isinstance(entry["class"], str), f"{p}/class", "class must be a string")
        try:
            cls = UiClass.parse(entry["class"])
        except DetectionSchemaError as exc:
            raise DetectionSchemaError(f"{exc} at {p}/class") from exc
        box = _box_from_json(entry["box"], f"{p}/box")
        score = _score_from_json(entry["score"], f"{p}/score")
        _check_inside(box, ds.image_w, ds.image_h, p)
        ds.uis.append(UiDetection(cls=cls, box=box, score=score))
    _expect(isinstance(doc["texts"], list), f"{pointer}/texts", "texts must be an array")
    for i, entry in enumerate(doc["texts"]):
        p = f"{pointer}/texts/{i}"
        _expect(isinstance(entry, dict), p, "entry must be an object")
        for key in ("box", "score", "text"):
            _expect(key in entry, f"{p}/{key}", "missing required field")
        box = _box_from_json(entry["box"], f"{p}/box")
        score = _score_from_json(entry["score"], f"{p}/score")
        text = entry["text"]
        _expect(text is None or isinstance(text, str), f"{p}/text", "text must be a string or null")
        _check_inside(box, ds.image_w, ds.image_h, p)
        ds.texts.append(TextDetection(box=box, score=score, text=text))
    return ds


def parse_detections_json(path: str | Path) -> DetectionSet:
    """Parse the JSON interchange format into a validated DetectionSet."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DetectionSchemaError(f"{path}: invalid JSON: {exc}") from exc
    return detection_set_from_dict(doc)


def detection_set_to_dict(ds: DetectionSet) -> dict:
    return {
        "image_id": ds.image_id,
        "image_w": ds.image_w,
        "image_h": ds.image_h,
        "uis": [
            {"class": d.cls.value, "box": [d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max], "score": d.score}
            for d in ds.uis
        ],
        "texts": [
            {"box": [t.box.x_min, t.box.y_min, t.box.x_max, t.box.y_max], "score": t.score, "text": t.text}
            for t in ds.texts
        ],
    }


def serialize_detections(ds: DetectionSet) -> str:
    return json.dumps(detection_set_to_dict(ds), indent=2) + "\n"


# ---------------------------------------------------------------------------
# Geometry


def _intersection_area(a: Box, b: Box) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: Box, b: Box) -> float:
    """Intersection over union; 0 when disjoint."""
    inter = _intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def ioe(text_box: Box, ui_box: Box) -> float:
    """Intersection over the text box's own area."""
    return _intersection_area(text_box, ui_box) / text_box.area


# ---------------------------------------------------------------------------
# Filtering


def retain_text_boxes(
    texts: list[TextDetection], uis: list[UiDetection], threshold: float = 0.5
) -> list[TextDetection]:
    """Drop text boxes that sit on a UI element's signature.

    A text box is retained iff no UI box yields IoE strictly above the
    threshold; order is preserved.
    """
    retained = []
    for text in texts:
        if any(ioe(text.box, ui.box) > threshold for ui in uis):
            continue
        retained.append(text)
    return retained


def resolve_ui_overlaps(
    uis: list[UiDetection],
    priorities: dict[UiClass, int] | None = None,
    threshold: float = 0.5,
) -> list[UiDetection]:
    """Suppress the lower-priority detection of any pair with IoU > threshold.

    Ties break to the higher score, then the earlier index. Linkers
    legitimately overlap their targets, so a Linker never suppresses nor is
    suppressed by a non-Linker.
    """
    if priorities is None:
        priorities = DEFAULT_PRIORITIES
    missing = {d.cls for d in uis} - set(priorities)
    if missing:
        raise ValueError(f"priorities missing classes: {sorted(c.value for c in missing)}")

    order = sorted(range(len(uis)), key=lambda i: (priorities[uis[i].cls], -uis[i].score, i))
    kept: list[int] = []
    for i in order:
        det = uis[i]
        suppressed = False
        for j in kept:
            other = uis[j]
            if (det.cls is UiClass.LINKER) != (other.cls is UiClass.LINKER):
                continue
            if iou(det.box, other.box) > threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(i)
    return [uis[i] for i in sorted(kept)]
