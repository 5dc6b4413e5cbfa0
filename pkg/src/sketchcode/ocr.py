"""Pluggable text recognition: a scripted fixture recognizer for tests and an
adapter that shells out to an external OCR tool (e.g. tesseract)."""
from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .raster import GrayImage, save_pgm


class OcrBackendError(RuntimeError):
    """External OCR tool missing, failing, or timing out."""


class FixtureUnderrun(RuntimeError):
    """A scripted fixture ran out of entries (or lacked a key)."""


@dataclass(frozen=True)
class OcrResult:
    text: str
    confidence: float | None = None  # None = unknown

    def __post_init__(self):
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence outside [0,1]: {self.confidence}")


class Recognizer(Protocol):
    def recognize(self, region: GrayImage) -> OcrResult: ...


class FixtureRecognizer:
    """Deterministic recognizer scripted from a list or an id-keyed map.

    List fixtures return entries in order; map fixtures look up
    "<image_id>:<index>" where index counts this recognizer's queries.
    Single-cursor: do not share one instance across concurrent consumers.
    """

    def __init__(self, entries: list[str] | dict[str, str], image_id: str = ""):
        self.entries = entries
        self.image_id = image_id
        self.cursor = 0

    def recognize(self, region: GrayImage) -> OcrResult:
        index = self.cursor
        self.cursor += 1
        if isinstance(self.entries, dict):
            key = f"{self.image_id}:{index}"
            if key not in self.entries:
                raise FixtureUnderrun(f"fixture underrun: no entry for {key!r}")
            return OcrResult(text=self.entries[key])
        if index >= len(self.entries):
            raise FixtureUnderrun(
                f"fixture underrun: query {index} of a {len(self.entries)}-entry fixture"
            )
        return OcrResult(text=self.entries[index])


def load_fixture(path: str | Path, image_id: str = "") -> FixtureRecognizer:
    """Load a fixture file: a JSON array of strings or an object keyed
    "image_id:index"."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, list) and all(isinstance(v, str) for v in doc):
        return FixtureRecognizer(doc, image_id=image_id)
    if isinstance(doc, dict) and all(isinstance(v, str) for v in doc.values()):
        return FixtureRecognizer(doc, image_id=image_id)
    raise ValueError(f"{path}: fixture must be a JSON array of strings or a string-valued object")


class ExternalOcr:
    """Adapter invoking an external OCR command on a temporary PGM file.

    The command template must contain an {input} placeholder; the trimmed
    standard output is the recognized text. Invocations are independent and
    may run concurrently.
    """

    def __init__(self, command: str, timeout_ms: int = 10000):
        if "{input}" not in command:
            raise ValueError("ocr.command must contain an {input} placeholder")
        self.command = command
        self.timeout_ms = timeout_ms

    def recognize(self, region: GrayImage) -> OcrResult:
        tmp = tempfile.NamedTemporaryFile(suffix=".pgm", delete=False)
        tmp_path = Path(tmp.name)
        tmp.close()
        try:
            save_pgm(region, tmp_path)
            argv = [arg.replace("{input}", str(tmp_path)) for arg in shlex.split(self.command)]
            try:
                proc = subprocess.run(
                    argv,
                    capture_output=True,
                    text=True,
                    timeout=self.timeout_ms / 1000.0,
                )
            except FileNotFoundError as exc:
                raise OcrBackendError(f"ocr backend failure: {argv[0]} not found") from exc
            except subprocess.TimeoutExpired as exc:
                raise OcrBackendError(
                    f"ocr backend failure: timeout after {self.timeout_ms} ms"
                ) from exc
            if proc.returncode != 0:
                raise OcrBackendError(
                    f"ocr backend failure: exit {proc.returncode}: {proc.stderr.strip()}"
                )
            return OcrResult(text=proc.stdout.strip())
        finally:
            tmp_path.unlink(missing_ok=True)
