"""On-disk formats: binary score maps and JSON annotation/detection files.

Score map (``.csm``): the 4 bytes ``CSM1``, width and height as little-endian
uint32, then ``width * height`` little-endian float32 values, row-major with
the origin at the top-left.

Annotation file (``.json``), one per image::

    {"image": "img_1", "width": 640, "height": 480,
     "words": [{"quad": [x1, y1, ..., x4, y4], "transcription": "abc",
                "dont_care": false, "chars": [[x1, y1, ..., y4], ...]},
               {"points": [x1, y1, ..., x2k, y2k], "transcription": null,
                "dont_care": false}]}

Quads list 8 numbers clockwise from the top-left; polygon ``points`` list an
even count of at least 8 numbers (top edge, then bottom edge reversed).
``chars`` is optional and only needed for ground-truth generation.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FormatError
from .geometry import as_points

MAGIC = b"CSM1"
_HEADER = struct.Struct("<4sII")


def write_score_map(path, values):
    arr = np.asarray(values)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"score maps are non-empty 2-D arrays, got shape {arr.shape}")
    h, w = arr.shape
    data = _HEADER.pack(MAGIC, w, h) + np.ascontiguousarray(arr, dtype="<f4").tobytes()
    Path(path).write_bytes(data)


def read_score_map(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError("file too short for a score map header", str(path))
    magic, w, h = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", str(path))
    if w < 1 or h < 1:
        raise FormatError(f"invalid dimensions {w}x{h}", str(path))
    if len(data) != _HEADER.size + 4 * w * h:
        raise FormatError(f"expected {_HEADER.size + 4 * w * h} bytes for {w}x{h}, got {len(data)}", str(path))
    arr = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(h, w)
    if not np.all((arr >= 0) & (arr <= 1)):
        raise FormatError("score values must lie in [0, 1]", str(path))
    return arr.astype(np.float32)


@dataclass
class Record:
    points: np.ndarray
    transcription: Optional[str] = None
    dont_care: bool = False
    chars: Optional[list] = None

    @property
    def is_quad(self):
        return len(self.points) == 4

    def to_json(self, ndigits=None):
        def flat(p):
            vals = np.asarray(p, dtype=np.float64).ravel().tolist()
            return [round(v, ndigits) for v in vals] if ndigits is not None else vals

        out = {"quad" if self.is_quad else "points": flat(self.points),
               "transcription": self.transcription,
               "dont_care": bool(self.dont_care)}
        if self.chars is not None:
            out["chars"] = [flat(c) for c in self.chars]
        return out


@dataclass
class ImageAnnotation:
    name: str
    width: Optional[int] = None
    height: Optional[int] = None
    records: list = field(default_factory=list)

    def to_json(self, ndigits=None):
        out = {"image": self.name}
        if self.width is not None:
            out["width"] = self.width
            out["height"] = self.height
        out["words"] = [r.to_json(ndigits) for r in self.records]
        return out


def _numbers(value, where, expect=None):
    if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise FormatError("expected a list of numbers", where)
    if expect == 8 and len(value) != 8:
        raise FormatError(f"a quad needs 8 coordinates, got {len(value)}", where)
    if expect == "poly" and (len(value) % 2 or len(value) < 8):
        raise FormatError(f"a polygon needs an even count >= 8 of coordinates, got {len(value)}", where)
    if not all(np.isfinite(value)):
        raise FormatError("coordinates must be finite", where)
    return as_points(value)


def parse_annotation(obj, source="<annotation>"):
    if not isinstance(obj, dict):
        raise FormatError("top level must be an object", source)
    name = obj.get("image", Path(source).stem)
    if not isinstance(name, str):
        raise FormatError("'image' must be a string", f"{source}:image")
    width, height = obj.get("width"), obj.get("height")
    for key, val in (("width", width), ("height", height)):
        if val is not None and (not isinstance(val, int) or isinstance(val, bool) or val < 1):
            raise FormatError(f"'{key}' must be a positive integer", f"{source}:{key}")
    words = obj.get("words", [])
    if not isinstance(words, list):
        raise FormatError("'words' must be a list", f"{source}:words")

    records = []
    for i, w in enumerate(words):
        where = f"{source}:words[{i}]"
        if not isinstance(w, dict):
            raise FormatError("record must be an object", where)
        unknown = set(w) - {"quad", "points", "transcription", "dont_care", "chars"}
        if unknown:
            raise FormatError(f"unknown keys {sorted(unknown)}", where)
        if ("quad" in w) == ("points" in w):
            raise FormatError("record needs exactly one of 'quad' or 'points'", where)
        if "quad" in w:
            pts = _numbers(w["quad"], f"{where}.quad", 8)
        else:
            pts = _numbers(w["points"], f"{where}.points", "poly")
        text = w.get("transcription")
        if text is not None and not isinstance(text, str):
            raise FormatError("'transcription' must be a string or null", f"{where}.transcription")
        dc = w.get("dont_care", False)
        if not isinstance(dc, bool):
            raise FormatError("'dont_care' must be a boolean", f"{where}.dont_care")
        chars = None
        if "chars" in w:
            if not isinstance(w["chars"], list):
                raise FormatError("'chars' must be a list of quads", f"{where}.chars")
            chars = [_numbers(c, f"{where}.chars[{k}]", 8) for k, c in enumerate(w["chars"])]
        records.append(Record(pts, text, dc, chars))
    return ImageAnnotation(name, width, height, records)


def read_annotation(path):
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}", str(path)) from exc
    except UnicodeDecodeError as exc:
        raise FormatError("file is not UTF-8 text", str(path)) from exc
    return parse_annotation(obj, path.name)


def dump_annotation(ann, ndigits=None):
    return json.dumps(ann.to_json(ndigits), indent=1, sort_keys=False) + "\n"


def write_annotation(path, ann, ndigits=None):
    Path(path).write_text(dump_annotation(ann, ndigits))
