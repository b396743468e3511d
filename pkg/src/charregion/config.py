"""Pipeline configuration: a flat ``key = value`` text file.

Lines starting with ``#`` are comments. Command-line flags override file
values; the file named by ``$CHARREGION_CONFIG`` is read when no
``--config`` is given.
"""

import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import FormatError

ENV_VAR = "CHARREGION_CONFIG"


@dataclass(frozen=True)
class Config:
    template_side: int = 512
    sigma_ratio: float = 0.25
    link_width_ratio: float = 0.5
    tau_r: float = 0.4
    tau_a: float = 0.4
    min_component_px: int = 10
    box_expand_ratio: float = 0.25
    outer_extend_ratio: float = 0.5
    gap_ratio: float = 1.0
    marker_threshold: float = 0.6
    region_floor: float = 0.2
    crop_height: int = 64
    iou_threshold: float = 0.5
    mode: str = "quad"
    merge_lines: bool = False
    workers: int = 1

    def to_text(self):
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in asdict(self).items())

    def override(self, **values):
        return replace(self, **{k: v for k, v in values.items() if v is not None})


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _convert(kind, raw, where):
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        return kind(raw)
    except ValueError as exc:
        raise FormatError(f"cannot parse {raw!r} as {kind.__name__}", where) from exc


def parse_config(text, source="<config>"):
    types = {f.name: f.type for f in fields(Config)}
    types = {k: {"int": int, "float": float, "str": str, "bool": bool}.get(t, t) for k, t in types.items()}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise FormatError("expected 'key = value'", where)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise FormatError(f"unknown key {key!r}", where)
        values[key] = _convert(types[key], raw, where)
    return Config(**values)


def load_config(path=None):
    if path is None:
        path = os.environ.get(ENV_VAR)
    if not path:
        return Config()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read config: {exc.strerror}", str(path)) from exc
    return parse_config(text, str(path))
