"""Run manifests: indented YAML records with a schema and a content hash of the inputs."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

import jsonschema
import numpy as np
import yaml

from . import __version__
from .grid import _atomic_write_bytes

SCHEMA_ID = "fkl-manifest/1"

SCHEMA = {
    "type": "object",
    "required": ["schema", "command", "code_version", "input_hash", "params", "grid",
                 "solver", "outputs", "results", "wall_clock_seconds"],
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "command": {"enum": ["ground-state", "scale", "spectrum", "semiclassical", "sweep"]},
        "code_version": {"type": "string"},
        "input_hash": {"type": "string", "pattern": "^[0-9a-f]{40}$"},
        "params": {"type": "object"},
        "grid": {
            "type": "object",
            "required": ["dim", "half_width", "points_per_axis"],
            "properties": {
                "dim": {"enum": [1, 2]},
                "half_width": {"type": "number", "exclusiveMinimum": 0},
                "points_per_axis": {"type": "integer", "minimum": 16},
            },
        },
        "solver": {"type": "object"},
        "outputs": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
        "results": {"type": "object"},
        "wall_clock_seconds": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}


def plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into YAML-safe builtins."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def content_hash(payload: Any) -> str:
    """Git-style blob hash of the canonical JSON encoding of payload."""
    body = json.dumps(plain(payload), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


@dataclass
class RunManifest:
    command: str
    params: dict
    grid: dict
    solver: dict
    outputs: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0
    input_hash: str = ""
    code_version: str = __version__

    def __post_init__(self):
        if not self.input_hash:
            self.input_hash = content_hash(
                {"command": self.command, "params": self.params, "grid": self.grid,
                 "solver": self.solver, "code_version": self.code_version})

    def to_dict(self) -> dict:
        return plain({
            "schema": SCHEMA_ID,
            "command": self.command,
            "code_version": self.code_version,
            "input_hash": self.input_hash,
            "params": self.params,
            "grid": self.grid,
            "solver": self.solver,
            "outputs": list(self.outputs),
            "results": self.results,
            "wall_clock_seconds": self.wall_clock_seconds,
        })

    def dumps(self) -> str:
        d = self.to_dict()
        validate(d)
        return yaml.safe_dump(d, sort_keys=False, default_flow_style=False)

    def write(self, path) -> None:
        _atomic_write_bytes(path, self.dumps().encode())

    @classmethod
    def loads(cls, text: str) -> "RunManifest":
        d = yaml.safe_load(text)
        validate(d)
        return cls(command=d["command"], params=d["params"], grid=d["grid"], solver=d["solver"],
                   outputs=d["outputs"], results=d["results"],
                   wall_clock_seconds=d["wall_clock_seconds"], input_hash=d["input_hash"],
                   code_version=d["code_version"])

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path) as fh:
            return cls.loads(fh.read())


def validate(d: dict) -> None:
    jsonschema.validate(d, SCHEMA)
