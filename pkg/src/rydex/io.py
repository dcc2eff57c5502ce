"""Deterministic CSV/JSON writers and the run manifest."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["fmt", "RunManifest", "csv_text", "json_text", "to_jsonable"]


def fmt(x) -> str:
    """Shortest round-trip text for a float (ints and strings pass through)."""
    if isinstance(x, (str, bytes)):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def to_jsonable(obj):
    """Convert numpy scalars/arrays and complex numbers to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class RunManifest:
    command: str
    config_path: str
    parameters: dict
    seed: int | None
    arguments: dict
    tool_version: str
    outputs: list = field(default_factory=list)
    duration_s: float = 0.0

    @property
    def digest(self) -> str:
        """SHA-256 over everything that determines the outputs (not paths or timing)."""
        core = {"command": self.command, "parameters": self.parameters, "seed": self.seed,
                "arguments": self.arguments, "tool_version": self.tool_version}
        text = json.dumps(to_jsonable(core), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def write(self, directory: Path) -> Path:
        path = Path(directory) / "manifest.json"
        body = asdict(self)
        body["sha256"] = self.digest
        path.write_text(json.dumps(to_jsonable(body), indent=2, sort_keys=True) + "\n")
        return path


def csv_text(header, rows, digest: str | None = None) -> str:
    """CSV with an optional leading ``# manifest_sha256=...`` comment line."""
    lines = []
    if digest:
        lines.append(f"# manifest_sha256={digest}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def json_text(obj, digest: str | None = None) -> str:
    body = dict(obj)
    if digest:
        body["manifest_sha256"] = digest
    return json.dumps(to_jsonable(body), indent=2, sort_keys=True) + "\n"
