"""Run manifests: the resolved configuration, seeds, and input hashes of one
command invocation, written as manifest.json next to every artifact.

Feeding a manifest back through --config re-runs the command with the same
resolved configuration; in single-threaded mode that reproduces the data
artifacts byte for byte (the manifest itself carries fresh timestamps).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

MANIFEST_NAME = "manifest.json"


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to re-run one command and audit what it read."""

    command: str
    argv: list[str]
    config: dict
    seeds: dict[str, int]
    input_hashes: dict[str, str] = field(default_factory=dict)
    tool_version: str = ""
    created_at: str = ""
    wall_time_s: float | None = None

    def __post_init__(self):
        if not self.created_at:
            self.created_at = datetime.now(timezone.utc).isoformat()
        if not self.tool_version:
            from . import __version__

            self.tool_version = __version__

    def add_input(self, path) -> None:
        path = Path(path)
        self.input_hashes[str(path)] = sha256_file(path)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "argv": list(self.argv),
            "config": self.config,
            "seeds": dict(self.seeds),
            "input_hashes": dict(self.input_hashes),
            "tool_version": self.tool_version,
            "created_at": self.created_at,
            "wall_time_s": self.wall_time_s,
        }

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        return path

    @classmethod
    def from_file(cls, path) -> "RunManifest":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            command=payload["command"],
            argv=list(payload.get("argv", [])),
            config=payload["config"],
            seeds={k: int(v) for k, v in payload.get("seeds", {}).items()},
            input_hashes=dict(payload.get("input_hashes", {})),
            tool_version=payload.get("tool_version", ""),
            created_at=payload.get("created_at", ""),
            wall_time_s=payload.get("wall_time_s"),
        )
