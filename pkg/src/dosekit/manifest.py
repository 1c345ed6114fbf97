"""Run manifests: enough provenance to replay any artifact-producing command.

The manifest records the command, argv, config snapshot, and seeds; the
data outputs themselves contain no timestamps or timing, so re-running the
recorded argv reproduces them bit-exactly on the same platform.  Wall-clock
information lives only here.
"""

from __future__ import annotations

import json
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__


def build_manifest(command: str, argv: list[str], config: dict,
                   seeds: dict | None = None, timing: dict | None = None,
                   started: str | None = None) -> dict:
    return {
        "tool": "dosekit",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "config": config,
        "seeds": seeds or {},
        "platform": {
            "platform": platform.platform(),
            "python": sys.version.split()[0],
            "numpy": np.__version__,
        },
        "started": started or _now(),
        "finished": _now(),
        "timing": timing or {},
    }


def write_manifest(path, manifest: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def manifest_path_for(output_path) -> Path:
    """Sibling manifest path for a file output."""
    p = Path(output_path)
    return p.with_name(p.name + ".manifest.json")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()
