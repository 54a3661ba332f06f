###########################
# utils/file_utils.py
# Output plumbing: directories, JSON/CSV writers and the run manifest.
###########################

import json
import os
import platform
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from config import APP_VERSION, CSV_SCHEMA_VERSION, MANIFEST_NAME


# ------------------------------------------------------------
# Utility: make sure an output directory exists
# ------------------------------------------------------------
def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


# ------------------------------------------------------------
# Run manifest
# ------------------------------------------------------------
@dataclass
class RunManifest:
    """
    Provenance of one CLI run. Every file written by the run names the
    manifest, and the manifest lists every file.
    """

    subcommand: str
    config_path: Optional[str]
    seed: int
    parameters: Dict[str, Any] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    tool_version: str = APP_VERSION
    started: float = field(default_factory=time.time)
    wall_clock_s: float = 0.0

    def finish(self) -> None:
        self.wall_clock_s = round(time.time() - self.started, 3)

    def to_dict(self) -> Dict[str, Any]:
        return _jsonable(
            {
                "subcommand": self.subcommand,
                "config_path": self.config_path,
                "seed": self.seed,
                "tool_version": self.tool_version,
                "python": platform.python_version(),
                "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(self.started)),
                "wall_clock_s": self.wall_clock_s,
                "parameters": self.parameters,
                "outputs": self.outputs,
            }
        )


# ------------------------------------------------------------
# Writers
# ------------------------------------------------------------
def write_json(payload: Dict[str, Any], path: str, manifest: Optional[RunManifest] = None) -> str:
    """Write a JSON result; the manifest file name is always included."""
    ensure_dir(os.path.dirname(os.path.abspath(path)))
    body = dict(payload)
    body["manifest"] = MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(body), fh, indent=2)
    if manifest is not None:
        manifest.outputs.append(os.path.basename(path))
    return path


def write_csv(
    df: pd.DataFrame, path: str, schema: str, manifest: Optional[RunManifest] = None, units: Optional[str] = None
) -> str:
    """
    Write a DataFrame as CSV behind a comment line:
    # schema=<name>/v<version> manifest=<manifest file> [units=<column units>]
    """
    ensure_dir(os.path.dirname(os.path.abspath(path)))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        header = f"# schema={schema}/v{CSV_SCHEMA_VERSION} manifest={MANIFEST_NAME}"
        if units:
            header += f" units={units}"
        fh.write(header + "\n")
        df.to_csv(fh, index=False)
    if manifest is not None:
        manifest.outputs.append(os.path.basename(path))
    return path


def read_csv(path: str) -> pd.DataFrame:
    """Read a CSV written by write_csv."""
    return pd.read_csv(path, comment="#")


def write_manifest(manifest: RunManifest, out_dir: str) -> str:
    manifest.finish()
    path = os.path.join(ensure_dir(out_dir), MANIFEST_NAME)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2)
    return path
