"""Versioned JSON checkpoints for fitted pipelines.

A checkpoint is a single JSON document:

    {
      "format": "scorecast-checkpoint",
      "version": 1,
      "pipeline": "vae+et",
      "view": "D1",
      "feature_names": ["t1", "t2", "cw"],
      "seed": 7,
      "state": { ... pipeline family specific ... }
    }

Weight matrices are stored as nested row-major lists of float64 values;
json round-trips them exactly.  Keys are sorted on write so identical
models produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import CheckpointError
from .pipelines import pipeline_from_state

FORMAT_NAME = "scorecast-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(pipeline, path: str | Path, seed: int = 0) -> None:
    document = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "pipeline": pipeline.name,
        "view": pipeline.view_name,
        "feature_names": list(pipeline.feature_names),
        "seed": seed,
        "state": pipeline.to_state(),
    }
    text = json.dumps(document, sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path):
    """Read a checkpoint back into a fitted pipeline."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint is not valid json: {exc}") from None
    if not isinstance(document, dict) or document.get("format") != FORMAT_NAME:
        raise CheckpointError(f"{path} is not a {FORMAT_NAME} file")
    if document.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {document.get('version')!r}; "
            f"this build reads version {FORMAT_VERSION}")
    try:
        return pipeline_from_state(
            document["pipeline"], document["view"],
            tuple(document["feature_names"]), document["state"])
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"checkpoint is structurally invalid: {exc!r}") from None
