"""File emission: delimited run output, JSON variants and the run manifest.

Floating-point CSV cells carry 17 significant digits, enough to reproduce the
binary values exactly; byte-identical output is part of the determinism
contract, so all writers use explicit "\n" newlines and sorted JSON keys.
"""

from __future__ import annotations

import json
from pathlib import Path

MANIFEST_NAME = "manifest.json"


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return f"{value:.17g}"


def write_csv(path: Path, columns: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def write_json_table(path: Path, columns: list[str], rows) -> None:
    payload = {"columns": columns,
               "rows": [[_jsonable(v) for v in row] for row in rows]}
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _jsonable(value):
    if isinstance(value, (bool, int, str)):
        return value
    return float(value)


def write_table(out_dir: Path, stem: str, columns, rows, fmt: str) -> Path:
    if fmt == "json":
        path = out_dir / f"{stem}.json"
        write_json_table(path, columns, rows)
    else:
        path = out_dir / f"{stem}.csv"
        write_csv(path, columns, rows)
    return path


def write_manifest(out_dir: Path, subcommand: str, config_sections: dict,
                   seed: int, version: str, fmt: str = "csv",
                   figures: bool = True, extra: dict | None = None) -> Path:
    """Record everything needed to reproduce the output byte-for-byte.

    Written before any run output so a crashed run still leaves its recipe.
    """
    manifest = {
        "tool": "levcycle",
        "version": version,
        "subcommand": subcommand,
        "seed": seed,
        "format": fmt,
        "figures": figures,
        "config": config_sections,
    }
    if extra:
        manifest.update(extra)
    path = out_dir / MANIFEST_NAME
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def read_manifest(path: Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_sweep_sidecar(out_dir: Path, spec_dict: dict, version: str) -> Path:
    """JSON sidecar holding the fully resolved sweep specification."""
    path = out_dir / "spec.json"
    with open(path, "w") as fh:
        json.dump({"tool": "levcycle", "version": version, "spec": spec_dict},
                  fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path
