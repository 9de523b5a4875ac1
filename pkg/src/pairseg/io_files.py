"""JSON file formats (sessions, maps, pair lists) with schema validation.

All structured data is JSON with explicit schema versions; floats are
serialized with full round-trip precision so save/load is lossless.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .data import Block, PairSet, ResponseDataset, validate_dataset
from .errors import DataError
from .grid import GridSpec
from .maps import ProbMaps

SCHEMA_VERSION = 1

DEFAULT_TIMING = {"preview_ms": 3000.0, "cue_ms": 300.0, "stim_ms": 300.0}


def _load_schema(name: str) -> dict:
    with resources.files("pairseg.schemas").joinpath(name).open("r") as fh:
        return json.load(fh)


def _parse_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(
            f"{path}: JSON parse error at offset {exc.pos} (line {exc.lineno}): {exc.msg}"
        ) from exc


def _validate(doc: dict, schema_name: str, path) -> None:
    schema = _load_schema(schema_name)
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        loc = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise DataError(f"{path}: schema violation at {loc}: {err.message}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise DataError(
            f"{path}: unsupported schema_version {doc.get('schema_version')!r}; "
            f"this build reads version {SCHEMA_VERSION}"
        )


def _dump(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


@dataclass(frozen=True)
class SessionFile:
    """A participant session: the dataset plus protocol metadata."""

    dataset: ResponseDataset
    participant_id: str = "anonymous"
    timing: dict = field(default_factory=lambda: dict(DEFAULT_TIMING))
    contour: np.ndarray | None = None  # (m, 2) pixel coordinates
    rt_ms: tuple | None = None  # per block, aligned with trials
    incomplete: bool = False


def _coord_to_flat(coord, n: int) -> int:
    col, row = int(coord[0]), int(coord[1])
    return row * n + col


def _flat_to_coord(flat: int, n: int) -> list[int]:
    return [int(flat % n), int(flat // n)]


def load_session(path) -> SessionFile:
    """Read and validate a session file; raises DataError on any problem."""
    doc = _parse_json(path)
    _validate(doc, "session.schema.json", path)
    grid = GridSpec(n=doc["grid"]["n"], image_px=doc["grid"]["image_px"])
    blocks = []
    rts = []
    for blk in doc["blocks"]:
        pairs = [
            [_coord_to_flat(t["i"], grid.n), _coord_to_flat(t["j"], grid.n)]
            for t in blk["trials"]
        ]
        responses = [t["response"] for t in blk["trials"]]
        rts.append(tuple(t.get("rt_ms") for t in blk["trials"]))
        ps = PairSet.unchecked(np.array(pairs, dtype=np.int64).reshape(-1, 2))
        blocks.append(Block.unchecked(ps, np.array(responses, dtype=np.int64)))
    dataset = ResponseDataset(
        blocks=tuple(blocks),
        grid=grid,
        image_id=doc["image_id"],
        k_instructed=doc.get("k_instructed"),
    )
    violations = validate_dataset(dataset)
    if violations:
        listing = "; ".join(str(v) for v in violations[:5])
        raise DataError(f"{path}: dataset violations after ingestion: {listing}")
    contour = doc.get("contour")
    return SessionFile(
        dataset=dataset,
        participant_id=doc["participant_id"],
        timing=dict(doc["timing"]),
        contour=None if contour is None else np.asarray(contour, dtype=np.float64),
        rt_ms=tuple(rts),
        incomplete=bool(doc.get("incomplete", False)),
    )


def save_session(session: SessionFile, path) -> None:
    d = session.dataset
    blocks = []
    for b_idx, blk in enumerate(d.blocks):
        trials = []
        for t_idx, ((i, j), r) in enumerate(zip(blk.pair_set.pairs, blk.responses)):
            trial = {
                "i": _flat_to_coord(int(i), d.grid.n),
                "j": _flat_to_coord(int(j), d.grid.n),
                "response": int(r),
                "rt_ms": None
                if session.rt_ms is None
                else session.rt_ms[b_idx][t_idx],
            }
            trials.append(trial)
        blocks.append({"block_index": b_idx, "trials": trials})
    doc = {
        "schema_version": SCHEMA_VERSION,
        "image_id": d.image_id,
        "grid": {"n": d.grid.n, "image_px": d.grid.image_px},
        "k_instructed": d.k_instructed,
        "timing": session.timing,
        "blocks": blocks,
        "contour": None if session.contour is None else session.contour.tolist(),
        "participant_id": session.participant_id,
        "incomplete": session.incomplete,
    }
    _validate(doc, "session.schema.json", path)
    _dump(doc, path)


def load_maps(path) -> tuple[ProbMaps, GridSpec, dict]:
    """Read a maps file; returns (maps, grid, provenance)."""
    doc = _parse_json(path)
    _validate(doc, "maps.schema.json", path)
    values = np.asarray(doc["values"], dtype=np.float64)
    if values.ndim != 3 or values.shape[0] != doc["k"]:
        raise DataError(f"{path}: values shape {values.shape} does not match k={doc['k']}")
    grid = GridSpec(n=doc["grid"]["n"], image_px=doc["grid"]["image_px"])
    if values.shape[1] != grid.n or values.shape[2] != grid.n:
        raise DataError(f"{path}: values shape {values.shape} does not match grid n={grid.n}")
    return ProbMaps(values), grid, doc.get("provenance", {})


def save_maps(maps: ProbMaps, grid: GridSpec, path, provenance: dict | None = None) -> None:
    if grid.n != maps.n:
        raise DataError(f"grid n={grid.n} does not match maps n={maps.n}")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "grid": {"n": grid.n, "image_px": grid.image_px},
        "k": maps.k,
        "values": maps.values.tolist(),
        "provenance": provenance or {},
    }
    _validate(doc, "maps.schema.json", path)
    _dump(doc, path)


def load_pairs(path) -> tuple[PairSet, GridSpec, dict]:
    doc = _parse_json(path)
    _validate(doc, "pairs.schema.json", path)
    grid = GridSpec(n=doc["grid"]["n"], image_px=doc["grid"]["image_px"])
    flat = [
        [_coord_to_flat(a, grid.n), _coord_to_flat(b, grid.n)]
        for a, b in doc["pairs"]
    ]
    return PairSet(np.array(flat, dtype=np.int64)), grid, doc


def save_pairs(
    pairs: PairSet, grid: GridSpec, k: int, coverage: str, seed: int, path
) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "grid": {"n": grid.n, "image_px": grid.image_px},
        "k": int(k),
        "coverage": coverage,
        "seed": int(seed),
        "pairs": [
            [_flat_to_coord(int(i), grid.n), _flat_to_coord(int(j), grid.n)]
            for i, j in pairs.pairs
        ],
    }
    _validate(doc, "pairs.schema.json", path)
    _dump(doc, path)
