"""Codebook files: JSON with a meta block and one block per beam.

Complex numbers are stored as ``[re, im]`` pairs, matrices row-major.  Floats
are written with Python's shortest round-trip repr, so reading a file back
reproduces every array bit for bit.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict

import numpy as np

from . import __version__
from .array import Beamformer, UpaConfig
from .codebook import Codebook
from .ideal import CodebookConfig

FORMAT = "upa-codebook"
FORMAT_VERSION = 1
# run-dependent stats kept out of the file so rebuilds are byte-identical
VOLATILE_STATS = ("wall_time_s",)


class CodebookFileError(ValueError):
    """The file is unreadable, truncated, or not a codebook file."""


def _pairs(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    return [_pairs(row) for row in a]


def _complex(x, shape: tuple[int, ...], what: str) -> np.ndarray:
    try:
        arr = np.asarray(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise CodebookFileError(f"{what}: not numeric") from exc
    if arr.shape != shape + (2,):
        raise CodebookFileError(f"{what}: shape {arr.shape[:-1]} != {shape}")
    if not np.all(np.isfinite(arr)):
        raise CodebookFileError(f"{what}: non-finite value")
    return arr[..., 0] + 1j * arr[..., 1]


def codebook_to_dict(cb: Codebook) -> dict:
    meta = {
        "toolkit_version": __version__,
        "upa": asdict(cb.upa),
        "config": asdict(cb.config),
        "kind": cb.kind,
        "quantize": cb.quantize,
        "requantize_shift": cb.requantize_shift,
        "seed": cb.seed,
        "sweep": cb.sweep,
        "selected": None if cb.selected is None else [list(g) for g in cb.selected],
        "stats": {k: v for k, v in cb.stats.items() if k not in VOLATILE_STATS},
    }
    entries = []
    for q, row in enumerate(cb.entries, start=1):
        for p, bf in enumerate(row, start=1):
            entries.append({
                "q": q, "p": p,
                "quantized": bf.quantized,
                "regularized": bf.regularized,
                "analog": _pairs(bf.analog),
                "baseband": _pairs(bf.baseband),
                "composite": _pairs(bf.composite),
            })
    return {"format": FORMAT, "version": FORMAT_VERSION, "meta": meta, "entries": entries}


def codebook_from_dict(doc: dict) -> Codebook:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise CodebookFileError("not a codebook file")
    if doc.get("version") != FORMAT_VERSION:
        raise CodebookFileError(f"unsupported format version {doc.get('version')!r}")
    try:
        meta = doc["meta"]
        upa = UpaConfig(**meta["upa"])
        cfg = CodebookConfig(**meta["config"])
        raw = doc["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CodebookFileError(f"bad meta block: {exc}") from exc
    if len(raw) != cfg.q:
        raise CodebookFileError(f"expected {cfg.q} entries, found {len(raw)}")
    grid: list[list[Beamformer | None]] = [[None] * cfg.q_v for _ in range(cfg.q_h)]
    for e in raw:
        try:
            q, p = int(e["q"]), int(e["p"])
            n = len(e["baseband"])
            F = _complex(e["analog"], (upa.m, n), f"entry ({q},{p}) analog")
            v = _complex(e["baseband"], (n,), f"entry ({q},{p}) baseband")
            c = _complex(e["composite"], (upa.m,), f"entry ({q},{p}) composite")
            bf = Beamformer(F, v, bool(e["quantized"]), bool(e["regularized"]))
        except (KeyError, TypeError) as exc:
            raise CodebookFileError(f"bad entry: {exc}") from exc
        if not (1 <= q <= cfg.q_h and 1 <= p <= cfg.q_v) or grid[q - 1][p - 1] is not None:
            raise CodebookFileError(f"entry ({q},{p}) out of range or duplicated")
        if np.max(np.abs(bf.composite - c)) > 1e-12:
            raise CodebookFileError(f"entry ({q},{p}): composite does not match analog x baseband")
        grid[q - 1][p - 1] = bf
    selected = meta.get("selected")
    return Codebook(
        upa, cfg, str(meta.get("kind", "proposed")),
        tuple(tuple(row) for row in grid),
        None if selected is None else tuple(tuple(int(x) for x in g) for g in selected),
        bool(meta.get("quantize", True)), bool(meta.get("requantize_shift", False)),
        int(meta.get("seed", 0)), str(meta.get("sweep", "full")), dict(meta.get("stats", {})),
    )


def write_codebook(cb: Codebook, path: str | os.PathLike) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(codebook_to_dict(cb), fh, indent=1, allow_nan=False)
        fh.write("\n")
    os.replace(tmp, path)


def read_codebook(path: str | os.PathLike) -> Codebook:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CodebookFileError(f"{path}: {exc}") from exc
    try:
        return codebook_from_dict(doc)
    except CodebookFileError as exc:
        raise CodebookFileError(f"{path}: {exc}") from exc
