"""Writing generated datasets to disk and reading manifests back."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Union

import numpy as np

from . import __version__
from .engine import GenerationResult
from .expr import to_string
from .params import ManualAnomaly, ManualSpec

SCHEMA_VERSION = "1.0"
SCHEMA_DIR = Path(__file__).parent / "schemas"
LABEL_CODES = {
    "0": "normal",
    "1": "anomalous (variable's own function is mutated)",
    "2": "a parent is anomalous, corrupted values not propagated",
    "3": "a parent is anomalous, corrupted values propagated",
}
FILES = {
    "train": "train.csv",
    "test": "test.csv",
    "labels_rich": "labels_rich.csv",
    "labels_binary": "labels_binary.csv",
    "metadata": "metadata.json",
}


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_csv(matrix: np.ndarray, t0: int, integer: bool = False) -> str:
    d = matrix.shape[1]
    lines = [",".join(["t"] + [f"x{j}" for j in range(d)])]
    fmt = "{:d}" if integer else "{:.17g}"
    for row_index, row in enumerate(matrix.tolist()):
        lines.append(f"{t0 + row_index}," + ",".join(fmt.format(v) for v in row))
    return "\n".join(lines) + "\n"


def read_csv(path: Union[str, Path]) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(t, values)`` from a file written by :func:`write_dataset`."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0].astype(np.int64), data[:, 1:]


def manifest(result: GenerationResult) -> dict:
    g = result.graph
    community = g.community_of()
    exo = set(g.exogenous)
    total = result.train_length + result.test_length
    return {
        "schema_version": SCHEMA_VERSION,
        "generator": {"name": "tsforge", "version": __version__},
        "mode": result.mode,
        "seed": result.seed,
        "params": result.params,
        "constants": {**result.constants, "label_codes": LABEL_CODES},
        "segments": {
            "train": {"start": 0, "end": result.train_length},
            "test": {"start": result.train_length, "end": total},
        },
        "noise_sigma": result.noise_sigma,
        "graph": {
            "d": g.d,
            "communities": [list(c) for c in g.communities],
            "nodes": [
                {"id": v, "community": community.get(v), "exogenous": v in exo} for v in range(g.d)
            ],
            "edges": [{"src": e.src, "dst": e.dst, "propagates": e.propagates} for e in g.edges],
        },
        "equations": [to_string(f) for f in result.equations],
        "anomalies": [
            {
                "var": a.var,
                "t_start": a.t_start,
                "t_end": a.t_end,
                "strategy": a.strategy,
                "mutated_equation": to_string(a.mutated),
            }
            for a in result.anomalies
        ],
        "files": dict(FILES),
    }


def write_dataset(result: GenerationResult, out_dir: Union[str, Path]) -> Path:
    """Write CSVs and ``metadata.json``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_test = result.train_length
    atomic_write(out / FILES["train"], format_csv(result.train, 0))
    atomic_write(out / FILES["test"], format_csv(result.test, t_test))
    atomic_write(out / FILES["labels_rich"], format_csv(result.labels_rich, t_test, integer=True))
    atomic_write(out / FILES["labels_binary"], format_csv(result.labels_binary, t_test, integer=True))
    path = out / FILES["metadata"]
    atomic_write(path, json.dumps(manifest(result), indent=2, sort_keys=True) + "\n")
    return path


def load_manifest(path: Union[str, Path]) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def manual_spec_from_manifest(meta: dict) -> ManualSpec:
    """Rebuild a manual spec that regenerates the recorded dataset exactly."""
    seg = meta["segments"]
    return ManualSpec(
        d=meta["graph"]["d"],
        equations=tuple(meta["equations"]),
        anomalies=tuple(
            ManualAnomaly(a["var"], a["t_start"], a["t_end"], a["mutated_equation"], a["strategy"])
            for a in meta["anomalies"]
        ),
        train_length=seg["train"]["end"],
        test_length=seg["test"]["end"] - seg["test"]["start"],
        propagation=tuple((e["src"], e["dst"], e["propagates"]) for e in meta["graph"]["edges"]),
        noise_sigma=meta["noise_sigma"],
        seed=meta["seed"],
    )


def describe_manifest(meta: dict) -> str:
    """Human-readable summary: graph, equations, anomaly table."""
    g = meta["graph"]
    seg = meta["segments"]
    lines = [
        f"mode: {meta['mode']}  seed: {meta['seed']}  d: {g['d']}",
        f"train: [{seg['train']['start']}, {seg['train']['end']})  "
        f"test: [{seg['test']['start']}, {seg['test']['end']})",
        "",
        "graph:",
    ]
    for ci, members in enumerate(g["communities"]):
        lines.append(f"  community {ci}: " + ", ".join(f"x{v}" for v in members))
    exo = [n["id"] for n in g["nodes"] if n["exogenous"]]
    lines.append("  exogenous: " + (", ".join(f"x{v}" for v in exo) or "-"))
    for e in g["edges"]:
        flag = "propagates" if e["propagates"] else "blocks"
        lines.append(f"  x{e['src']} -> x{e['dst']}  ({flag})")
    lines += ["", "equations:"]
    lines += [f"  x{j}[t] = {text}" for j, text in enumerate(meta["equations"])]
    lines += ["", "anomalies:"]
    if not meta["anomalies"]:
        lines.append("  none")
    else:
        lines.append(f"  {'var':>4} {'start':>8} {'end':>8}  {'strategy':<17} equation")
        for a in meta["anomalies"]:
            lines.append(
                f"  {'x' + str(a['var']):>4} {a['t_start']:>8} {a['t_end']:>8}  "
                f"{a['strategy']:<17} {a['mutated_equation']}"
            )
    return "\n".join(lines) + "\n"
