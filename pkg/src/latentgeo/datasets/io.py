"""Dataset directories.

Layout::

    manifest.json       kind, generator metadata, per-object attributes and split
    images/oNNN_KKK.lgt one LGT1 tensor per image (image datasets)
    edges.csv           src,dst,t_birth (graph datasets)
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np

from ..ndkernel import load_tensor, save_tensor
from .citation import graph_sequence
from .core import SPLIT_NAMES, Dataset, ImageSequence

FORMAT = "latentgeo-dataset/1"


class DatasetFormatError(ValueError):
    pass


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _split_json(splits, object_id):
    if not splits:
        return None
    return {k: [int(i) for i in splits[object_id][k]] for k in SPLIT_NAMES}


def save_dataset(dataset: Dataset, path: str | os.PathLike) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {"format": FORMAT, "kind": dataset.kind, "meta": dataset.meta, "objects": []}
    if dataset.kind == "image":
        (root / "images").mkdir(exist_ok=True)
        for s in dataset.sequences:
            files = []
            for k, img in enumerate(s.samples):
                name = f"images/o{s.object_id:03d}_{k:03d}.lgt"
                save_tensor(root / name, img)
                files.append(name)
            manifest["objects"].append(
                {
                    "object_id": s.object_id,
                    "style_seed": s.style_seed,
                    "times": [float(t) for t in s.times],
                    "files": files,
                    "split": _split_json(dataset.splits, s.object_id),
                }
            )
    elif dataset.kind == "graph":
        (s,) = dataset.sequences
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["src", "dst", "t_birth"])
        w.writerows(s.edges.tolist())
        _write_text(root / "edges.csv", buf.getvalue())
        manifest["objects"].append(
            {
                "object_id": s.object_id,
                "n_nodes": s.n_nodes,
                "n_stamps": len(s.times),
                "birth": [int(b) for b in s.birth],
                "times": [float(t) for t in s.times],
                "split": _split_json(dataset.splits, s.object_id),
            }
        )
    else:
        raise ValueError(f"unknown dataset kind {dataset.kind!r}")
    _write_text(root / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return root


def load_dataset(path: str | os.PathLike) -> Dataset:
    root = Path(path)
    raw = (root / "manifest.json").read_text(encoding="utf-8")
    try:
        manifest = json.loads(raw)
    except json.JSONDecodeError as err:
        raise DatasetFormatError(f"manifest.json: {err.msg} (byte offset {err.pos})") from None
    if manifest.get("format") != FORMAT:
        raise DatasetFormatError(f"unsupported dataset format {manifest.get('format')!r}")
    kind = manifest["kind"]
    seqs, splits = [], {}
    for obj in manifest["objects"]:
        oid = int(obj["object_id"])
        if obj.get("split") is not None:
            splits[oid] = {k: np.asarray(obj["split"][k], dtype=np.int64) for k in SPLIT_NAMES}
        times = np.asarray(obj["times"], dtype=np.float64)
        if kind == "image":
            if len(obj["files"]) != len(times):
                raise DatasetFormatError(f"object {oid}: {len(obj['files'])} files for {len(times)} angles")
            images = np.stack([load_tensor(root / f) for f in obj["files"]])
            seqs.append(ImageSequence(oid, int(obj["style_seed"]), times, images))
        elif kind == "graph":
            edges = _read_edges(root / "edges.csv")
            birth = np.asarray(obj["birth"], dtype=np.int64)
            seq = graph_sequence(edges, birth, int(obj["n_nodes"]), int(obj["n_stamps"]))
            if not np.array_equal(seq.times, times):
                raise DatasetFormatError("edges.csv and manifest disagree on time stamps")
            seqs.append(seq)
        else:
            raise DatasetFormatError(f"unknown dataset kind {kind!r}")
    return Dataset(kind, seqs, splits, manifest.get("meta", {}))


def _read_edges(path: Path) -> np.ndarray:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["src", "dst", "t_birth"]:
        raise DatasetFormatError(f"{path.name}: expected header src,dst,t_birth")
    try:
        data = [[int(v) for v in r] for r in rows[1:]]
    except ValueError as err:
        raise DatasetFormatError(f"{path.name}: {err}") from None
    return np.asarray(data, dtype=np.int64).reshape(-1, 3)
