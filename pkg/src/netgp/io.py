"""Graph files, dataset directories, key=value configs and seeded sub-streams."""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError


class DatasetError(ValueError):
    pass


def write_graph(g: Graph, path):
    """First line n, then n rows of n whitespace-separated reals (repr precision)."""
    with open(path, "w") as fh:
        fh.write(f"{g.n}\n")
        for row in g.weights:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_graph(path) -> Graph:
    path = Path(path)
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines()]
    if not lines:
        raise DatasetError(f"{path}: empty file")
    try:
        n = int(lines[0].strip())
    except ValueError:
        raise DatasetError(f"{path}:1: expected the node count, got {lines[0]!r}") from None
    rows = [ln for ln in lines[1:] if ln.strip()]
    if len(rows) != n:
        raise DatasetError(f"{path}: header says {n} rows, found {len(rows)}")
    w = np.empty((n, n))
    for i, ln in enumerate(rows):
        parts = ln.split()
        if len(parts) != n:
            raise DatasetError(f"{path}:{i + 2}: expected {n} values, got {len(parts)}")
        try:
            w[i] = [float(x) for x in parts]
        except ValueError as e:
            raise DatasetError(f"{path}:{i + 2}: {e}") from None
    try:
        return Graph(w)
    except GraphError as e:
        raise DatasetError(f"{path}: {e}") from None


def threshold_binarize(g: Graph, cutoff: float) -> Graph:
    """Binary graph with an edge wherever ``|weight| > cutoff``."""
    return Graph((np.abs(g.weights) > cutoff).astype(float))


@dataclass
class Dataset:
    graphs: list
    labels: np.ndarray | None = None
    times: np.ndarray | None = None
    groups: np.ndarray | None = None
    covariates: np.ndarray | None = None
    manifest: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.graphs)


def graph_name(k: int) -> str:
    return f"g{k:04d}.txt"


def save_dataset(ds: Dataset, path, extra_manifest: dict | None = None):
    root = Path(path)
    (root / "graphs").mkdir(parents=True, exist_ok=True)
    for k, g in enumerate(ds.graphs):
        write_graph(g, root / "graphs" / graph_name(k))
    if ds.labels is not None:
        with open(root / "labels.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "label"])
            for k, y in enumerate(ds.labels):
                w.writerow([k, int(y)])
    if ds.times is not None:
        cov = ds.covariates
        n_cov = 0 if cov is None else cov.shape[1]
        with open(root / "times.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["index", "time"] + (["group"] if ds.groups is not None else [])
            w.writerow(head + [f"x{j}" for j in range(n_cov)])
            for k, t in enumerate(ds.times):
                row = [k, repr(float(t))]
                if ds.groups is not None:
                    row.append(int(ds.groups[k]))
                if n_cov:
                    row += [repr(float(x)) for x in cov[k]]
                w.writerow(row)
    manifest = {"m": ds.m, "n": ds.graphs[0].n if ds.graphs else 0}
    manifest.update(ds.manifest)
    manifest.update(extra_manifest or {})
    with open(root / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    return rows[0], rows[1:]


def _load_labels(path, m):
    head, rows = _read_table(path)
    if head[:2] != ["index", "label"]:
        raise DatasetError(f"{path}:1: expected header 'index,label', got {','.join(head)!r}")
    if len(rows) != m:
        raise DatasetError(f"{path}: {len(rows)} label rows for {m} graphs")
    labels = np.empty(m, dtype=int)
    for k, row in enumerate(rows):
        line = k + 2
        try:
            idx, y = int(row[0]), int(float(row[1]))
        except (ValueError, IndexError):
            raise DatasetError(f"{path}:{line}: malformed row {row!r}") from None
        if idx != k:
            raise DatasetError(f"{path}:{line}: index {idx} out of order (expected {k})")
        if y not in (-1, 1):
            raise DatasetError(f"{path}:{line}: label {row[1]!r} is not -1 or +1")
        labels[k] = y
    return labels


def _load_times(path, m):
    head, rows = _read_table(path)
    if head[:2] != ["index", "time"]:
        raise DatasetError(f"{path}:1: expected header starting 'index,time'")
    has_group = len(head) > 2 and head[2] == "group"
    n_cov = len(head) - 2 - has_group
    if len(rows) != m:
        raise DatasetError(f"{path}: {len(rows)} time rows for {m} graphs")
    times = np.empty(m)
    groups = np.empty(m, dtype=int) if has_group else None
    cov = np.empty((m, n_cov)) if n_cov else None
    for k, row in enumerate(rows):
        line = k + 2
        if len(row) != len(head):
            raise DatasetError(f"{path}:{line}: expected {len(head)} fields, got {len(row)}")
        try:
            idx, t = int(row[0]), float(row[1])
            if has_group:
                groups[k] = int(row[2])
            if n_cov:
                cov[k] = [float(x) for x in row[2 + has_group:]]
        except ValueError:
            raise DatasetError(f"{path}:{line}: malformed row {row!r}") from None
        if idx != k:
            raise DatasetError(f"{path}:{line}: index {idx} out of order (expected {k})")
        if not t > 0 or not np.isfinite(t):
            raise DatasetError(f"{path}:{line}: survival time must be positive, got {row[1]!r}")
        times[k] = t
    return times, groups, cov


def load_dataset(path) -> Dataset:
    root = Path(path)
    mf = root / "manifest.json"
    if not mf.exists():
        raise DatasetError(f"{root}: no manifest.json")
    try:
        manifest = json.loads(mf.read_text())
    except json.JSONDecodeError as e:
        raise DatasetError(f"{mf}:{e.lineno}: {e.msg}") from None
    files = sorted((root / "graphs").glob("g*.txt"))
    if not files:
        raise DatasetError(f"{root}/graphs: no graph files")
    graphs = [read_graph(p) for p in files]
    for p, g in zip(files, graphs):
        if g.n != graphs[0].n:
            raise DatasetError(f"{p}: graph has {g.n} nodes, expected {graphs[0].n}")
    m = len(graphs)
    if "m" in manifest and manifest["m"] != m:
        raise DatasetError(f"{mf}: manifest lists m={manifest['m']} but found {m} graphs")
    ds = Dataset(graphs, manifest=manifest)
    if (root / "labels.csv").exists():
        ds.labels = _load_labels(root / "labels.csv", m)
    if (root / "times.csv").exists():
        ds.times, ds.groups, ds.covariates = _load_times(root / "times.csv", m)
    if ds.labels is None and ds.times is None:
        raise DatasetError(f"{root}: need labels.csv or times.csv")
    return ds


def _parse_value(text: str):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_config(text: str, source: str = "<config>") -> dict:
    """``key = value`` lines; ``#`` starts a comment. Values become bool/int/float/str."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"{source}:{lineno}: empty key")
        out[key.replace("-", "_")] = _parse_value(value)
    return out


def read_config(path) -> dict:
    return parse_config(Path(path).read_text(), str(path))


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named component, derived from one seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))
