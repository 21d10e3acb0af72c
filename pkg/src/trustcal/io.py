"""File formats.

Simulated sets and reports are CSV files with a header row. Calibrator
bundles are a single binary file:

    magic  b"TRUSTCAL"   8 bytes
    version              uint32, little endian
    header length        uint64, little endian
    header               UTF-8 JSON (sorted keys): metadata plus an array
                         table of (name, dtype, shape, offset, nbytes)
    payload              raw little-endian array data, in table order

Everything is written in a fixed byte order, so bundles are portable and a
save-load-save cycle reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .forest import Forest, ForestParams
from .tree import RegressionTree

__all__ = [
    "BUNDLE_MAGIC",
    "BUNDLE_VERSION",
    "BundleFormatError",
    "write_simulated_set",
    "read_simulated_set",
    "write_bundle",
    "read_bundle",
    "calibrator_to_bundle",
    "bundle_to_partitioner",
    "write_report_csv",
    "read_observed",
]

BUNDLE_MAGIC = b"TRUSTCAL"
BUNDLE_VERSION = 1
_DTYPES = {"f8": "<f8", "i8": "<i8"}


class BundleFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# simulated sets


def write_simulated_set(path, theta, x, tau, param_names) -> None:
    """One row per record: parameter columns, flattened data columns
    ``x{i}_{j}`` (observation i, component j), then ``tau``."""
    theta = np.atleast_2d(theta)
    x = np.asarray(x, dtype=float)
    B, n, p = x.shape
    header = list(param_names) + [f"x{i}_{j}" for i in range(n) for j in range(p)] + ["tau"]
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for b in range(B):
                w.writerow([repr(float(v)) for v in theta[b]] + [repr(float(v)) for v in x[b].ravel()] + [repr(float(tau[b]))])
    except OSError as exc:
        raise OSError(f"cannot write simulated set to {path}: {exc}") from exc


def read_simulated_set(path, param_names):
    """Inverse of :func:`write_simulated_set`; returns ``(theta, x, tau)``."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read simulated set {path}: {exc}") from exc
    header, body = rows[0], rows[1:]
    d = len(param_names)
    if list(header[:d]) != list(param_names) or header[-1] != "tau":
        raise ValueError(f"{path}: header does not match parameters {list(param_names)}")
    xcols = header[d:-1]
    n = 1 + max(int(c[1:].split("_")[0]) for c in xcols)
    p = 1 + max(int(c.split("_")[1]) for c in xcols)
    data = np.array(body, dtype=float)
    return data[:, :d], data[:, d:-1].reshape(len(data), n, p), data[:, -1]


def read_observed(path) -> np.ndarray:
    """Observed dataset: CSV with one observation per row (header optional)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    x = np.array(rows, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return x


def write_report_csv(path, columns: dict) -> None:
    names = list(columns)
    cols = [np.asarray(columns[k]) for k in names]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(len(cols[0])):
            w.writerow([_fmt(c[i]) for c in cols])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# ---------------------------------------------------------------------------
# bundles


def write_bundle(path, meta: dict, arrays: dict) -> None:
    table, blobs, offset = [], [], 0
    for name in sorted(arrays):
        a = np.asarray(arrays[name])
        kind = "f8" if a.dtype.kind == "f" else "i8"
        data = np.ascontiguousarray(a, dtype=_DTYPES[kind]).tobytes()
        table.append({"name": name, "dtype": kind, "shape": list(a.shape), "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = json.dumps({"meta": meta, "arrays": table}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(BUNDLE_MAGIC)
        fh.write(struct.pack("<IQ", BUNDLE_VERSION, len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)


def read_bundle(path):
    raw = Path(path).read_bytes()
    if raw[:8] != BUNDLE_MAGIC:
        raise BundleFormatError(f"{path}: not a calibrator bundle")
    version, hlen = struct.unpack("<IQ", raw[8:20])
    if version != BUNDLE_VERSION:
        raise BundleFormatError(f"{path}: bundle version {version} is not supported (expected {BUNDLE_VERSION})")
    header = json.loads(raw[20:20 + hlen].decode("utf-8"))
    base = 20 + hlen
    arrays = {}
    for entry in header["arrays"]:
        start = base + entry["offset"]
        buf = raw[start:start + entry["nbytes"]]
        arrays[entry["name"]] = np.frombuffer(buf, dtype=_DTYPES[entry["dtype"]]).reshape(entry["shape"]).copy()
    return header["meta"], arrays


def calibrator_to_bundle(partitioner, theta, tau):
    """Arrays for a tree or forest plus its calibration records."""
    trees = partitioner.trees if isinstance(partitioner, Forest) else [partitioner]
    arrays = {"calib_theta": np.asarray(theta, dtype=float), "calib_tau": np.asarray(tau, dtype=float)}
    for k, t in enumerate(trees):
        for key, val in t.to_arrays().items():
            arrays[f"tree{k:04d}_{key}"] = val
    return arrays


def bundle_to_partitioner(meta: dict, arrays: dict):
    """Rebuild the tree (TRUST) or forest (TRUST++) from bundle arrays."""
    n_trees = int(meta["n_trees"])
    trees = []
    for k in range(n_trees):
        prefix = f"tree{k:04d}_"
        trees.append(RegressionTree.from_arrays({key[len(prefix):]: v for key, v in arrays.items() if key.startswith(prefix)}))
    theta, tau = arrays["calib_theta"], arrays["calib_tau"]
    if meta["method"] == "trust":
        return trees[0], theta, tau
    params = ForestParams(n_trees=n_trees, M=meta.get("M"), min_samples_split=int(meta.get("min_samples_split", 100)))
    return Forest(trees, theta, tau, params), theta, tau
