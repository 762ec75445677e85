"""Deterministic on-disk formats: CSV tables, JSON manifests, state dumps.

Floats are rendered with ``%.17g`` (shortest round-trip-exact for IEEE
doubles), newlines are always ``\\n``, and JSON keys are sorted so repeated
runs with identical inputs produce byte-identical files.
"""

import csv
import hashlib
import json

import numpy as np


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def write_json(path, payload):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


_STATE_MAGIC = b"kpzlat-state 1\n"


def write_state(path, u, time):
    """Ensemble state dump: ascii header + little-endian float64 payload.

    Each replica is stored as a row-major species-by-site (d x n) block so a
    consumer can stride straight through one species' lattice values.
    """
    u = np.asarray(u, dtype="<f8")
    if u.ndim != 3:
        raise ValueError("state must have shape (replicas, sites, species)")
    r, n, d = u.shape
    header = _STATE_MAGIC + (
        "replicas=%d n=%d d=%d time=%.17g\n" % (r, n, d, float(time))
    ).encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(u.transpose(0, 2, 1)).tobytes(order="C"))


def read_state(path):
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != _STATE_MAGIC:
            raise ValueError(f"{path}: not a state dump")
        meta = dict(item.split("=") for item in fh.readline().decode("ascii").split())
        r, n, d = int(meta["replicas"]), int(meta["n"]), int(meta["d"])
        time = float(meta["time"])
        payload = fh.read(8 * r * n * d)
    u = np.frombuffer(payload, dtype="<f8").reshape(r, d, n)
    return np.ascontiguousarray(u.transpose(0, 2, 1)), time
