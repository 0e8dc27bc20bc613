"""Binary states, graymap snapshots and per-step CSV records."""

import csv
import re
import struct

import numpy as np

MAGIC = b"CHBSTATE"
CSV_COLUMNS = ("t", "tau", "order", "E", "E1", "r", "xi", "zeta", "sigma0", "delta",
               "e", "retries", "wall_ms")


def write_state(path, t, phi, u, p):
    """Little-endian layout: magic, n (u64), t (f64), then phi, u1, u2, p row-major."""
    phi = np.asarray(phi, dtype="<f8")
    n = phi.shape[0]
    if phi.shape != (n, n) or np.shape(u) != (2, n, n) or np.shape(p) != (n, n):
        raise ValueError("state fields must be n x n (u: 2 x n x n)")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Qd", n, float(t)))
        for a in (phi, u[0], u[1], p):
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_state(path):
    """Returns ``(t, phi, u, p)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a state file")
    off = len(MAGIC)
    n, t = struct.unpack_from("<Qd", data, off)
    off += 16
    size = n * n * 8
    if len(data) != off + 4 * size:
        raise ValueError(f"{path}: truncated or oversized state file")
    arr = np.frombuffer(data, dtype="<f8", offset=off).reshape(4, n, n).astype(float)
    return t, arr[0], arr[1:3].copy(), arr[3]


def snapshot_levels(phi):
    v = np.clip((np.asarray(phi, dtype=float) + 1.1) / 2.2, 0.0, 1.0)
    # round half up, so phi = 0 maps to 128
    return np.floor(255.0 * v + 0.5).astype(np.uint8)


def emit_snapshot(phi, path):
    """Binary PGM (P5), first image row is y = 0."""
    img = snapshot_levels(phi)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError(f"{path}: not a binary graymap")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data, dtype=np.uint8, count=w * h, offset=m.end()).reshape(h, w)


class CsvRecorder:
    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(CSV_COLUMNS)

    def write(self, rec):
        self._w.writerow([_fmt(rec[c]) for c in CSV_COLUMNS])

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_csv(path):
    """Columns as float arrays keyed by name."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in CSV_COLUMNS}
