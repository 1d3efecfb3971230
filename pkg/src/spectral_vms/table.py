"""Offline kernel tables over the (P, S) parameter grid.

The dimensionless mode-series kernels are precomputed on a uniform grid
P_i = delta*i, S_j = delta*j (i, j = 1..m), stored in a checksummed binary
file and interpolated online with the area-weighted bilinear rule.
Queries outside the grid clamp to the boundary cell, which extrapolates
linearly; a per-table counter records how often that happened.
"""

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import (FAMILIES, FAMILY_ORDER, TruncationPolicy,
                      sum_series_multi)

__all__ = ["TableGrid", "KernelTable", "TableFormatError",
           "UnsupportedVersionError", "generate_table", "save_table",
           "load_table", "interpolate"]

MAGIC = b"SVMK"
FORMAT_VERSION = 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


class TableFormatError(RuntimeError):
    """Corrupt or inconsistent table file."""


class UnsupportedVersionError(TableFormatError):
    """Table file written with an unknown format version."""


@dataclass(frozen=True)
class TableGrid:
    """Axes P_i = delta*i and S_j = delta*j for i, j = 1..m."""

    delta: float = 0.02
    m: int = 1000

    def __post_init__(self):
        if self.delta <= 0.0 or self.m < 2:
            raise ValueError("need delta > 0 and at least 2 grid points")

    @property
    def p_max(self):
        return self.delta * self.m

    def axis(self):
        return self.delta * np.arange(1, self.m + 1)


@dataclass
class KernelTable:
    grid: TableGrid
    policy: TruncationPolicy
    values: dict  # family name -> array (n_entries, m, m), P-major
    overflow_cells: dict = field(default_factory=dict)
    clamp_count: int = 0

    def families(self):
        return [name for name in FAMILY_ORDER if name in self.values]


_INDEX_PAIRS = {"ml": [(0, 0), (0, 1), (1, 0), (1, 1)],
                "m": [(0, 0), (1, 0)], "l": [(0, 0), (0, 1)],
                "": [(0, 0)]}


def _compute_row(args):
    """All kernel entries for one P row; pure function for worker pools."""
    P, s_axis, policy, family_names = args
    wanted = [(name, m, l) for name in family_names
              for (m, l) in _INDEX_PAIRS[FAMILIES[name].index_kind]]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals, _, over = sum_series_multi(wanted, P, s_axis, policy)
    row = {}
    overflow = {}
    for name in family_names:
        fam = FAMILIES[name]
        entries = np.empty((fam.n_entries, s_axis.size))
        ovf = np.zeros(s_axis.size, dtype=bool)
        for m, l in _INDEX_PAIRS[fam.index_kind]:
            entries[fam.entry(m, l)] = vals[(name, m, l)]
            ovf |= over[(name, m, l)]
        row[name] = entries
        overflow[name] = ovf
    return row, overflow


def generate_table(grid, policy=None, families=None, workers=1,
                   progress=False):
    """Tabulate the dimensionless kernels over the whole (P, S) grid.

    Rows (fixed P) are independent; with workers > 1 they are computed in
    a process pool, assembled in order, so output does not depend on the
    worker count.
    """
    policy = policy or TruncationPolicy()
    family_names = list(families) if families else list(FAMILY_ORDER)
    axis = grid.axis()
    values = {name: np.empty((FAMILIES[name].n_entries, grid.m, grid.m))
              for name in family_names}
    overflow = {name: np.zeros((grid.m, grid.m), dtype=bool)
                for name in family_names}
    tasks = [(P, axis, policy, family_names) for P in axis]
    if workers > 1:
        import multiprocessing
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_compute_row, tasks, chunksize=8)
    else:
        results = map(_compute_row, tasks)
    for i, (row, over) in enumerate(results):
        for name in family_names:
            values[name][:, i, :] = row[name]
            overflow[name][i, :] = over[name]
        if progress and (i + 1) % 50 == 0:
            print("table rows %d/%d" % (i + 1, grid.m), flush=True)
    return KernelTable(grid=grid, policy=policy, values=values,
                       overflow_cells=overflow)


def _fnv1a(payload):
    """64-bit FNV-1a over the payload bytes."""
    h = _FNV_OFFSET
    for b in payload:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def save_table(table, path):
    """Write the table in the versioned little-endian binary format."""
    names = table.families()
    header = bytearray()
    header += MAGIC
    header += struct.pack("<I", FORMAT_VERSION)
    header += struct.pack("<d", table.grid.delta)
    header += struct.pack("<I", table.grid.m)
    header += struct.pack("<I", len(names))
    for name in names:
        header += struct.pack("<8sI", name.encode("ascii"),
                              FAMILIES[name].n_entries)
    header += struct.pack("<d", table.policy.epsilon)
    header += struct.pack("<I", table.policy.j_max)
    payload = bytearray()
    for name in names:
        arr = np.ascontiguousarray(table.values[name], dtype="<f8")
        payload += arr.tobytes()
    checksum = _fnv1a(bytes(payload))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<Q", checksum))


def _read(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise TableFormatError("truncated file while reading %s" % what)
    return buf


def load_table(path):
    """Read a table file, verifying magic, version and checksum."""
    with open(path, "rb") as fh:
        if _read(fh, 4, "magic") != MAGIC:
            raise TableFormatError("bad magic bytes")
        (version,) = struct.unpack("<I", _read(fh, 4, "version"))
        if version != FORMAT_VERSION:
            raise UnsupportedVersionError(
                "unsupported table format version %d" % version)
        (delta,) = struct.unpack("<d", _read(fh, 8, "delta"))
        (m,) = struct.unpack("<I", _read(fh, 4, "grid size"))
        (n_fam,) = struct.unpack("<I", _read(fh, 4, "family count"))
        names = []
        entry_counts = []
        for _ in range(n_fam):
            raw, count = struct.unpack("<8sI", _read(fh, 12, "family"))
            name = raw.rstrip(b"\0").decode("ascii")
            if name not in FAMILIES:
                raise TableFormatError("unknown kernel family %r" % name)
            if count != FAMILIES[name].n_entries:
                raise TableFormatError("entry count mismatch for %s" % name)
            names.append(name)
            entry_counts.append(count)
        (epsilon,) = struct.unpack("<d", _read(fh, 8, "epsilon"))
        (j_max,) = struct.unpack("<I", _read(fh, 4, "j_max"))
        values = {}
        payload = bytearray()
        for name, count in zip(names, entry_counts):
            nbytes = count * m * m * 8
            buf = _read(fh, nbytes, "payload of %s" % name)
            payload += buf
            values[name] = np.frombuffer(buf, dtype="<f8").reshape(
                count, m, m).copy()
        (checksum,) = struct.unpack("<Q", _read(fh, 8, "checksum"))
        if fh.read(1):
            raise TableFormatError("trailing bytes after checksum")
    if checksum != _fnv1a(bytes(payload)):
        raise TableFormatError("payload checksum mismatch")
    return KernelTable(grid=TableGrid(delta=delta, m=int(m)),
                       policy=TruncationPolicy(epsilon=epsilon,
                                               j_max=int(j_max)),
                       values=values)


def interpolate(table, family, m, l, P, S, count_clamps=True):
    """Area-weighted bilinear value of one kernel entry at (P, S).

    Each cell corner is weighted by the area of the sub-rectangle
    diagonally opposite the query point, normalised by the cell area.
    Out-of-range queries clamp the cell index, which linearly
    extrapolates the boundary cell.
    """
    grid = table.grid
    name = family if isinstance(family, str) else family.name
    fam = FAMILIES[name]
    arr = table.values[name][fam.entry(m, l)]
    delta = grid.delta

    def cell_index(v):
        # nudge queries sitting an ulp below a grid line onto it
        i = int(np.floor(v / delta + 1e-12))
        clamped = i < 1 or i > grid.m - 1
        return min(max(i, 1), grid.m - 1), clamped

    i, clamp_p = cell_index(P)
    j, clamp_s = cell_index(S)
    if count_clamps and (clamp_p or clamp_s):
        table.clamp_count += 1
    p0, p1 = delta * i, delta * (i + 1)
    s0, s1 = delta * j, delta * (j + 1)
    q = delta * delta
    w00 = (p1 - P) * (s1 - S) / q
    w01 = (p1 - P) * (S - s0) / q
    w10 = (P - p0) * (s1 - S) / q
    w11 = (P - p0) * (S - s0) / q
    # array index of grid node P_i is i - 1
    return (w00 * arr[i - 1, j - 1] + w01 * arr[i - 1, j]
            + w10 * arr[i, j - 1] + w11 * arr[i, j])
