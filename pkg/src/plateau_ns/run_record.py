"""Dead-point chains: data model, tie-aware ordering and text serialization.

A chain is stored as two files: a delimited table and a JSON sidecar.

Chain table
    The first line is the header ``logL,logL_birth,x0,...,x{D-1}``. Every
    following line holds one dead point. Reals are written with Python's
    shortest round-trip ``repr``, so reading a file back yields bit-identical
    values; minus infinity is written as ``-inf``. A death-only chain omits
    the ``logL_birth`` column (header ``logL,x0,...``).

Sidecar (``<chain>.meta.json``)
    A JSON object with exactly the keys ``n_live_target`` (int >= 1),
    ``seed`` (int), ``likelihood_id`` (str), ``termination`` (one of
    ``max_iterations``, ``evidence_remainder``, ``all_live_equal``) and
    ``dimension`` (int >= 1).
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

TERMINATIONS = ("max_iterations", "evidence_remainder", "all_live_equal")
META_SUFFIX = ".meta.json"
NEG_INF_TOKEN = "-inf"


class ChainFormatError(ValueError):
    """A chain file or sidecar could not be parsed."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class StructureError(ValueError):
    """A run record is internally inconsistent."""


class DeadPoint(NamedTuple):
    coords: np.ndarray
    log_like: float
    log_like_birth: float


@dataclass(frozen=True)
class RunMeta:
    n_live_target: int
    seed: int
    likelihood_id: str
    termination: str
    dimension: int

    def __post_init__(self):
        if int(self.n_live_target) < 1:
            raise StructureError("n_live_target must be >= 1")
        if int(self.dimension) < 1:
            raise StructureError("dimension must be >= 1")
        if self.termination not in TERMINATIONS:
            raise StructureError(f"unknown termination {self.termination!r}")

    def to_dict(self):
        return {
            "n_live_target": int(self.n_live_target),
            "seed": int(self.seed),
            "likelihood_id": str(self.likelihood_id),
            "termination": str(self.termination),
            "dimension": int(self.dimension),
        }


@dataclass(eq=False)
class RunRecord:
    """Ordered dead points of one nested sampling run.

    Stored column-wise: ``log_like`` and ``log_like_birth`` have shape
    ``(N,)`` and ``coords`` has shape ``(N, D)``.
    """

    log_like: np.ndarray
    log_like_birth: np.ndarray
    coords: np.ndarray
    meta: RunMeta

    def __post_init__(self):
        self.log_like = np.asarray(self.log_like, dtype=float).reshape(-1)
        self.log_like_birth = np.asarray(self.log_like_birth, dtype=float).reshape(-1)
        n = self.log_like.size
        self.coords = np.asarray(self.coords, dtype=float).reshape(n, self.meta.dimension)
        if self.log_like_birth.size != n:
            raise StructureError("log_like and log_like_birth lengths differ")

    @classmethod
    def from_points(cls, points: Sequence[DeadPoint], meta: RunMeta) -> "RunRecord":
        if len(points) == 0:
            return cls(np.empty(0), np.empty(0), np.empty((0, meta.dimension)), meta)
        return cls(
            np.array([p.log_like for p in points], dtype=float),
            np.array([p.log_like_birth for p in points], dtype=float),
            np.array([np.asarray(p.coords, dtype=float) for p in points]),
            meta,
        )

    def __len__(self):
        return self.log_like.size

    @property
    def points(self) -> list[DeadPoint]:
        return list(iter(self))

    def __iter__(self) -> Iterator[DeadPoint]:
        for i in range(len(self)):
            yield DeadPoint(self.coords[i], float(self.log_like[i]),
                            float(self.log_like_birth[i]))

    def __eq__(self, other):
        if not isinstance(other, RunRecord):
            return NotImplemented
        return (
            self.meta == other.meta
            and np.array_equal(self.log_like, other.log_like)
            and np.array_equal(self.log_like_birth, other.log_like_birth)
            and np.array_equal(self.coords, other.coords)
        )

    def take(self, index) -> "RunRecord":
        index = np.asarray(index, dtype=int)
        return RunRecord(self.log_like[index], self.log_like_birth[index],
                         self.coords[index], self.meta)

    def validate(self):
        """Check the per-point invariants, raising :class:`StructureError`."""
        ll, lb = self.log_like, self.log_like_birth
        if np.isnan(ll).any() or np.isnan(lb).any():
            raise StructureError("NaN log-likelihood in record")
        if np.isposinf(ll).any():
            raise StructureError("+inf log-likelihood in record")
        # -inf deaths can only come from unconstrained draws
        bad = ~((lb < ll) | (np.isneginf(lb) & np.isneginf(ll)))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise StructureError(
                f"point {i}: birth {lb[i]!r} is not below death {ll[i]!r}")
        return self

    def births_at_contours(self) -> bool:
        """True if every birth is ``-inf`` or an earlier realized death contour."""
        ll, lb = self.log_like, self.log_like_birth
        order = np.argsort(ll, kind="stable")
        rank = np.empty(ll.size, dtype=int)
        rank[order] = np.arange(ll.size)
        first_rank = {}
        for r, i in enumerate(order.tolist()):
            first_rank.setdefault(float(ll[i]), r)
        for i in range(ll.size):
            b = float(lb[i])
            if b == -math.inf:
                continue
            r = first_rank.get(b)
            if r is None or r >= rank[i]:
                return False
        return True


@dataclass(frozen=True)
class TieGroup:
    level: float
    member_indices: tuple
    n_base: int

    @property
    def size(self):
        return len(self.member_indices)


def _n_alive(level, log_like, births_sorted, deaths_sorted, n_live_target):
    """Number of points alive at ``level``: died at or above it, born below it."""
    if level == -math.inf:
        # Births at the -inf contour cannot be told apart from unconstrained
        # draws, so the initial live set size is taken from the metadata.
        return n_live_target
    died_at_or_above = deaths_sorted.size - np.searchsorted(deaths_sorted, level, side="left")
    born_at_or_above = births_sorted.size - np.searchsorted(births_sorted, level, side="left")
    return int(died_at_or_above - born_at_or_above)


def canonical_order(run: RunRecord, merge_tol: float = 0.0):
    """Sort a run by death contour and partition it into tie groups.

    Points are ordered by ``log_like`` ascending; exact ties keep their file
    order. Consecutive points whose values are bitwise equal form one
    :class:`TieGroup`. With ``merge_tol > 0`` a value within ``merge_tol`` of
    the first value of the current group joins that group instead.

    Returns
    -------
    ordered : RunRecord
    groups : list of TieGroup
        Indices refer to positions in ``ordered``.
    """
    run.validate()
    if merge_tol < 0:
        raise ValueError("merge_tol must be non-negative")
    order = np.argsort(run.log_like, kind="stable")
    ordered = run.take(order)
    ll = ordered.log_like
    n = ll.size
    if n == 0:
        return ordered, []

    if merge_tol == 0.0:
        # -inf == -inf, so plain equality is the bitwise tie rule here
        starts = np.flatnonzero(np.concatenate(([True], ll[1:] != ll[:-1])))
    else:
        starts = [0]
        for i in range(1, n):
            if not ll[i] - ll[starts[-1]] <= merge_tol:
                starts.append(i)
        starts = np.asarray(starts)
    ends = np.append(starts[1:], n)

    deaths_sorted = ll
    births_sorted = np.sort(ordered.log_like_birth)
    groups = []
    for s, e in zip(starts.tolist(), ends.tolist()):
        level = float(ll[s])
        n_base = _n_alive(level, ll, births_sorted, deaths_sorted,
                          ordered.meta.n_live_target)
        if e - s > n_base:
            raise StructureError(
                f"tie group at level {level!r} has {e - s} members but only "
                f"{n_base} live points")
        groups.append(TieGroup(level, tuple(range(s, e)), n_base))
    return ordered, groups


# -- serialization ---------------------------------------------------------

def _fmt(value):
    return repr(float(value))


def _parse_real(cell, row):
    try:
        value = float(cell)
    except ValueError:
        raise ChainFormatError(f"non-numeric cell {cell!r}", row) from None
    if math.isnan(value):
        raise ChainFormatError("NaN cell", row)
    return value


def dumps(run: RunRecord):
    """Return ``(chain_text, meta_text)`` for a run."""
    d = run.meta.dimension
    lines = [",".join(["logL", "logL_birth"] + [f"x{j}" for j in range(d)])]
    for i in range(len(run)):
        cells = [_fmt(run.log_like[i]), _fmt(run.log_like_birth[i])]
        cells.extend(_fmt(v) for v in run.coords[i])
        lines.append(",".join(cells))
    chain_text = "\n".join(lines) + "\n"
    meta_text = json.dumps(run.meta.to_dict(), indent=2, sort_keys=True) + "\n"
    return chain_text, meta_text


def meta_path(path):
    return os.fspath(path) + META_SUFFIX


def serialize(run: RunRecord, path) -> bytes:
    """Write the chain table to ``path`` and its sidecar next to it.

    Returns the bytes written to the chain table.
    """
    chain_text, meta_text = dumps(run)
    data = chain_text.encode("ascii")
    with open(path, "wb") as fh:
        fh.write(data)
    with open(meta_path(path), "w", encoding="ascii") as fh:
        fh.write(meta_text)
    return data


def parse_meta(text) -> RunMeta:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChainFormatError(f"sidecar is not valid JSON: {exc}") from None
    expected = {"n_live_target", "seed", "likelihood_id", "termination", "dimension"}
    if not isinstance(obj, dict) or set(obj) != expected:
        got = sorted(obj) if isinstance(obj, dict) else type(obj).__name__
        raise ChainFormatError(f"sidecar keys must be {sorted(expected)}, got {got}")
    for key in ("n_live_target", "seed", "dimension"):
        if not isinstance(obj[key], int) or isinstance(obj[key], bool):
            raise ChainFormatError(f"sidecar field {key!r} must be an integer")
    try:
        return RunMeta(**obj)
    except StructureError as exc:
        raise ChainFormatError(f"sidecar: {exc}") from None


def loads(chain_text: str, meta_text: str, births: str = "require") -> RunRecord:
    """Parse a chain table and sidecar.

    ``births`` chooses how a death-only table is read: ``"require"`` rejects
    it, ``"assume-prior"`` sets every birth contour to ``-inf``.
    """
    if births not in ("require", "assume-prior"):
        raise ValueError(f"births must be 'require' or 'assume-prior', not {births!r}")
    meta = parse_meta(meta_text)
    lines = chain_text.splitlines()
    if not lines:
        raise ChainFormatError("missing header", 1)
    header = lines[0].strip().split(",")
    d = meta.dimension
    coord_names = [f"x{j}" for j in range(d)]
    if header == ["logL", "logL_birth"] + coord_names:
        has_birth = True
    elif header == ["logL"] + coord_names:
        if births == "require":
            raise ChainFormatError("chain has no logL_birth column", 1)
        has_birth = False
    else:
        raise ChainFormatError(
            f"malformed header {lines[0]!r} for dimension {d}", 1)

    ncol = len(header)
    ll, lb, xs = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != ncol:
            raise ChainFormatError(f"expected {ncol} cells, found {len(cells)}", lineno)
        values = [_parse_real(c.strip(), lineno) for c in cells]
        death = values[0]
        birth = values[1] if has_birth else -math.inf
        if death == math.inf:
            raise ChainFormatError("logL of +inf", lineno)
        if not (birth < death or (birth == -math.inf and death == -math.inf)):
            raise ChainFormatError(f"birth {birth!r} >= death {death!r}", lineno)
        ll.append(death)
        lb.append(birth)
        xs.append(values[2 if has_birth else 1:])
    coords = np.array(xs, dtype=float).reshape(len(xs), d)
    return RunRecord(np.array(ll, dtype=float), np.array(lb, dtype=float), coords, meta)


def deserialize(path, births: str = "require") -> RunRecord:
    """Read a chain table and its sidecar from disk."""
    with open(path, "r", encoding="ascii") as fh:
        chain_text = fh.read()
    try:
        with open(meta_path(path), "r", encoding="ascii") as fh:
            meta_text = fh.read()
    except FileNotFoundError:
        raise ChainFormatError(f"missing sidecar {meta_path(path)}") from None
    return loads(chain_text, meta_text, births=births)
