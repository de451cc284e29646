"""TSPLIB file reading and writing.

Supports the subset of the TSPLIB95 format needed for explicit ATSP matrices
plus coordinate-based symmetric instances (EUC_2D, CEIL_2D, GEO, ATT).
Keyword parsing is case-sensitive; both ``KEY: value`` and ``KEY : value``
are accepted because real files vary.  Diagonal entries of explicit matrices
are preserved verbatim (sentinels like 9999999 survive a round trip) but are
never used in any cost computation.
"""
from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import DimensionMismatch, MalformedHeader, TruncatedData, UnsupportedFormat
from .model import AtspInstance, TsplibHeader

_HEADER_RE = re.compile(r"^([A-Z_0-9]+)\s*:\s*(.*)$")
_REQUIRED_KEYS = ("NAME", "TYPE", "DIMENSION", "EDGE_WEIGHT_TYPE")
_SECTION_KEYS = ("EDGE_WEIGHT_SECTION", "NODE_COORD_SECTION")
_KNOWN_SECTIONS = _SECTION_KEYS + (
    "DISPLAY_DATA_SECTION",
    "FIXED_EDGES_SECTION",
    "TOUR_SECTION",
)

# expected entry counts for EXPLICIT formats, as a function of n
_FORMAT_COUNTS = {
    "FULL_MATRIX": lambda n: n * n,
    "UPPER_ROW": lambda n: n * (n - 1) // 2,
    "LOWER_ROW": lambda n: n * (n - 1) // 2,
    "UPPER_DIAG_ROW": lambda n: n * (n + 1) // 2,
    "LOWER_DIAG_ROW": lambda n: n * (n + 1) // 2,
}


def parse_instance(source: str | Iterable[str]) -> AtspInstance:
    """Parse TSPLIB text (a string or an iterable of lines) into an instance."""
    if isinstance(source, str):
        lines: Iterator[str] = iter(source.splitlines())
    else:
        lines = iter(source)

    fields: dict[str, str] = {}
    matrix: np.ndarray | None = None
    coords: list[tuple[float, float]] | None = None
    saw_eof = False

    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            saw_eof = True
            break
        m = _HEADER_RE.match(line)
        if m and m.group(1) not in _KNOWN_SECTIONS:
            key, value = m.group(1), m.group(2).strip()
            if key in fields:
                raise MalformedHeader(f"duplicate keyword {key}")
            fields[key] = value
            continue
        # section marker (with or without colon)
        section = line.split(":")[0].strip()
        if section == "EDGE_WEIGHT_SECTION":
            matrix = _read_edge_weights(lines, fields)
        elif section == "NODE_COORD_SECTION":
            coords = _read_coords(lines, fields)
        elif section in _KNOWN_SECTIONS:
            raise UnsupportedFormat(f"section {section} not supported")
        else:
            raise MalformedHeader(f"unrecognized line {line!r}")

    header = _build_header(fields)
    if header.edge_weight_type == "EXPLICIT":
        if matrix is None:
            if saw_eof:
                raise MalformedHeader("EXPLICIT instance without EDGE_WEIGHT_SECTION")
            raise TruncatedData("missing EDGE_WEIGHT_SECTION")
        costs = _expand_matrix(matrix, header)
    else:
        if coords is None:
            if saw_eof:
                raise MalformedHeader("coordinate instance without NODE_COORD_SECTION")
            raise TruncatedData("missing NODE_COORD_SECTION")
        costs = _coords_to_matrix(coords, header.edge_weight_type)
    return AtspInstance(header=header, costs=costs)


def load_instance(path: str | Path) -> AtspInstance:
    return parse_instance(Path(path).read_text())


def write_instance(instance: AtspInstance) -> str:
    """Emit the instance as TYPE: ATSP, EXPLICIT, FULL_MATRIX TSPLIB text.

    ``parse_instance(write_instance(x))`` reproduces x's cost matrix exactly,
    including diagonal entries.
    """
    header = instance.header
    out = [f"NAME: {header.name}", "TYPE: ATSP"]
    if header.comment:
        out.append(f"COMMENT: {header.comment}")
    out += [
        f"DIMENSION: {instance.n}",
        "EDGE_WEIGHT_TYPE: EXPLICIT",
        "EDGE_WEIGHT_FORMAT: FULL_MATRIX",
        "EDGE_WEIGHT_SECTION",
    ]
    width = max(len(str(int(v))) for v in instance.costs.flat)
    for row in instance.costs:
        out.append(" " + " ".join(str(int(v)).rjust(width) for v in row))
    out.append("EOF")
    return "\n".join(out) + "\n"


def save_instance(instance: AtspInstance, path: str | Path) -> None:
    Path(path).write_text(write_instance(instance))


# --- internals ---------------------------------------------------------------

def _build_header(fields: dict[str, str]) -> TsplibHeader:
    for key in _REQUIRED_KEYS:
        if key not in fields:
            raise MalformedHeader(f"missing keyword {key}")
    try:
        dimension = int(fields["DIMENSION"])
    except ValueError as exc:
        raise MalformedHeader(f"DIMENSION not an integer: {fields['DIMENSION']!r}") from exc
    ew_type = fields["EDGE_WEIGHT_TYPE"]
    ew_format = fields.get("EDGE_WEIGHT_FORMAT")
    if ew_type == "EXPLICIT" and ew_format is None:
        raise MalformedHeader("EXPLICIT instance missing EDGE_WEIGHT_FORMAT")
    return TsplibHeader(
        name=fields["NAME"],
        problem_type=fields["TYPE"],
        dimension=dimension,
        edge_weight_type=ew_type,
        edge_weight_format=ew_format,
        comment=fields.get("COMMENT"),
    )


def _read_numbers(lines: Iterator[str], need: int) -> tuple[list[int], str | None]:
    """Collect whitespace-separated integers until ``need`` are read.

    Returns the numbers plus the first non-numeric trailing line (usually
    ``EOF`` or the next section marker), or None if the stream ended.
    """
    values: list[int] = []
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        if not _looks_numeric(line):
            return values, line
        try:
            values.extend(int(tok) for tok in line.split())
        except ValueError as exc:
            raise TruncatedData(f"non-integer token in data section: {line!r}") from exc
    return values, None


def _looks_numeric(line: str) -> bool:
    head = line.split()[0]
    return bool(re.fullmatch(r"[+-]?\d+(\.\d+)?", head))


def _read_edge_weights(lines: Iterator[str], fields: dict[str, str]) -> np.ndarray:
    if "DIMENSION" not in fields:
        raise MalformedHeader("EDGE_WEIGHT_SECTION before DIMENSION")
    n = int(fields["DIMENSION"])
    fmt = fields.get("EDGE_WEIGHT_FORMAT")
    if fmt not in _FORMAT_COUNTS:
        raise UnsupportedFormat(f"EDGE_WEIGHT_FORMAT {fmt!r} not supported")
    need = _FORMAT_COUNTS[fmt](n)
    values, trailing = _read_numbers(lines, need)
    if len(values) < need:
        if trailing is None:
            raise TruncatedData(
                f"stream ended after {len(values)}/{need} matrix entries"
            )
        raise DimensionMismatch(f"expected {need} entries, found {len(values)}")
    if len(values) > need:
        raise DimensionMismatch(f"expected {need} entries, found {len(values)}")
    if trailing is not None and trailing != "EOF":
        # push-back is not needed: nothing after the matrix is supported anyway
        raise UnsupportedFormat(f"unexpected content after matrix: {trailing!r}")
    return np.asarray(values, dtype=np.int64)


def _expand_matrix(flat: np.ndarray, header: TsplibHeader) -> np.ndarray:
    n = header.dimension
    fmt = header.edge_weight_format
    if fmt == "FULL_MATRIX":
        return flat.reshape(n, n)
    costs = np.zeros((n, n), dtype=np.int64)
    idx = 0
    diag = "DIAG" in (fmt or "")
    upper = (fmt or "").startswith("UPPER")
    for i in range(n):
        js = range(i, n) if upper else range(0, i + 1)
        if not diag:
            js = range(i + 1, n) if upper else range(0, i)
        for j in js:
            costs[i, j] = costs[j, i] = flat[idx]
            idx += 1
    return costs


def _read_coords(lines: Iterator[str], fields: dict[str, str]) -> list[tuple[float, float]]:
    if "DIMENSION" not in fields:
        raise MalformedHeader("NODE_COORD_SECTION before DIMENSION")
    n = int(fields["DIMENSION"])
    coords: list[tuple[float, float]] = [(math.nan, math.nan)] * n
    seen = 0
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        if not _looks_numeric(line):
            if seen < n:
                raise DimensionMismatch(f"expected {n} coordinate lines, found {seen}")
            return coords
        parts = line.split()
        if len(parts) < 3:
            raise TruncatedData(f"bad coordinate line {line!r}")
        idx = int(float(parts[0])) - 1  # TSPLIB node ids are 1-based
        if not 0 <= idx < n:
            raise DimensionMismatch(f"coordinate index {idx + 1} outside 1..{n}")
        coords[idx] = (float(parts[1]), float(parts[2]))
        seen += 1
        if seen == n:
            return coords
    raise TruncatedData(f"stream ended after {seen}/{n} coordinate lines")


def _nint(x: float) -> int:
    return int(x + 0.5)


def _geo_radians(value: float) -> float:
    # TSPLIB geographical coordinates are DDD.MM (degrees and minutes)
    deg = _nint(value)
    minutes = value - deg
    return math.pi * (deg + 5.0 * minutes / 3.0) / 180.0


def _coords_to_matrix(coords: list[tuple[float, float]], ew_type: str) -> np.ndarray:
    n = len(coords)
    costs = np.zeros((n, n), dtype=np.int64)
    if ew_type == "GEO":
        lat = [_geo_radians(x) for x, _ in coords]
        lon = [_geo_radians(y) for _, y in coords]
    for i in range(n):
        for j in range(i + 1, n):
            xi, yi = coords[i]
            xj, yj = coords[j]
            if ew_type == "EUC_2D":
                d = _nint(math.hypot(xi - xj, yi - yj))
            elif ew_type == "CEIL_2D":
                d = int(math.ceil(math.hypot(xi - xj, yi - yj)))
            elif ew_type == "ATT":
                r = math.sqrt(((xi - xj) ** 2 + (yi - yj) ** 2) / 10.0)
                t = _nint(r)
                d = t + 1 if t < r else t
            elif ew_type == "GEO":
                rrr = 6378.388
                q1 = math.cos(lon[i] - lon[j])
                q2 = math.cos(lat[i] - lat[j])
                q3 = math.cos(lat[i] + lat[j])
                d = int(rrr * math.acos(0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)) + 1.0)
            else:  # pragma: no cover - guarded by header validation
                raise UnsupportedFormat(f"EDGE_WEIGHT_TYPE {ew_type!r} not supported")
            costs[i, j] = costs[j, i] = d
    return costs
