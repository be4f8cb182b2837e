"""Honeycomb lattice geometry, snake numbering and the spin-orbital to qubit map.

Hexagons are regular, pointy-top (zig-zag rows along x) with unit spacing.
Every site carries an integer column ``col``; vertical bonds join sites of
adjacent rows that share a column.  Sites are numbered along a snake: row 0
(top) left to right, row 1 right to left, and so on.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SQRT3_2 = math.sqrt(3.0) / 2.0


class Direction(enum.Enum):
    D1 = (SQRT3_2, 0.5)
    D2 = (-SQRT3_2, 0.5)
    D3 = (0.0, -1.0)


class Orientation(enum.Enum):
    HORIZONTAL = "H"
    VERTICAL = "V"


class Spin(enum.IntEnum):
    UP = 0
    DOWN = 1

    @property
    def flipped(self) -> "Spin":
        return Spin(1 - self)

    @property
    def symbol(self) -> str:
        return "u" if self is Spin.UP else "d"


def direction_vector(direction: Direction) -> np.ndarray:
    return np.array(direction.value, dtype=float)


@dataclass(frozen=True)
class LatticeSpec:
    nx: int
    ny: int

    def __post_init__(self):
        for name in ("nx", "ny"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class Site:
    index: int
    row: int
    col: int
    position: tuple[float, float]


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    direction: Direction
    sign: int  # position[b] - position[a] == sign * direction
    orientation: Orientation
    row: int  # row of ``a``; upper row for vertical edges

    @property
    def vector(self) -> np.ndarray:
        """Unit vector pointing from site ``a`` to site ``b``."""
        return self.sign * direction_vector(self.direction)


@dataclass(frozen=True)
class QubitMap:
    """Spin-orbital <-> qubit assignment along the snake.

    Site ``s`` owns qubits ``2s`` and ``2s+1``; in even rows these hold
    (up, down), in odd rows (down, up).
    """

    total_qubits: int
    forward: dict[tuple[int, Spin], int]
    inverse: tuple[tuple[int, Spin], ...]

    def qubit(self, site: int, spin: Spin) -> int:
        try:
            return self.forward[(site, Spin(spin))]
        except KeyError:
            raise IndexError(f"site {site} out of range") from None

    def mode(self, qubit: int) -> tuple[int, Spin]:
        if not 0 <= qubit < self.total_qubits:
            raise IndexError(f"qubit {qubit} out of range")
        return self.inverse[qubit]


@dataclass(frozen=True)
class Lattice:
    spec: LatticeSpec
    sites: tuple[Site, ...]
    rows: tuple[range, ...]
    edges: tuple[Edge, ...]
    qubit_map: QubitMap = field(repr=False)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_qubits(self) -> int:
        return self.qubit_map.total_qubits

    @cached_property
    def edge_lookup(self) -> dict[frozenset, Edge]:
        return {frozenset((e.a, e.b)): e for e in self.edges}

    def edge_between(self, i: int, j: int) -> Edge | None:
        return self.edge_lookup.get(frozenset((i, j)))

    def degree(self, site: int) -> int:
        return sum(1 for e in self.edges if site in (e.a, e.b))

    def row_of(self, site: int) -> int:
        return self.sites[site].row

    def describe(self) -> str:
        """Plain-text dump: one line per site, then one line per edge."""
        lines = [f"lattice {self.spec.nx}x{self.spec.ny} sites={self.n_sites} edges={len(self.edges)}"]
        for s in self.sites:
            x, y = s.position
            lines.append(f"site {s.index} row={s.row} col={s.col} x={x:.6f} y={y:.6f}")
        for e in self.edges:
            sign = "+" if e.sign > 0 else "-"
            lines.append(f"edge {e.a} {e.b} {sign}{e.direction.name} {e.orientation.value}")
        return "\n".join(lines)


def site_count(nx: int, ny: int) -> int:
    return (2 * nx + 2) * (ny + 1) - 2


def edge_count(nx: int, ny: int) -> int:
    return (2 * nx + 1) * (ny + 1) - 2 + (nx + 1) * ny


def _column_range(nx: int, ny: int, row: int) -> range:
    if row == 0:
        return range(1, 2 * nx + 2)
    if row < ny:
        return range(0, 2 * nx + 2)
    # bottom row hangs off the hexagon row above it, whose vertical bonds
    # sit on odd columns for even hexagon rows and on even columns otherwise
    return range(1, 2 * nx + 2) if (ny - 1) % 2 == 0 else range(0, 2 * nx + 1)


def _position(row: int, col: int) -> tuple[float, float]:
    high = (col % 2) == (row % 2)
    return (col * SQRT3_2, -1.5 * row + (0.0 if high else -0.5))


def _classify(delta: np.ndarray) -> tuple[Direction, int]:
    for d in Direction:
        v = direction_vector(d)
        if np.allclose(delta, v, atol=1e-9):
            return d, 1
        if np.allclose(delta, -v, atol=1e-9):
            return d, -1
    raise AssertionError(f"bond vector {delta} is not a lattice direction")


def build_qubit_map(sites: tuple[Site, ...]) -> QubitMap:
    forward: dict[tuple[int, Spin], int] = {}
    for s in sites:
        first, second = (Spin.UP, Spin.DOWN) if s.row % 2 == 0 else (Spin.DOWN, Spin.UP)
        forward[(s.index, first)] = 2 * s.index
        forward[(s.index, second)] = 2 * s.index + 1
    inverse = [None] * (2 * len(sites))
    for key, q in forward.items():
        inverse[q] = key
    return QubitMap(2 * len(sites), forward, tuple(inverse))


def build_lattice(spec: LatticeSpec | tuple[int, int]) -> Lattice:
    if not isinstance(spec, LatticeSpec):
        spec = LatticeSpec(*spec)
    nx, ny = spec.nx, spec.ny

    sites: list[Site] = []
    rows: list[range] = []
    by_rc: dict[tuple[int, int], int] = {}
    for r in range(ny + 1):
        cols = list(_column_range(nx, ny, r))
        if r % 2 == 1:
            cols.reverse()
        start = len(sites)
        for c in cols:
            idx = len(sites)
            sites.append(Site(idx, r, c, _position(r, c)))
            by_rc[(r, c)] = idx
        rows.append(range(start, len(sites)))

    edges: list[Edge] = []

    def add(i: int, j: int, orientation: Orientation) -> None:
        a, b = min(i, j), max(i, j)
        delta = np.subtract(sites[b].position, sites[a].position)
        d, sign = _classify(delta)
        edges.append(Edge(a, b, d, sign, orientation, sites[a].row))

    for r in range(ny + 1):
        for c in _column_range(nx, ny, r):
            if (r, c + 1) in by_rc:
                add(by_rc[(r, c)], by_rc[(r, c + 1)], Orientation.HORIZONTAL)
    for r in range(ny):
        # hexagon row r carries vertical bonds on odd columns when r is even
        for c in range(1 - r % 2, 2 * nx + 2, 2):
            if (r, c) in by_rc and (r + 1, c) in by_rc:
                add(by_rc[(r, c)], by_rc[(r + 1, c)], Orientation.VERTICAL)

    edges.sort(key=lambda e: (e.a, e.b))
    site_tuple = tuple(sites)
    lattice = Lattice(spec, site_tuple, tuple(rows), tuple(edges), build_qubit_map(site_tuple))
    assert lattice.n_sites == site_count(nx, ny)
    assert len(lattice.edges) == edge_count(nx, ny)
    return lattice


def qubit_of(qmap: QubitMap, site: int, spin: Spin) -> int:
    return qmap.qubit(site, spin)
