"""Fermionic-swap schedules that make every Hamiltonian term chain-adjacent once per step.

Each site row of the snake is an independent sub-chain.  Alternating even and
odd fswap layers inside a row reverse it after ``L`` layers and restore it
after ``2L``.  Row ends see every same-row pair, and the positions straddling
two rows see every cross-row pair, so interactions are only ever placed there.
Middle rows are two qubits longer than the boundary rows; they catch up with
two extra double steps at the half-period point while the boundary rows idle.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .lattice import Lattice, Orientation

KINDS = ("coulomb", "hop", "so")


class CompileError(RuntimeError):
    """A term of the requested part never became chain-adjacent."""


@dataclass(frozen=True)
class Interaction:
    positions: tuple[int, int]
    labels: tuple[int, int]  # logical qubits resident at ``positions``
    edge: tuple[int, int]  # site pair (a < b); (s, s) for Coulomb
    kind: str
    orientation: str  # "H", "V" or "site"

    @property
    def term(self) -> tuple[int, int]:
        return tuple(sorted(self.labels))


@dataclass(frozen=True)
class Layer:
    swaps: tuple[tuple[int, int], ...] = ()
    interactions: tuple[Interaction, ...] = ()
    note: str = ""
    snapshot: int | None = None  # set on interaction layers


@dataclass(frozen=True)
class TrotterPlan:
    part: str
    n_qubits: int
    layers: tuple[Layer, ...]
    rows: tuple[range, ...] = field(repr=False, default=())

    @property
    def interactions(self) -> list[Interaction]:
        return [i for layer in self.layers for i in layer.interactions]

    @property
    def swap_count(self) -> int:
        return sum(len(layer.swaps) for layer in self.layers)

    @property
    def depth(self) -> int:
        return sum(1 for layer in self.layers if layer.swaps or layer.interactions)

    def orderings(self) -> list[tuple[list[int], tuple[Interaction, ...], str]]:
        """Chain contents at each snapshot with the interactions placed there."""
        perm = list(range(self.n_qubits))
        out: list[tuple[list[int], tuple[Interaction, ...], str]] = []
        current: int | None = None
        for layer in self.layers:
            if layer.swaps:
                perm = _apply_swaps(perm, layer.swaps)
            if layer.snapshot is not None:
                if layer.snapshot != current:
                    out.append((list(perm), (), layer.note))
                    current = layer.snapshot
                snap, inter, note = out[-1]
                out[-1] = (snap, inter + layer.interactions, note or layer.note)
        return out


@dataclass
class CoverageReport:
    part: str
    final_permutation: list[int]
    counts: Counter
    violations: list[str]
    missing: list[tuple[int, int]]
    duplicates: list[tuple[int, int]]
    unexpected: list[tuple[int, int]]

    @property
    def identity(self) -> bool:
        return self.final_permutation == sorted(self.final_permutation)

    @property
    def ok(self) -> bool:
        return self.identity and not (self.violations or self.missing or self.duplicates or self.unexpected)


def row_subchains(lattice: Lattice) -> list[range]:
    return [range(2 * r.start, 2 * r.stop) for r in lattice.rows]


def swap_layer(kind: str, length: int, offset: int = 0) -> list[tuple[int, int]]:
    if length < 2:
        raise ValueError("a sub-chain needs at least two qubits")
    if kind not in ("even", "odd"):
        raise ValueError(f"unknown layer kind {kind!r}")
    first = 0 if kind == "even" else 1
    return [(offset + k, offset + k + 1) for k in range(first, length - 1, 2)]


def _apply_swaps(perm: list[int], swaps) -> list[int]:
    perm = list(perm)
    for p, q in swaps:
        perm[p], perm[q] = perm[q], perm[p]
    return perm


def expected_terms(lattice: Lattice, part: str) -> set[tuple[int, int]]:
    qmap = lattice.qubit_map
    if part == "coulomb":
        return {tuple(sorted((2 * s.index, 2 * s.index + 1))) for s in lattice.sites}
    out = set()
    for e in lattice.edges:
        for qa in (2 * e.a, 2 * e.a + 1):
            for qb in (2 * e.b, 2 * e.b + 1):
                same = qmap.mode(qa)[1] == qmap.mode(qb)[1]
                if same == (part == "hop"):
                    out.add((qa, qb))
    return out


def _term_edge(lattice: Lattice, part: str, u: int, l: int):
    """Edge (site pair) if labels ``u``, ``l`` form a term of ``part``, else None."""
    qmap = lattice.qubit_map
    (i, si), (j, sj) = qmap.mode(u), qmap.mode(l)
    if (si == sj) != (part == "hop"):
        return None
    return lattice.edge_between(i, j)


def _so_flip_layer(lattice: Lattice) -> tuple[tuple[int, int], ...]:
    # rows alternate direction, so a site's spin order along the chain flips with
    # row parity; swapping every other site keeps opposite spins at row junctions
    swaps = []
    phase = 0
    for rng in lattice.rows:
        for j, s in enumerate(rng):
            if (j + phase) % 2 == 1:
                swaps.append((2 * s, 2 * s + 1))
        phase = (phase + len(rng)) % 2
    return tuple(swaps)


def compile_step(lattice: Lattice, part: str) -> TrotterPlan:
    if part not in KINDS:
        raise ValueError(f"unknown part {part!r}; expected one of {KINDS}")
    n = lattice.n_qubits
    chains = row_subchains(lattice)

    if part == "coulomb":
        inter = tuple(
            Interaction((2 * s.index, 2 * s.index + 1), (2 * s.index, 2 * s.index + 1), (s.index, s.index),
                        "coulomb", "site")
            for s in lattice.sites
        )
        plan = TrotterPlan(part, n, (Layer(interactions=inter, snapshot=0),), tuple(chains))
        _raise_if_incomplete(plan, lattice)
        return plan

    layers: list[Layer] = []
    perm = list(range(n))
    applied: set[tuple[int, int]] = set()
    snapshot = 0

    def place(note: str = "") -> None:
        nonlocal snapshot
        horizontal, vertical = [], []
        for ch in chains:
            ends = [(ch.start, ch.start + 1), (ch.stop - 2, ch.stop - 1)]
            for p, q in dict.fromkeys(ends):
                _try(horizontal, p, q, Orientation.HORIZONTAL)
        for upper, lower in zip(chains, chains[1:]):
            _try(vertical, upper.stop - 1, lower.start, Orientation.VERTICAL)
        layers.append(Layer(interactions=tuple(horizontal), note=note, snapshot=snapshot))
        layers.append(Layer(interactions=tuple(vertical), note=note, snapshot=snapshot))
        snapshot += 1

    def _try(bucket: list, p: int, q: int, orientation: Orientation) -> None:
        u, l = perm[p], perm[q]
        term = (min(u, l), max(u, l))
        if term in applied:
            return
        edge = _term_edge(lattice, part, u, l)
        if edge is None or edge.orientation is not orientation:
            return
        applied.add(term)
        bucket.append(Interaction((p, q), (u, l), (edge.a, edge.b), part, orientation.value))

    def double_step(active: list[range], note: str = "") -> None:
        nonlocal perm
        for kind in ("even", "odd"):
            swaps = tuple(pair for ch in active for pair in swap_layer(kind, len(ch), ch.start))
            perm = _apply_swaps(perm, swaps)
            layers.append(Layer(swaps=swaps, note=note))

    flip = _so_flip_layer(lattice) if part == "so" else ()
    if flip:
        perm = _apply_swaps(perm, flip)
        layers.append(Layer(swaps=flip, note="spin alignment"))

    half = len(chains[0]) // 2
    middle = chains[1:-1]
    place()
    for _ in range(half):
        double_step(chains)
        place()
    if middle:
        for _ in range(2):
            double_step(middle, note="extra")
            place(note="Extra permutation step")
    for _ in range(half):
        double_step(chains)
        place()

    if flip:
        perm = _apply_swaps(perm, flip)
        layers.append(Layer(swaps=flip, note="spin alignment"))

    plan = TrotterPlan(part, n, tuple(layers), tuple(chains))
    _raise_if_incomplete(plan, lattice)
    return plan


def verify_plan(plan: TrotterPlan, lattice: Lattice, part: str | None = None) -> CoverageReport:
    """Replay label permutations through ``plan`` and audit every placed interaction."""
    part = part or plan.part
    perm = list(range(plan.n_qubits))
    counts: Counter = Counter()
    violations: list[str] = []
    for k, layer in enumerate(plan.layers):
        used = [q for pair in layer.swaps for q in pair]
        if len(used) != len(set(used)):
            violations.append(f"layer {k}: overlapping fswaps")
        for p, q in layer.swaps:
            if q != p + 1:
                violations.append(f"layer {k}: fswap on non-adjacent ({p}, {q})")
        perm = _apply_swaps(perm, layer.swaps)
        for inter in layer.interactions:
            p, q = inter.positions
            if q != p + 1:
                violations.append(f"layer {k}: interaction on non-adjacent ({p}, {q})")
                continue
            if (perm[p], perm[q]) != inter.labels:
                violations.append(f"layer {k}: labels {inter.labels} expected at ({p}, {q}), found {(perm[p], perm[q])}")
            counts[inter.term] += 1
    expected = expected_terms(lattice, part)
    return CoverageReport(
        part=part,
        final_permutation=perm,
        counts=counts,
        violations=violations,
        missing=sorted(expected - set(counts)),
        duplicates=sorted(t for t, c in counts.items() if c > 1),
        unexpected=sorted(set(counts) - expected),
    )


def _raise_if_incomplete(plan: TrotterPlan, lattice: Lattice) -> None:
    report = verify_plan(plan, lattice)
    if not report.ok:
        lines = [f"{plan.part} plan for {lattice.spec.nx}x{lattice.spec.ny} is inconsistent"]
        if report.missing:
            qmap = lattice.qubit_map
            lines.append("uncovered terms: " + ", ".join(
                f"{m}-{n} (sites {qmap.mode(m)[0]}-{qmap.mode(n)[0]})" for m, n in report.missing))
        lines += report.violations
        if not report.identity:
            lines.append("final permutation is not the identity")
        raise CompileError("\n".join(lines))


def _row_display(lattice: Lattice, r: int, labels: list[int], width: int) -> list[str]:
    cells = [str(x) for x in labels]
    if r % 2 == 1:
        cells.reverse()
    pad = ["x"] * (width - len(cells))
    # a short row is missing its leftmost column when it starts at column 1
    first_col = min(lattice.sites[s].col for s in lattice.rows[r])
    return pad + cells if first_col == 1 else cells + pad


def export_schedule(plan: TrotterPlan, lattice: Lattice) -> str:
    """Tab-separated orderings, one block per snapshot, rows drawn left to right."""
    chains = row_subchains(lattice)
    width = max(len(ch) for ch in chains)
    lines = []
    for perm, inters, note in plan.orderings():
        notes = []
        for inter in inters:
            name = {"H": "Horizontal", "V": "Vertical", "site": "On-site"}[inter.orientation]
            notes.append(f"{name} interaction ({inter.labels[0]}, {inter.labels[1]})")
        if note:
            notes.append(note)
        for r, ch in enumerate(chains):
            row = "\t".join(_row_display(lattice, r, perm[ch.start:ch.stop], width))
            if r == 0 and notes:
                row += "\t-> " + "; ".join(notes)
            lines.append(row)
        lines.append("")
    return "\n".join(lines)
