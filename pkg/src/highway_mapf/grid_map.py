"""Grid maps, warehouse layouts, corridor extraction and highway directions.

Locations are integer cell indices ``y * width + x`` with ``(0, 0)`` in the
upper-left corner, matching the usual benchmark map files.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

Edge = tuple[int, int]

FREE_CHARS = frozenset(".")
OBSTACLE_CHARS = frozenset("@T")

# (dx, dy, overlay character) in neighbor enumeration order
_STEPS = ((1, 0, ">"), (0, 1, "v"), (-1, 0, "<"), (0, -1, "^"))
_ARROWS = {(dx, dy): ch for dx, dy, ch in _STEPS}


class MapFormatError(ValueError):
    """Raised for malformed map or highway overlay files."""


class HighwayError(ValueError):
    """Raised when a highway does not fit the map it is applied to."""


@dataclass(frozen=True)
class GridMap:
    """4-connected grid graph, optionally with some directed edges removed."""

    width: int
    height: int
    free: tuple[bool, ...]
    blocked: frozenset[Edge] = frozenset()
    _out: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    _in: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise MapFormatError("empty map")
        if len(self.free) != self.width * self.height:
            raise MapFormatError("cell count does not match dimensions")
        out: list[list[int]] = [[] for _ in self.free]
        inc: list[list[int]] = [[] for _ in self.free]
        for u, (x, y) in enumerate(self._coords()):
            if not self.free[u]:
                continue
            for dx, dy, _ in _STEPS:
                nx, ny = x + dx, y + dy
                if 0 <= nx < self.width and 0 <= ny < self.height:
                    v = ny * self.width + nx
                    if self.free[v] and (u, v) not in self.blocked:
                        out[u].append(v)
                        inc[v].append(u)
        for u, v in self.blocked:
            if not (self.free[u] and self.free[v]) or v not in self.undirected_neighbors(u):
                raise HighwayError(f"blocked edge {(u, v)} is not an edge of the grid")
        object.__setattr__(self, "_out", tuple(map(tuple, out)))
        object.__setattr__(self, "_in", tuple(map(tuple, inc)))

    def _coords(self):
        for y in range(self.height):
            for x in range(self.width):
                yield x, y

    @property
    def size(self) -> int:
        return self.width * self.height

    def loc(self, x: int, y: int) -> int:
        return y * self.width + x

    def xy(self, loc: int) -> tuple[int, int]:
        return loc % self.width, loc // self.width

    def is_free(self, loc: int) -> bool:
        return 0 <= loc < self.size and self.free[loc]

    def free_cells(self) -> list[int]:
        return [i for i, f in enumerate(self.free) if f]

    def neighbors(self, loc: int) -> tuple[int, ...]:
        """Cells reachable from ``loc`` in one move."""
        return self._out[loc]

    def predecessors(self, loc: int) -> tuple[int, ...]:
        """Cells from which ``loc`` is reachable in one move."""
        return self._in[loc]

    def undirected_neighbors(self, loc: int) -> list[int]:
        if not self.free[loc]:
            return []
        x, y = self.xy(loc)
        res = []
        for dx, dy, _ in _STEPS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < self.width and 0 <= ny < self.height and self.free[ny * self.width + nx]:
                res.append(ny * self.width + nx)
        return res

    def degree(self, loc: int) -> int:
        return len(self.undirected_neighbors(loc))

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._out[u]

    def edges(self) -> list[Edge]:
        """All directed edges of the (possibly restricted) graph."""
        return [(u, v) for u in range(self.size) for v in self._out[u]]

    def undirected_edge_count(self) -> int:
        return sum(1 for u in range(self.size) for v in self.undirected_neighbors(u) if u < v)

    def obstacle_ratio(self) -> float:
        return 1.0 - sum(self.free) / self.size

    def with_blocked(self, blocked: Iterable[Edge]) -> "GridMap":
        return GridMap(self.width, self.height, self.free, frozenset(blocked))

    def unrestricted(self) -> "GridMap":
        return self if not self.blocked else GridMap(self.width, self.height, self.free)

    def reachable_from(self, src: int) -> set[int]:
        seen = {src}
        stack = [src]
        while stack:
            u = stack.pop()
            for v in self._out[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    def is_strongly_connected(self) -> bool:
        cells = self.free_cells()
        if not cells:
            return True
        root = cells[0]
        if len(self.reachable_from(root)) != len(cells):
            return False
        seen = {root}
        stack = [root]
        while stack:
            u = stack.pop()
            for v in self._in[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(cells)


def parse_map(text: str) -> GridMap:
    """Parse an octile benchmark map (``type``/``height``/``width``/``map`` header)."""
    lines = [ln.rstrip("\r") for ln in text.strip("\n").split("\n")]
    if len(lines) < 4:
        raise MapFormatError("empty map")
    header: dict[str, str] = {}
    i = 0
    while i < len(lines) and lines[i].strip() != "map":
        parts = lines[i].split()
        if len(parts) != 2:
            raise MapFormatError(f"bad header line: {lines[i]!r}")
        header[parts[0]] = parts[1]
        i += 1
    if i == len(lines):
        raise MapFormatError("missing 'map' line")
    try:
        height = int(header["height"])
        width = int(header["width"])
    except (KeyError, ValueError) as exc:
        raise MapFormatError("header must declare integer height and width") from exc
    body = [ln.strip() for ln in lines[i + 1:] if ln.strip()]
    if height < 1 or width < 1 or not body:
        raise MapFormatError("empty map")
    if len(body) != height or any(len(row) != width for row in body):
        raise MapFormatError(
            f"declared {width}x{height} but body is "
            f"{max(len(r) for r in body)}x{len(body)}"
        )
    free = []
    for row in body:
        for ch in row:
            if ch in FREE_CHARS:
                free.append(True)
            elif ch in OBSTACLE_CHARS:
                free.append(False)
            else:
                raise MapFormatError(f"unknown cell character {ch!r}")
    return GridMap(width, height, tuple(free))


def format_map(grid: GridMap) -> str:
    rows = [
        "".join("." if grid.free[grid.loc(x, y)] else "@" for x in range(grid.width))
        for y in range(grid.height)
    ]
    return "type octile\nheight {}\nwidth {}\nmap\n{}\n".format(grid.height, grid.width, "\n".join(rows))


def from_rows(rows: Sequence[str]) -> GridMap:
    """Build a map from body rows only (handy in tests)."""
    return parse_map("type octile\nheight {}\nwidth {}\nmap\n{}".format(len(rows), len(rows[0]), "\n".join(rows)))


def generate_warehouse(n: int) -> GridMap:
    """n x n blocks of 10x2 pods with single-cell corridors between and around them."""
    if not isinstance(n, int) or n < 1 or n % 2 == 0:
        raise ValueError(f"block count must be an odd integer >= 1, got {n!r}")
    width, height = 11 * n + 1, 3 * n + 1
    free = [True] * (width * height)
    for by in range(n):
        for bx in range(n):
            for y in range(1 + 3 * by, 3 + 3 * by):
                for x in range(1 + 11 * bx, 11 + 11 * bx):
                    free[y * width + x] = False
    return GridMap(width, height, tuple(free))


@dataclass(frozen=True)
class Corridor:
    """Maximal chain of degree-2 cells.

    ``ends`` holds the bounding non-corridor cells at the start and end of the
    chain (``None`` for loops). ``forward`` travels from ``ends[0]`` towards
    ``ends[1]`` (for loops: in ``cells`` order).
    """

    cells: tuple[int, ...]
    is_loop: bool
    ends: tuple[int, int] | None = None
    forward: bool = True

    def chain_edges(self) -> list[Edge]:
        """Directed edges of the corridor in forward orientation."""
        if self.is_loop:
            seq = list(self.cells) + [self.cells[0]]
        else:
            seq = [self.ends[0], *self.cells, self.ends[1]]
        return list(zip(seq, seq[1:]))

    def with_edges(self) -> list[Edge]:
        edges = self.chain_edges()
        return edges if self.forward else [(v, u) for u, v in edges]

    def oriented(self, forward: bool) -> "Corridor":
        return Corridor(self.cells, self.is_loop, self.ends, forward)


def extract_corridors(grid: GridMap) -> list[Corridor]:
    if grid.blocked:
        raise HighwayError("corridors must be extracted from an unrestricted map")
    is_corr = [grid.free[u] and grid.degree(u) == 2 for u in range(grid.size)]
    seen = [False] * grid.size
    corridors = []
    for u in range(grid.size):
        if not is_corr[u] or seen[u]:
            continue
        comp = _component(grid, u, is_corr)
        for c in comp:
            seen[c] = True
        corridors.append(_order(grid, comp, is_corr))
    return corridors


def _component(grid, start, is_corr):
    comp = {start}
    stack = [start]
    while stack:
        c = stack.pop()
        for v in grid.undirected_neighbors(c):
            if is_corr[v] and v not in comp:
                comp.add(v)
                stack.append(v)
    return comp


def _order(grid, comp, is_corr):
    inner = {c: [v for v in grid.undirected_neighbors(c) if is_corr[v]] for c in comp}
    endpoints = sorted(c for c in comp if len(inner[c]) < 2)
    if not endpoints:
        first = min(comp)
        seq = [first]
        prev, cur = first, min(inner[first])
        while cur != first:
            seq.append(cur)
            prev, cur = cur, next(v for v in inner[cur] if v != prev)
        return Corridor(tuple(seq), True)
    first = endpoints[0]
    seq = [first]
    prev, cur = None, (inner[first][0] if inner[first] else None)
    while cur is not None:
        seq.append(cur)
        nxt = [v for v in inner[cur] if v != seq[-2]]
        prev, cur = cur, (nxt[0] if nxt else None)
    outer_first = [v for v in grid.undirected_neighbors(seq[0]) if not is_corr[v]]
    outer_last = [v for v in grid.undirected_neighbors(seq[-1]) if not is_corr[v]]
    if len(seq) == 1:
        a, b = sorted(outer_first)
    else:
        a, b = outer_first[0], outer_last[0]
    return Corridor(tuple(seq), False, (a, b))


@dataclass(frozen=True)
class Highway:
    corridors: tuple[Corridor, ...]
    with_edges: frozenset[Edge]
    against_edges: frozenset[Edge]

    @classmethod
    def from_corridors(cls, corridors: Iterable[Corridor]) -> "Highway":
        corridors = tuple(corridors)
        with_edges = frozenset(e for c in corridors for e in c.with_edges())
        return cls(corridors, with_edges, frozenset((v, u) for u, v in with_edges))

    @property
    def cells(self) -> frozenset[int]:
        return frozenset(c for cor in self.corridors for c in cor.cells)

    @property
    def directions(self) -> tuple[bool, ...]:
        return tuple(c.forward for c in self.corridors)

    def is_against(self, u: int, v: int) -> bool:
        return (u, v) in self.against_edges


def _alternating_votes(grid: GridMap, corridor: Corridor) -> int:
    # >0 means forward agrees with the parity rule
    votes = 0
    for u, v in corridor.chain_edges():
        (ux, uy), (vx, vy) = grid.xy(u), grid.xy(v)
        if uy == vy:
            want = 1 if uy % 2 == 0 else -1
            votes += 1 if (vx - ux) == want else -1
        else:
            want = -1 if ux % 2 == 0 else 1
            votes += 1 if (vy - uy) == want else -1
    return votes


def assign_highway(
    grid: GridMap,
    scheme: str | Sequence = "alternating",
    require_strongly_connected: bool = False,
) -> Highway:
    """Give every corridor a travel direction.

    ``scheme="alternating"`` sends even rows rightward, odd rows leftward, even
    columns upward and odd columns downward; on warehouse maps this produces
    a clockwise perimeter with counterflowing inner aisles. A sequence gives
    one direction per corridor (``True``/``"forward"`` or ``False``/``"reverse"``).
    """
    corridors = extract_corridors(grid)
    if isinstance(scheme, str):
        if scheme != "alternating":
            raise ValueError(f"unknown direction scheme {scheme!r}")
        dirs = [_alternating_votes(grid, c) >= 0 for c in corridors]
    else:
        if len(scheme) != len(corridors):
            raise HighwayError(f"{len(scheme)} directions given for {len(corridors)} corridors")
        dirs = [_parse_direction(d) for d in scheme]
    hw = Highway.from_corridors(c.oriented(d) for c, d in zip(corridors, dirs))
    if require_strongly_connected and not grid.with_blocked(hw.against_edges).is_strongly_connected():
        raise HighwayError("strict graph of this highway is not strongly connected")
    return hw


def _parse_direction(d) -> bool:
    if isinstance(d, bool):
        return d
    if d in ("forward", "f", "+", 1):
        return True
    if d in ("reverse", "r", "-", 0):
        return False
    raise HighwayError(f"bad corridor direction {d!r}")


def strict_subgraph(grid: GridMap, hw: Highway) -> GridMap:
    """Copy of ``grid`` with every against-direction edge removed."""
    base = grid.unrestricted()
    if {c for cor in extract_corridors(base) for c in cor.cells} != set(hw.cells):
        raise HighwayError("highway was not derived from this map")
    strict = grid.with_blocked(grid.blocked | hw.against_edges)
    if not strict.is_strongly_connected():
        warnings.warn("strict graph is not strongly connected; some cells cannot reach others", stacklevel=2)
    return strict


def format_highway(grid: GridMap, hw: Highway) -> str:
    """Render the overlay: one arrow per corridor cell, '.' elsewhere."""
    chars = ["."] * grid.size
    for u, v in hw.with_edges:
        if u in hw.cells:
            (ux, uy), (vx, vy) = grid.xy(u), grid.xy(v)
            chars[u] = _ARROWS[(vx - ux, vy - uy)]
    rows = ("".join(chars[y * grid.width:(y + 1) * grid.width]) for y in range(grid.height))
    return "\n".join(rows) + "\n"


def parse_highway(text: str, grid: GridMap) -> Highway:
    rows = [r.strip() for r in text.strip("\n").split("\n") if r.strip()]
    if len(rows) != grid.height or any(len(r) != grid.width for r in rows):
        raise MapFormatError("highway overlay dimensions do not match the map")
    chars = "".join(rows)
    bad = set(chars) - set(".<>^v")
    if bad:
        raise MapFormatError(f"unknown overlay characters {sorted(bad)}")
    corridors = extract_corridors(grid)
    marked = {i for i, ch in enumerate(chars) if ch != "."}
    if marked != {c for cor in corridors for c in cor.cells}:
        raise HighwayError("overlay arrows do not match the map's corridor cells")
    oriented = []
    for cor in corridors:
        for forward in (True, False):
            cand = cor.oriented(forward)
            if format_highway(grid, Highway.from_corridors([cand])).replace("\n", "") == _only(chars, cor.cells):
                oriented.append(cand)
                break
        else:
            raise HighwayError(f"inconsistent arrows along corridor starting at {grid.xy(cor.cells[0])}")
    return Highway.from_corridors(oriented)


def _only(chars: str, cells: Iterable[int]) -> str:
    keep = set(cells)
    return "".join(ch if i in keep else "." for i, ch in enumerate(chars))
