"""Heavy-hexagon geometries, 1D snake orderings, gate-layer scheduling and lightcones.

Sites are integers ``0..site_count-1``. Every geometry carries the 1D ordering used
by the tensor-train engines (``snake``), an edge 3-colouring (``edge_groups``) that
defines the three commuting sub-layers of the non-commuting circuit variant, and the
default number of 1D gate layers used to compile one round.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

Edge = tuple[int, int]


class GeometryError(ValueError):
    """Raised for malformed or unsupported geometries."""


@dataclass(frozen=True)
class Lattice:
    """Undirected qubit graph with heavy-hex bookkeeping.

    ``edges`` are stored sorted as ``(min, max)`` pairs. ``snake`` is the site visited
    at each 1D position. ``edge_groups`` assigns each edge (same index as ``edges``) to
    one of three matchings. ``default_layers`` is the 1D layer count used by
    :func:`layer_bonds` when none is requested.
    """

    name: str
    site_count: int
    edges: tuple[Edge, ...]
    coordinates: tuple[tuple[float, float], ...] = ()
    labels: dict[str, int] = field(default_factory=dict, compare=False, hash=False)
    snake: tuple[int, ...] | None = None
    edge_groups: tuple[int, ...] | None = None
    default_layers: int | None = None

    def __post_init__(self) -> None:
        edges = tuple(tuple(sorted(e)) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(set(edges)) != len(edges):
            raise GeometryError(f"{self.name}: duplicate edges")
        for a, b in edges:
            if a == b:
                raise GeometryError(f"{self.name}: self-loop on site {a}")
            if not (0 <= a < self.site_count and 0 <= b < self.site_count):
                raise GeometryError(f"{self.name}: edge {(a, b)} out of range")
        if self.edge_groups is not None and len(self.edge_groups) != len(edges):
            raise GeometryError(f"{self.name}: edge_groups length mismatch")

    def neighbors(self, site: int) -> list[int]:
        return sorted(b if a == site else a for a, b in self.edges if site in (a, b))

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.site_count)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return [sorted(n) for n in adj]

    def degree(self, site: int) -> int:
        return len(self.neighbors(site))

    def degrees(self) -> list[int]:
        return [len(n) for n in self.adjacency()]

    def is_connected(self) -> bool:
        if self.site_count == 0:
            return True
        return len(graph_ball(self.adjacency(), {0}, self.site_count)) == self.site_count

    def has_edge(self, a: int, b: int) -> bool:
        return tuple(sorted((a, b))) in set(self.edges)

    def groups(self) -> tuple[int, ...]:
        """Edge 3-colouring, computed on demand for geometries that do not ship one."""
        if self.edge_groups is not None:
            return self.edge_groups
        return tuple(edge_coloring(self))

    def label(self, name: str) -> int:
        try:
            return self.labels[name]
        except KeyError:
            raise GeometryError(f"{self.name}: no site labelled {name!r}") from None


@dataclass(frozen=True)
class SnakeOrder:
    """Bijection between sites and 1D positions."""

    position: tuple[int, ...]  # site -> 1D index
    site: tuple[int, ...]  # 1D index -> site

    @classmethod
    def from_sites(cls, sites: Sequence[int]) -> SnakeOrder:
        n = len(sites)
        if sorted(sites) != list(range(n)):
            raise GeometryError("snake order is not a permutation of the sites")
        pos = [0] * n
        for p, s in enumerate(sites):
            pos[s] = p
        return cls(position=tuple(pos), site=tuple(sites))

    def __len__(self) -> int:
        return len(self.site)

    def span(self, edge: Edge) -> tuple[int, int]:
        p, q = self.position[edge[0]], self.position[edge[1]]
        return (p, q) if p < q else (q, p)


@dataclass(frozen=True)
class GateLayer:
    """Bonds acting together in one compiled 1D layer, with their 1D spans."""

    bonds: tuple[Edge, ...]
    spans: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        ordered = sorted(self.spans)
        for (l0, r0), (l1, r1) in zip(ordered, ordered[1:]):
            if l1 <= r0:
                raise GeometryError(f"overlapping spans {(l0, r0)} and {(l1, r1)} in one layer")

    def __len__(self) -> int:
        return len(self.bonds)

    def restricted(self, keep: Iterable[Edge]) -> GateLayer:
        keep = set(keep)
        pairs = [(b, s) for b, s in zip(self.bonds, self.spans) if b in keep]
        return GateLayer(tuple(b for b, _ in pairs), tuple(s for _, s in pairs))


# ---------------------------------------------------------------------------
# geometry constructors


def _load_json_geometry(data: dict, name: str | None = None) -> Lattice:
    try:
        n = int(data["sites"])
        edges = tuple(tuple(int(x) for x in e) for e in data["edges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise GeometryError(f"geometry file missing or malformed field: {exc}") from exc
    coords = tuple(tuple(float(c) for c in xy) for xy in data.get("coordinates", []))
    snake = data.get("snake_order")
    groups = data.get("edge_groups")
    lat = Lattice(
        name=name or data.get("name", "file"),
        site_count=n,
        edges=edges,
        coordinates=coords,
        labels={k: int(v) for k, v in data.get("labels", {}).items()},
        snake=tuple(int(s) for s in snake) if snake is not None else None,
        edge_groups=tuple(int(g) for g in groups) if groups is not None else None,
        default_layers=data.get("layers"),
    )
    if lat.edge_groups is not None:
        # group indices refer to the edge list as written in the file
        order = sorted(range(len(edges)), key=lambda k: tuple(sorted(edges[k])))
        object.__setattr__(lat, "edge_groups", tuple(lat.edge_groups[k] for k in order))
        object.__setattr__(lat, "edges", tuple(sorted(lat.edges)))
    return lat


def build_eagle_127() -> Lattice:
    """127-qubit heavy-hex device graph, device-style row-major numbering.

    Site 62 is the central qubit. The snake order, coordinates and edge colouring are
    read from the shipped data file.
    """
    text = resources.files("hexmpo.data").joinpath("eagle127.json").read_text()
    return _load_json_geometry(json.loads(text), name="eagle127")


# Sub-graph of the Eagle device spanning its two top-left hexagons, relabelled.
_TWOHEX_FROM_EAGLE = [0, 1, 2, 3, 4, 5, 6, 7, 8, 14, 15, 16, 18, 19, 20, 21, 22, 23, 24, 25, 26]


def build_two_hexagon_21() -> Lattice:
    """Two 12-site heavy hexagons sharing the heavy edge ``4 - 10 - 16``.

    Labels: ``source`` (site 9, far-left heavy qubit) and ``detector`` (site 10, the
    heavy qubit of the shared edge) are antipodal on the left hexagon, which is the
    ring ``0 1 2 3 4 10 16 15 14 13 12 9``. ``flux_a`` and ``flux_b`` mark the
    left-hexagon bond ``0 - 1`` whose ZZ sign is flipped to thread pi flux.
    """
    eagle = build_eagle_127()
    relabel = {old: new for new, old in enumerate(_TWOHEX_FROM_EAGLE)}
    kept = [k for k, (a, b) in enumerate(eagle.edges) if a in relabel and b in relabel]
    edges = [tuple(sorted((relabel[eagle.edges[k][0]], relabel[eagle.edges[k][1]]))) for k in kept]
    groups = {e: eagle.groups()[k] for e, k in zip(edges, kept)}
    coords = tuple(eagle.coordinates[old] for old in _TWOHEX_FROM_EAGLE)
    snake = list(range(9)) + [11, 10, 9] + list(range(20, 11, -1))
    return Lattice(
        name="twohex21",
        site_count=21,
        edges=tuple(edges),
        coordinates=coords,
        labels={"source": 9, "detector": 10, "flux_a": 0, "flux_b": 1},
        snake=tuple(snake),
        edge_groups=tuple(groups[e] for e in edges),
    )


LEFT_HEXAGON_RING = (0, 1, 2, 3, 4, 10, 16, 15, 14, 13, 12, 9)


def build_single_hexagon_12() -> Lattice:
    """One heavy hexagon: a 12-site ring."""
    import math

    coords = tuple(
        (math.cos(2 * math.pi * k / 12), math.sin(2 * math.pi * k / 12)) for k in range(12)
    )
    return Lattice(
        name="hex12",
        site_count=12,
        edges=tuple((k, (k + 1) % 12) for k in range(12)),
        coordinates=coords,
        labels={"source": 0, "detector": 6},
        snake=tuple(range(12)),
        edge_groups=tuple(k % 2 for k in range(12)),
    )


def load_geometry(path: str | Path) -> Lattice:
    """Read a geometry JSON file (fields ``sites``, ``edges``, ``snake_order``, ``labels``)."""
    with open(path) as fh:
        return _load_json_geometry(json.load(fh))


def save_geometry(lat: Lattice, path: str | Path) -> None:
    data = {
        "name": lat.name,
        "sites": lat.site_count,
        "edges": [list(e) for e in lat.edges],
        "snake_order": list(lat.snake) if lat.snake is not None else None,
        "labels": dict(lat.labels),
        "coordinates": [list(c) for c in lat.coordinates],
    }
    if lat.edge_groups is not None:
        data["edge_groups"] = list(lat.edge_groups)
    if lat.default_layers is not None:
        data["layers"] = lat.default_layers
    with open(path, "w") as fh:
        json.dump(data, fh)


_NAMED = {
    "eagle127": build_eagle_127,
    "twohex21": build_two_hexagon_21,
    "hex12": build_single_hexagon_12,
}


def geometry(spec: str) -> Lattice:
    """Resolve a ``--geometry`` value: ``eagle127``, ``twohex21``, ``hex12`` or ``file:<path>``."""
    if spec.startswith("file:"):
        return load_geometry(spec[5:])
    try:
        return _NAMED[spec]()
    except KeyError:
        raise GeometryError(
            f"unknown geometry {spec!r}; expected one of {sorted(_NAMED)} or file:<path>"
        ) from None


# ---------------------------------------------------------------------------
# orderings, layers, colourings


def snake_order(lat: Lattice) -> SnakeOrder:
    if lat.snake is None:
        raise GeometryError(f"geometry {lat.name!r} has no snake ordering")
    if len(lat.snake) != lat.site_count:
        raise GeometryError(f"{lat.name}: snake order has wrong length")
    return SnakeOrder.from_sites(lat.snake)


def max_overlap(spans: Iterable[tuple[int, int]]) -> int:
    """Largest number of closed intervals sharing a point (the interval clique number)."""
    events = []
    for l, r in spans:
        events.append((l, 0))
        events.append((r, 1))
    best = cur = 0
    for _, kind in sorted(events):
        if kind == 0:
            cur += 1
            best = max(best, cur)
        else:
            cur -= 1
    return best


def layer_bonds(
    lat: Lattice,
    order: SnakeOrder,
    n_layers: int | None = None,
    bonds: Iterable[Edge] | None = None,
) -> list[GateLayer]:
    """Partition bonds into 1D layers whose spans are pairwise disjoint.

    Spans are processed by left endpoint (ties: shorter span, then lower site index) and
    each goes to the least-loaded layer it fits in. With ``n_layers`` at or above the
    interval clique number a fitting layer always exists. ``n_layers=None`` uses the
    geometry default when scheduling all bonds, else the clique number.
    """
    chosen = lat.edges if bonds is None else tuple(sorted(tuple(sorted(b)) for b in bonds))
    if not chosen:
        return []
    spans = {b: order.span(b) for b in chosen}
    omega = max_overlap(spans.values())
    if n_layers is None:
        n_layers = lat.default_layers if (bonds is None and lat.default_layers) else omega
    if n_layers < omega:
        raise GeometryError(f"{n_layers} layers cannot hold {omega} mutually overlapping spans")
    queue = sorted(chosen, key=lambda b: (spans[b][0], spans[b][1] - spans[b][0], b))
    layers: list[list[Edge]] = [[] for _ in range(n_layers)]
    ends = [-1] * n_layers  # rightmost covered position per layer
    for b in queue:
        left = spans[b][0]
        fits = [k for k in range(n_layers) if ends[k] < left]
        k = min(fits, key=lambda k: (len(layers[k]), k))
        layers[k].append(b)
        ends[k] = spans[b][1]
    return [
        GateLayer(tuple(layer), tuple(spans[b] for b in layer)) for layer in layers if layer
    ]


def edge_coloring(lat: Lattice, colors: int = 3) -> list[int]:
    """Proper edge colouring by backtracking (bipartite degree-3 graphs need 3 colours)."""
    edges = list(lat.edges)
    incident: dict[int, list[int]] = {}
    for k, (a, b) in enumerate(edges):
        incident.setdefault(a, []).append(k)
        incident.setdefault(b, []).append(k)
    # visit edges around high-degree sites first
    queue = sorted(range(len(edges)), key=lambda k: (-max(len(incident[v]) for v in edges[k]), k))
    color = [-1] * len(edges)

    def free(k: int, c: int) -> bool:
        return all(color[j] != c for v in edges[k] for j in incident[v])

    def place(i: int) -> bool:
        if i == len(queue):
            return True
        k = queue[i]
        for c in range(colors):
            if free(k, c):
                color[k] = c
                if place(i + 1):
                    return True
                color[k] = -1
        return False

    import sys

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * len(edges) + 100))
    try:
        if not place(0):
            raise GeometryError(f"{lat.name}: no proper {colors}-edge-colouring found")
    finally:
        sys.setrecursionlimit(limit)
    return color


# ---------------------------------------------------------------------------
# lightcones


def graph_ball(adj: Sequence[Sequence[int]], sources: Iterable[int], radius: int) -> set[int]:
    seen = set(sources)
    frontier = deque((s, 0) for s in seen)
    while frontier:
        v, d = frontier.popleft()
        if d == radius:
            continue
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                frontier.append((u, d + 1))
    return seen


def grow_along(edges: Iterable[Edge], support: set[int]) -> set[int]:
    """Support after one block of commuting two-site gates on ``edges``."""
    out = set(support)
    for a, b in edges:
        if a in support or b in support:
            out.add(a)
            out.add(b)
    return out


def lightcone(lat: Lattice, site: int, depth: int, mode: str = "standard") -> set[int]:
    """Sites causally connected to ``site`` after ``depth`` rounds.

    ``standard``: one graph step per round (the ZZ gates of a round commute).
    ``non_commuting``: each round grows along the three edge groups in turn, in the
    order the Heisenberg picture visits them (last group of the round first).
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if mode == "standard":
        return graph_ball(lat.adjacency(), {site}, depth)
    if mode != "non_commuting":
        raise ValueError(f"unknown lightcone mode {mode!r}")
    groups = lat.groups()
    by_group: dict[int, list[Edge]] = {}
    for e, g in zip(lat.edges, groups):
        by_group.setdefault(g, []).append(e)
    support = {site}
    for _ in range(depth):
        for g in sorted(by_group, reverse=True):
            support = grow_along(by_group[g], support)
    return support
