"""Graph windows, finite-region calculus and the level-by-level tessellation.

A :class:`GraphWindow` wraps a (possibly infinite) locally finite graph
given by a neighbor oracle and materializes the ball of a fixed radius
around a root.  Every set-valued operation that needs the neighborhood of
a vertex first checks that the vertex is *complete*, i.e. that all of its
neighbors lie inside the window; otherwise it raises
:class:`WindowTruncationError` instead of silently returning a truncated
answer.

Vertices carry a canonical total order: breadth-first layer from the root,
ties broken by the natural order of the labels.  The operator code indexes
tensor factors by this order (see :meth:`GraphWindow.index`).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

Vertex = Hashable
Region = frozenset


class WindowError(ValueError):
    """Base class for errors raised by window-bound graph operations."""


class VertexOutsideWindow(WindowError):
    pass


class WindowTruncationError(WindowError):
    """The requested set reaches the window edge, so it cannot be certified."""

    def __init__(self, message, vertices=()):
        super().__init__(message)
        self.vertices = tuple(vertices)


# --------------------------------------------------------------------------
# neighbor oracles


def lattice_oracle(dim: int) -> Callable[[tuple], list]:
    def neighbors(v):
        out = []
        for axis in range(dim):
            for step in (-1, 1):
                w = list(v)
                w[axis] += step
                out.append(tuple(w))
        return sorted(out)

    return neighbors


def tree_oracle(degree: int, root: str = "r") -> Callable[[str], list]:
    """Regular tree with path-string labels ``r``, ``r.0``, ``r.0.1``, ..."""
    if degree < 1:
        raise ValueError("tree degree must be >= 1")

    def neighbors(v):
        if v == root:
            return [f"{root}.{i}" for i in range(degree)]
        if not v.startswith(root + "."):
            raise VertexOutsideWindow(f"{v!r} is not a vertex of the tree")
        parent = v.rsplit(".", 1)[0]
        return sorted([parent] + [f"{v}.{i}" for i in range(degree - 1)])

    return neighbors


def explicit_oracle(edges: Iterable[Sequence]) -> Callable[[Vertex], list]:
    adjacency: dict = {}
    for edge in edges:
        if len(edge) != 2:
            raise ValueError(f"malformed edge {edge!r}")
        a, b = edge
        if a == b:
            raise ValueError(f"self-loop at {a!r}")
        adjacency.setdefault(a, set()).add(b)
        adjacency.setdefault(b, set()).add(a)

    def neighbors(v):
        try:
            return sorted(adjacency[v])
        except KeyError:
            raise VertexOutsideWindow(f"{v!r} is not a vertex of the graph") from None

    neighbors.vertices = frozenset(adjacency)  # type: ignore[attr-defined]
    return neighbors


# --------------------------------------------------------------------------
# the window


class GraphWindow:
    """Finite window of a locally finite graph around ``root``.

    Parameters
    ----------
    kind : str
        ``"lattice"``, ``"tree"`` or ``"explicit"``; used for label codecs.
    neighbor_oracle : callable
        Maps a vertex to the list of its neighbors in the full graph.
    root : vertex
    radius : int or None
        Breadth-first depth of the window.  ``None`` materializes the whole
        connected component of the root, which must then be finite.
    """

    def __init__(self, kind: str, neighbor_oracle, root, radius: int | None = None,
                 spec: Mapping | None = None, max_vertices: int = 200_000):
        self.kind = kind
        self.root = root
        self.radius = radius
        self.spec = dict(spec) if spec is not None else {"type": kind}
        self._oracle = neighbor_oracle

        depth = {root: 0}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            if radius is not None and depth[v] >= radius:
                continue
            for w in neighbor_oracle(v):
                if w not in depth:
                    depth[w] = depth[v] + 1
                    if len(depth) > max_vertices:
                        raise WindowError("window exceeds max_vertices; give a finite radius")
                    queue.append(w)
        self.depth = depth
        self.vertices = tuple(sorted(depth, key=lambda v: (depth[v], v)))
        self._index = {v: i for i, v in enumerate(self.vertices)}

        self._nbrs = {}
        self._complete = set()
        for v in self.vertices:
            full = neighbor_oracle(v)
            if v in full:
                raise ValueError(f"self-loop at {v!r}")
            inside = [w for w in full if w in self._index]
            self._nbrs[v] = tuple(sorted(inside, key=self._index.__getitem__))
            if len(inside) == len(full):
                self._complete.add(v)
        for v, ns in self._nbrs.items():
            for w in ns:
                if v not in self._nbrs[w]:
                    raise ValueError(f"neighbor oracle is not symmetric at ({v!r}, {w!r})")

    # -- constructors -----------------------------------------------------

    @classmethod
    def lattice(cls, dim: int, radius: int, root=None):
        root = tuple([0] * dim) if root is None else tuple(root)
        return cls("lattice", lattice_oracle(dim), root, radius,
                   spec={"type": "lattice", "dim": dim})

    @classmethod
    def tree(cls, degree: int, radius: int):
        return cls("tree", tree_oracle(degree), "r", radius,
                   spec={"type": "tree", "degree": degree})

    @classmethod
    def explicit(cls, edges, root, radius: int | None = None):
        edges = [tuple(e) for e in edges]
        return cls("explicit", explicit_oracle(edges), root, radius,
                   spec={"type": "explicit", "edges": [list(e) for e in edges]})

    @classmethod
    def from_spec(cls, spec: Mapping, root=None, radius: int | None = None):
        """Build a window from the JSON graph description."""
        kind = spec.get("type")
        if kind == "lattice":
            dim = int(spec.get("dim", 1))
            r = None if root is None else decode_label("lattice", root)
            return cls.lattice(dim, radius if radius is not None else 6, root=r)
        if kind == "tree":
            return cls.tree(int(spec.get("degree", 3)), radius if radius is not None else 4)
        if kind == "explicit":
            edges = spec.get("edges")
            if not edges:
                raise ValueError("explicit graph needs a non-empty 'edges' list")
            if root is None:
                root = sorted({v for e in edges for v in e})[0]
            return cls.explicit(edges, root, radius)
        raise ValueError(f"unknown graph type {kind!r}")

    # -- basic queries ----------------------------------------------------

    def __contains__(self, v) -> bool:
        return v in self._index

    def __len__(self) -> int:
        return len(self.vertices)

    def normalize(self, v):
        """Canonical label: lattice vertices may be given as ints or lists."""
        if self.kind == "lattice" and not isinstance(v, tuple):
            try:
                return decode_label("lattice", v)
            except (TypeError, ValueError):
                return v
        return v

    def index(self, v) -> int:
        """Position of ``v`` in the canonical order."""
        try:
            return self._index[v]
        except (KeyError, TypeError):
            pass
        try:
            return self._index[self.normalize(v)]
        except (KeyError, TypeError):
            raise VertexOutsideWindow(f"vertex {v!r} is outside the window") from None

    def label(self, i: int):
        return self.vertices[i]

    def sort(self, vertices: Iterable) -> tuple:
        return tuple(sorted(vertices, key=self.index))

    def neighbors(self, v) -> tuple:
        """Neighbors of ``v`` inside the window, in canonical order."""
        return self._nbrs[self.vertices[self.index(v)]]

    def is_complete(self, v) -> bool:
        """True when every neighbor of ``v`` in the full graph is in the window."""
        return self.normalize(v) in self._complete

    @property
    def complete_vertices(self) -> frozenset:
        return frozenset(self._complete)

    def require_complete(self, vertices: Iterable, what: str = "region"):
        bad = [v for v in vertices if v not in self._complete]
        if bad:
            for v in bad:
                self.index(v)
            bad = self.sort(bad)
            raise WindowTruncationError(
                f"{what} touches the window edge at {bad[0]!r}", bad)

    def adjacent(self, v, w) -> bool:
        return w in self._nbrs.get(v, ())

    def region(self, vertices: Iterable) -> Region:
        vs = frozenset(self.normalize(v) for v in vertices)
        for v in vs:
            self.index(v)
        return vs

    def ball(self, center, radius: int) -> Region:
        """Vertices at graph distance <= radius from ``center`` (window-certified)."""
        seen = {center: 0}
        queue = deque([center])
        while queue:
            v = queue.popleft()
            if seen[v] == radius:
                continue
            self.require_complete([v], "ball")
            for w in self._nbrs[v]:
                if w not in seen:
                    seen[w] = seen[v] + 1
                    queue.append(w)
        return frozenset(seen)

    # -- label codec for JSON ----------------------------------------------

    def encode(self, v):
        return list(v) if self.kind == "lattice" else v

    def decode(self, obj):
        v = decode_label(self.kind, obj)
        self.index(v)
        return v

    def key(self, v) -> str:
        """String form of a label, used for JSON object keys."""
        return ",".join(str(c) for c in v) if self.kind == "lattice" else str(v)


def decode_label(kind: str, obj):
    if kind == "lattice":
        if isinstance(obj, str):
            return tuple(int(c) for c in obj.strip("()[] ").split(",") if c.strip())
        if isinstance(obj, int):
            return (obj,)
        return tuple(int(c) for c in obj)
    return obj


# --------------------------------------------------------------------------
# region calculus


@dataclass(frozen=True)
class RegionParts:
    boundary: Region
    interior: Region
    external_boundary: Region
    closure: Region
    complement: Region  # relative to the window


def external_boundary(window: GraphWindow, region: Iterable) -> Region:
    region = window.region(region)
    window.require_complete(region)
    return frozenset(w for v in region for w in window.neighbors(v) if w not in region)


def closure(window: GraphWindow, region: Iterable) -> Region:
    region = window.region(region)
    return region | external_boundary(window, region)


def boundary(window: GraphWindow, region: Iterable) -> Region:
    region = window.region(region)
    window.require_complete(region)
    return frozenset(v for v in region
                     if any(w not in region for w in window.neighbors(v)))


def region_parts(window: GraphWindow, region: Iterable) -> RegionParts:
    region = window.region(region)
    bd = boundary(window, region)
    ext = external_boundary(window, region)
    return RegionParts(
        boundary=bd,
        interior=region - bd,
        external_boundary=ext,
        closure=region | ext,
        complement=frozenset(window.vertices) - region,
    )


def compactly_inside(window: GraphWindow, inner: Iterable, outer: Iterable) -> bool:
    """``inner ⊂⊂ outer``, taken to mean closure(inner) ⊆ outer."""
    return closure(window, inner) <= window.region(outer)


# --------------------------------------------------------------------------
# tessellation


@dataclass(frozen=True)
class Diagnostic:
    ok: bool
    witness: tuple | None = None
    detail: str = ""


@dataclass(frozen=True)
class Level:
    centers: Region  # V_{0,n}
    sites: Region    # V_n


@dataclass
class Tessellation:
    window: GraphWindow
    root: Vertex
    levels: list
    v0: Region                    # V_0 ∩ certified part of the window
    certified: Region             # closure of the last level; V_0 membership is decided here
    plaquettes: dict              # y -> {y} ∪ N_y for complete y in v0
    repair: str = "off"
    dropped: list = field(default_factory=list)  # greedy repair: vertices left out per level
    diagnostics: dict = field(default_factory=dict)

    @property
    def independence_ok(self) -> bool:
        return self.diagnostics["independence"].ok

    def in_v0(self, v) -> bool:
        if v not in self.certified:
            self.window.index(v)
            raise WindowTruncationError(
                f"membership of {v!r} in V0 is not decided inside the window", [v])
        return v in self.v0

    def centers_in(self, region: Iterable) -> tuple:
        """``region ∩ V0`` in canonical order."""
        return self.window.sort(v for v in region if self.in_v0(v))

    def plaquette(self, y) -> Region:
        try:
            return self.plaquettes[y]
        except KeyError:
            if y in self.v0:
                raise WindowTruncationError(f"plaquette at {y!r} is cut by the window", [y]) from None
            raise ValueError(f"{y!r} is not a tessellation center") from None

    def to_dict(self) -> dict:
        w = self.window
        enc = lambda vs: [w.encode(v) for v in w.sort(vs)]
        return {
            "graph": w.spec,
            "root": w.encode(self.root),
            "window_radius": w.radius,
            "repair": self.repair,
            "levels": [{"n": n, "V0n": enc(lv.centers), "Vn": enc(lv.sites)}
                       for n, lv in enumerate(self.levels, start=1)],
            "V0": enc(self.v0),
            "dropped": [enc(d) for d in self.dropped],
            "diagnostics": {
                name: {"ok": d.ok,
                       "witness": None if d.witness is None else _encode_witness(w, d.witness),
                       "detail": d.detail}
                for name, d in self.diagnostics.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _encode_witness(window, witness):
    out = []
    for item in witness:
        out.append(window.encode(item) if item in window else item)
    return out


def build_tessellation(window: GraphWindow, root=None, max_level: int | None = None,
                       repair: str = "off") -> Tessellation:
    """Run the level induction from ``root`` as far as the window allows.

    Level ``n`` is kept only when ``V_n`` consists of complete vertices, so
    every stored level, and the next center set ``V_{0,n+1}``, is exact.
    With ``repair="greedy"`` each new center set takes a greedy maximal
    independent subset of the external boundary (canonical order).
    """
    if repair not in ("off", "greedy", "greedy-independent"):
        raise ValueError(f"unknown repair mode {repair!r}")
    repair = "greedy" if repair.startswith("greedy") else "off"
    root = window.root if root is None else root
    window.index(root)
    if max_level is not None and max_level < 1:
        raise ValueError("max_level must be >= 1")

    centers = frozenset([root])
    levels: list = []
    dropped: list = []
    certified = frozenset()
    while max_level is None or len(levels) < max_level:
        if any(not window.is_complete(y) for y in centers):
            break
        sites = frozenset(centers).union(*(window.neighbors(y) for y in centers))
        if any(not window.is_complete(v) for v in sites):
            break
        levels.append(Level(centers, sites))
        ext = frozenset(w for v in sites for w in window.neighbors(v) if w not in sites)
        certified = sites | ext
        if repair == "greedy":
            chosen: list = []
            for w in window.sort(ext):
                if not any(window.adjacent(w, c) for c in chosen):
                    chosen.append(w)
            dropped.append(ext - frozenset(chosen))
            ext = frozenset(chosen)
        centers = centers | ext
        if not ext:
            break

    if not levels:
        raise WindowTruncationError("window too small for a single tessellation level", [root])

    v0 = centers
    plaquettes = {y: frozenset((y,) + window.neighbors(y))
                  for y in window.sort(v0) if window.is_complete(y)}
    t = Tessellation(window, root, levels, v0, certified, plaquettes, repair, dropped)
    t.diagnostics = check_tessellation(t, window)
    return t


def check_tessellation(t: Tessellation, window: GraphWindow) -> dict:
    """Four diagnostics with witnesses; never raises."""
    diag = {}

    # (a) inner boundaries carry no center
    bad = None
    for n, lv in enumerate(t.levels, start=1):
        hit = window.sort(boundary(window, lv.sites) & t.v0)
        if hit:
            bad = (n, hit[0])
            break
    diag["inner_boundary"] = Diagnostic(bad is None, bad,
                                        "" if bad is None else f"center on the boundary of V_{bad[0]}")

    # (b) centers pairwise non-adjacent (no center lies in another's plaquette)
    bad = None
    for y in window.sort(t.v0):
        for z in window.neighbors(y):
            if z in t.v0 and window.index(z) > window.index(y):
                bad = (y, z)
                break
        if bad:
            break
    diag["independence"] = Diagnostic(bad is None, bad,
                                      "" if bad is None else "adjacent tessellation centers")

    # (c) every complete window vertex sits in some plaquette
    bad = None
    for v in window.vertices:
        if not window.is_complete(v):
            continue
        if v in t.v0 or any(w in t.v0 for w in window.neighbors(v)):
            continue
        bad = (v,)
        break
    diag["coverage"] = Diagnostic(bad is None, bad,
                                  "" if bad is None else "vertex outside every plaquette")

    # (d) growth between consecutive computed levels
    bad = None
    for n in range(1, len(t.levels)):
        a, b = t.levels[n - 1], t.levels[n]
        if len(b.sites) < len(a.sites) + 2 or len(b.centers) < len(a.centers) + 1:
            bad = (n, n + 1)
            break
    diag["growth"] = Diagnostic(bad is None, bad,
                                "" if bad is None else "level sizes did not grow")
    return diag


def dext0(t: Tessellation, region: Iterable) -> Region:
    """Union of ``N_y`` over centers ``y`` on the boundary of ``region``."""
    w = t.window
    region = w.region(region)
    bd = boundary(w, region)
    out: set = set()
    for y in bd:
        if t.in_v0(y):
            out.update(w.neighbors(y))
    return frozenset(out)


def amplitude_support(t: Tessellation, region: Iterable) -> Region:
    """``region ∪ dext0(region)``, the support of the region amplitude."""
    region = frozenset(region)
    return region | dext0(t, region)
