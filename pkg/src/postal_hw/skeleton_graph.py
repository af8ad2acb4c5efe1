"""Characteristic points and typed segments of a word skeleton.

Pixels are linked by mixed ("m-") adjacency: 4-neighbours always, diagonal
neighbours only when neither of the two pixels completing their 2x2 square is
set.  This prunes the redundant diagonal of every staircase step, so a
neighbour count of 1/3/4 means end/branch/cross even on a jagged trace.
"""
from __future__ import annotations

import enum
import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import MalformedSkeletonError

log = logging.getLogger(__name__)

_FOUR = ((-1, 0), (0, 1), (1, 0), (0, -1))
_DIAG = ((-1, 1), (1, 1), (1, -1), (-1, -1))


class PointKind(str, enum.Enum):
    END = "End"
    BRANCH = "Branch"
    CROSS = "Cross"
    # node planted on a closed loop that has no characteristic point
    ANCHOR = "Anchor"


class SegmentKind(enum.IntEnum):
    TYPE0 = 0   # lies on a cycle: contour of an occlusion
    TYPE1 = 1   # touches an end point
    TYPE2 = 2   # link between junctions, not on a cycle


@dataclass(frozen=True)
class CharPoint:
    id: int
    pos: tuple              # (x, y), centroid of the pixel cluster
    kind: PointKind
    pixels: tuple           # ((x, y), ...) housed by this node
    degree: int


@dataclass(frozen=True)
class Segment:
    id: int
    chain: np.ndarray       # (n, 2) int array of (x, y); first/last pixel belong to the end nodes
    ends: tuple             # (node id, node id)
    kind: SegmentKind | None = None

    @property
    def length(self):
        return float(np.sum(np.hypot(*np.diff(self.chain, axis=0).T))) if len(self.chain) > 1 else 0.0

    @property
    def interior(self):
        return self.chain[1:-1]

    @property
    def is_loop(self):
        return self.ends[0] == self.ends[1]


@dataclass
class SegmentGraph:
    nodes: list
    edges: list
    adjacency: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.adjacency:
            adj = defaultdict(list)
            for e in self.edges:
                adj[e.ends[0]].append(e.id)
                if e.ends[1] != e.ends[0]:
                    adj[e.ends[1]].append(e.id)
            self.adjacency = {n.id: list(adj.get(n.id, [])) for n in self.nodes}

    def node(self, nid):
        return self.nodes[nid]

    def edge(self, eid):
        return self.edges[eid]

    def degree(self, nid):
        return sum(2 if self.edges[e].is_loop else 1 for e in self.adjacency[nid])

    def components(self):
        """Node-id sets of the connected pieces of the graph."""
        seen, out = set(), []
        for n in self.nodes:
            if n.id in seen:
                continue
            comp, queue = set(), deque([n.id])
            seen.add(n.id)
            while queue:
                a = queue.popleft()
                comp.add(a)
                for eid in self.adjacency[a]:
                    for b in self.edges[eid].ends:
                        if b not in seen:
                            seen.add(b)
                            queue.append(b)
            out.append(comp)
        return out


def _pixel_set(sk):
    ys, xs = np.nonzero(np.asarray(sk, dtype=bool))
    return set(zip(xs.tolist(), ys.tolist()))


def m_neighbours(pixels, p):
    x, y = p
    out = []
    for dy, dx in _FOUR:
        q = (x + dx, y + dy)
        if q in pixels:
            out.append(q)
    for dy, dx in _DIAG:
        q = (x + dx, y + dy)
        if q in pixels and (x + dx, y) not in pixels and (x, y + dy) not in pixels:
            out.append(q)
    return out


def neighbour_counts(sk):
    """Pruned neighbour count of every skeleton pixel, keyed by (x, y)."""
    pixels = _pixel_set(sk)
    return {p: len(m_neighbours(pixels, p)) for p in pixels}


_KIND_BY_DEGREE = {0: PointKind.END, 1: PointKind.END, 3: PointKind.BRANCH, 4: PointKind.CROSS}


def classify_pixels(sk):
    """End/branch/cross points of a thin skeleton.

    Adjacent junction pixels are merged into a single node at their centroid;
    its degree is the number of links leaving the cluster.
    """
    pixels = _pixel_set(sk)
    degree = {p: len(m_neighbours(pixels, p)) for p in pixels}
    junction = {p for p, d in degree.items() if d >= 3}
    clusters = []
    seen = set()
    for p in sorted(junction, key=lambda q: (q[1], q[0])):
        if p in seen:
            continue
        comp, queue = [], deque([p])
        seen.add(p)
        while queue:
            a = queue.popleft()
            comp.append(a)
            for b in m_neighbours(pixels, a):
                if b in junction and b not in seen:
                    seen.add(b)
                    queue.append(b)
        clusters.append(sorted(comp, key=lambda q: (q[1], q[0])))
    for p in pixels:
        if degree[p] <= 1:
            clusters.append([p])

    points = []
    for comp in clusters:
        members = set(comp)
        links = sum(1 for a in comp for b in m_neighbours(pixels, a) if b not in members)
        kind = _KIND_BY_DEGREE.get(links, PointKind.CROSS if links > 4 else PointKind.ANCHOR)
        pos = (float(np.mean([q[0] for q in comp])), float(np.mean([q[1] for q in comp])))
        points.append((pos, kind, tuple(comp), links))
    # reading order: top to bottom, then right to left
    points.sort(key=lambda t: (t[0][1], -t[0][0]))
    return [CharPoint(i, pos, kind, comp, links) for i, (pos, kind, comp, links) in enumerate(points)]


def _signed_area(chain):
    x = chain[:, 0].astype(float)
    y = -chain[:, 1].astype(float)          # page orientation: y up
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def extract_segments(sk, pts, strict=True):
    """Walk every chain between characteristic points exactly once.

    A merged junction with more than four links raises in strict mode;
    otherwise it is kept as a high-degree cross with a warning.
    """
    pixels = _pixel_set(sk)
    for p in pts:
        if p.degree > 4:
            if strict:
                raise MalformedSkeletonError(
                    f"junction of degree {p.degree} at {p.pos}", location=p.pos)
            log.warning("junction of degree %d at (%.1f, %.1f) kept as a cross", p.degree, *p.pos)
    nodes = list(pts)
    owner = {q: n.id for n in nodes for q in n.pixels}
    used = set()
    visited = set()
    edges = []

    def walk(start, first):
        chain = [start, first]
        used.add(frozenset((start, first)))
        prev, cur = start, first
        while cur not in owner:
            visited.add(cur)
            nxt = [q for q in m_neighbours(pixels, cur) if q != prev]
            if len(nxt) != 1:
                raise MalformedSkeletonError(f"chain pixel {cur} is not a simple link", location=cur)
            prev, cur = cur, nxt[0]
            chain.append(cur)
        used.add(frozenset((prev, cur)))
        return chain

    for n in nodes:
        for p in n.pixels:
            for q in m_neighbours(pixels, p):
                if owner.get(q) == n.id or frozenset((p, q)) in used:
                    continue
                chain = walk(p, q)
                edges.append(Segment(len(edges), np.array(chain, dtype=int), (n.id, owner[chain[-1]])))

    # closed loops without any characteristic point
    loose = pixels - visited - set(owner)
    while loose:
        anchor = min(loose, key=lambda q: (q[1], -q[0]))
        nb = m_neighbours(pixels, anchor)
        chain = [anchor, nb[0]]
        prev, cur = anchor, nb[0]
        while cur != anchor:
            nxt = [q for q in m_neighbours(pixels, cur) if q != prev]
            if len(nxt) != 1:
                raise MalformedSkeletonError(f"loop pixel {cur} is not a simple link", location=cur)
            prev, cur = cur, nxt[0]
            chain.append(cur)
        chain = np.array(chain, dtype=int)
        if _signed_area(chain) < 0:
            chain = chain[::-1].copy()
        nid = len(nodes)
        nodes.append(CharPoint(nid, (float(anchor[0]), float(anchor[1])), PointKind.ANCHOR, (anchor,), 2))
        edges.append(Segment(len(edges), chain, (nid, nid)))
        loose -= {tuple(q) for q in chain.tolist()}
        owner[anchor] = nid

    return SegmentGraph(nodes, edges)


def _on_cycle(g, e):
    if e.is_loop:
        return True
    a, b = e.ends
    seen, queue = {a}, deque([a])
    while queue:
        u = queue.popleft()
        for eid in g.adjacency[u]:
            if eid == e.id:
                continue
            for v in g.edges[eid].ends:
                if v == b:
                    return True
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
    return False


def classify_segment_types(g):
    """Type1 if an end is an End point, else Type0 on a cycle, else Type2."""
    edges = []
    for e in g.edges:
        if any(g.nodes[n].kind == PointKind.END for n in e.ends):
            kind = SegmentKind.TYPE1
        elif _on_cycle(g, e):
            kind = SegmentKind.TYPE0
        else:
            kind = SegmentKind.TYPE2
        edges.append(replace(e, kind=kind))
    return SegmentGraph(g.nodes, edges, dict(g.adjacency))


def build_graph(sk, strict=True):
    """classify_pixels -> extract_segments -> classify_segment_types."""
    return classify_segment_types(extract_segments(sk, classify_pixels(sk), strict))


def dump_graph(g):
    lines = [f"N {n.id} {n.pos[0]:g} {n.pos[1]:g} {n.kind.value}" for n in g.nodes]
    for e in g.edges:
        kind = "-" if e.kind is None else str(int(e.kind))
        lines.append(f"E {e.id} {e.ends[0]} {e.ends[1]} {kind} {e.length:.6f}")
    return "\n".join(lines) + "\n"


def parse_graph_dump(text):
    """Read back a dump as plain tuples: (nodes, edges)."""
    nodes, edges = [], []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "N":
            nodes.append((int(parts[1]), float(parts[2]), float(parts[3]), PointKind(parts[4])))
        elif parts[0] == "E":
            kind = None if parts[4] == "-" else SegmentKind(int(parts[4]))
            edges.append((int(parts[1]), int(parts[2]), int(parts[3]), kind, float(parts[5])))
    return nodes, edges
