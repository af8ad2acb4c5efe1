"""Temporal order recovery, curvature-driven resampling and velocity.

Traversal policy at every node, applied lexicographically:
untraversed segments first (closed loops before anything else), then the
smallest angular deviation from the incoming direction, then the smallest
pixel distance, then the lowest segment id.  Components are visited right
to left, each starting from its rightmost end point.
"""
from __future__ import annotations

import heapq
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .skeleton_graph import PointKind

log = logging.getLogger(__name__)

DIRECTION_WINDOW = 5
LAMBDA = 3.0
SMOOTH_SIGMA = 1.5
END_GAIN = 0.25
END_SCALE = 1.5


@dataclass
class OrderedTrace:
    points: np.ndarray                      # (n, 2) float (x, y)
    breaks: list = field(default_factory=list)  # indices where a new pen-down stroke starts
    visits: list = field(default_factory=list)  # (segment id, reversed) in traversal order

    def strokes(self):
        bounds = [0] + list(self.breaks) + [len(self.points)]
        return [self.points[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def __len__(self):
        return len(self.points)


@dataclass
class ResampledTrace:
    points: np.ndarray
    breaks: list = field(default_factory=list)

    def strokes(self):
        bounds = [0] + list(self.breaks) + [len(self.points)]
        return [self.points[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


@dataclass
class VelocityProfile:
    v: np.ndarray
    breaks: list = field(default_factory=list)   # indices of the zeros inserted at pen-ups
    t: np.ndarray | None = None

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        if self.t is None:
            self.t = np.arange(len(self.v), dtype=float)
        else:
            self.t = np.asarray(self.t, dtype=float)

    def __len__(self):
        return len(self.v)


def _unit(v):
    n = np.hypot(*v)
    return v / n if n > 0 else np.zeros(2)


def _exit_direction(points, w):
    pts = np.asarray(points[-w:], dtype=float)
    return _unit(pts[-1] - pts[0]) if len(pts) > 1 else np.zeros(2)


def _entry_direction(chain, w):
    pts = np.asarray(chain[:w], dtype=float)
    return _unit(pts[-1] - pts[0]) if len(pts) > 1 else np.zeros(2)


def _angle(a, b):
    if not a.any() or not b.any():
        return np.pi / 2
    return float(np.arccos(np.clip(np.dot(a, b), -1.0, 1.0)))


def _cluster_path(pixels, a, b):
    """Pixels strictly between a and b inside a node's pixel cluster (8-connected BFS)."""
    if a == b:
        return []
    members = set(pixels) | {a, b}
    prev = {a: None}
    queue = deque([a])
    while queue:
        p = queue.popleft()
        if p == b:
            break
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                q = (p[0] + dx, p[1] + dy)
                if q in members and q not in prev:
                    prev[q] = p
                    queue.append(q)
    if b not in prev:
        return []
    path = []
    p = prev[b]
    while p is not None and p != a:
        path.append(p)
        p = prev[p]
    return path[::-1]


def _oriented(g, eid, from_node):
    """Chain(s) of segment eid leaving ``from_node`` as (chain, reversed, to_node)."""
    e = g.edges[eid]
    if e.is_loop:
        return [(e.chain, False, e.ends[1]), (e.chain[::-1], True, e.ends[0])]
    if e.ends[0] == from_node:
        return [(e.chain, False, e.ends[1])]
    return [(e.chain[::-1], True, e.ends[0])]


def _component_key(g, comp):
    xs = [n_x for nid in comp for n_x in [g.nodes[nid].pos[0]]]
    ys = [g.nodes[nid].pos[1] for nid in comp]
    for nid in comp:
        for eid in g.adjacency[nid]:
            xs.extend(g.edges[eid].chain[:, 0].tolist())
    return (-max(xs), min(ys), min(comp))


def _start_node(g, comp):
    ends = [g.nodes[n] for n in comp if g.nodes[n].kind == PointKind.END]
    pool = ends or [g.nodes[n] for n in comp]
    return min(pool, key=lambda n: (-n.pos[0], n.pos[1], n.id)).id


def _shortest_route(g, comp_edges, src, targets):
    """Dijkstra over segment lengths from src to the nearest node in targets."""
    dist = {src: 0.0}
    back = {}
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, np.inf):
            continue
        if u in targets:
            route = []
            while u != src:
                eid, prev = back[u]
                route.append((eid, prev))
                u = prev
            return route[::-1]
        for eid in g.adjacency[u]:
            if eid not in comp_edges:
                continue
            e = g.edges[eid]
            v = e.ends[1] if e.ends[0] == u else e.ends[0]
            nd = d + e.length + 1e-9 * eid
            if nd < dist.get(v, np.inf):
                dist[v] = nd
                back[v] = (eid, u)
                heapq.heappush(heap, (nd, v))
    return []


def order_segments(g, window=DIRECTION_WINDOW):
    """Rebuild a plausible pen order over a typed segment graph."""
    points, breaks, visits = [], [], []
    comps = sorted(g.components(), key=lambda c: _component_key(g, c))
    for comp in comps:
        if points:
            breaks.append(len(points))
        comp_edges = {eid for nid in comp for eid in g.adjacency[nid]}
        remaining = set(comp_edges)
        cur = _start_node(g, comp)
        stroke = []
        if not comp_edges:
            stroke.append(g.nodes[cur].pixels[0])

        def append_chain(chain, node_from):
            chain = [tuple(p) for p in np.asarray(chain).tolist()]
            if stroke:
                last = stroke[-1]
                if chain[0] != last:
                    # junction cluster: walk through it so the trace stays 8-connected
                    stroke.extend(_cluster_path(g.nodes[node_from].pixels, last, chain[0]))
                    stroke.append(chain[0])
                stroke.extend(chain[1:])
            else:
                stroke.extend(chain)

        while remaining:
            incoming = _exit_direction(stroke, window) if len(stroke) > 1 else np.array([-1.0, 0.0])
            here = np.asarray(stroke[-1] if stroke else g.nodes[cur].pixels[0], dtype=float)
            cands = []
            for eid in sorted(g.adjacency[cur]):
                if eid not in remaining:
                    continue
                for chain, rev, to in _oriented(g, eid, cur):
                    dev = _angle(incoming, _entry_direction(chain, window))
                    gap = float(np.hypot(*(chain[0] - here)))
                    cands.append((not g.edges[eid].is_loop, dev, gap, eid, rev, to, chain))
            if cands:
                _, _, _, eid, rev, to, chain = min(cands, key=lambda c: c[:5])
                append_chain(chain, cur)
                visits.append((eid, rev))
                remaining.discard(eid)
                cur = to
                continue
            targets = {n for n in comp
                       if any(e in remaining for e in g.adjacency[n])}
            route = _shortest_route(g, comp_edges, cur, targets)
            if not route:
                log.warning("unreachable segments left in component; giving up on %d", len(remaining))
                break
            for eid, node_from in route:
                chain, rev, to = _oriented(g, eid, node_from)[0]
                append_chain(chain, node_from)
                visits.append((eid, rev))
                cur = to
        points.extend(stroke)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return OrderedTrace(pts, breaks, visits)


def discrete_curvature(pts):
    """Turning angle per unit length at each vertex; zero at the two ends."""
    pts = np.asarray(pts, dtype=float)
    k = np.zeros(len(pts))
    if len(pts) < 3:
        return k
    d = np.diff(pts, axis=0)
    seg = np.hypot(d[:, 0], d[:, 1])
    ang = np.arctan2(d[:, 1], d[:, 0])
    turn = np.angle(np.exp(1j * np.diff(ang)))
    local = 0.5 * (seg[:-1] + seg[1:])
    with np.errstate(divide="ignore", invalid="ignore"):
        k[1:-1] = np.where(local > 0, turn / local, 0.0)
    return k


def _resample_stroke(pts, lam, step, sigma, end_gain, end_scale):
    pts = np.asarray(pts, dtype=float)
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(np.diff(pts, axis=0) != 0, axis=1)
    pts = pts[keep]
    if len(pts) < 2:
        return None
    if sigma > 0 and len(pts) > 3:
        smooth = ndimage.gaussian_filter1d(pts, sigma, axis=0, mode="nearest")
        smooth[0], smooth[-1] = pts[0], pts[-1]
    else:
        smooth = pts
    seg = np.hypot(*np.diff(smooth, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    length = s[-1]
    if length <= 0:
        return None
    rho = 1.0 + lam * np.abs(discrete_curvature(smooth))
    peak = rho.max() * (1.0 + end_gain)
    reach = np.minimum(s, length - s)
    h = np.exp(-reach / end_scale)
    rho = rho + (peak - rho) * h
    warp = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * seg)])
    n = max(4, int(np.ceil(warp[-1] / step)) + 1)
    target = np.linspace(0.0, warp[-1], n)
    s_new = np.interp(target, warp, s)
    return np.column_stack([np.interp(s_new, s, smooth[:, 0]), np.interp(s_new, s, smooth[:, 1])])


def resample(tr, lam=LAMBDA, step=1.0, sigma=SMOOTH_SIGMA, end_gain=END_GAIN, end_scale=END_SCALE):
    """Arc-length resampling with local density proportional to 1 + lam*|curvature|.

    Stroke ends are given the densest spacing of the stroke.  Strokes with
    fewer than two distinct points are dropped with a warning.
    """
    out, breaks = [], []
    for i, stroke in enumerate(tr.strokes()):
        res = _resample_stroke(stroke, lam, step, sigma, end_gain, end_scale)
        if res is None:
            log.warning("stroke %d has fewer than 2 distinct points; skipped", i)
            continue
        if out:
            breaks.append(sum(len(o) for o in out))
        out.append(res)
    pts = np.concatenate(out) if out else np.zeros((0, 2))
    return ResampledTrace(pts, breaks)


def estimate_velocity(rs, dt=1.0):
    """Distance between consecutive samples over dt; a zero marks each pen-up."""
    parts, breaks = [], []
    for stroke in rs.strokes():
        if parts:
            breaks.append(sum(len(p) for p in parts))
            parts.append(np.zeros(1))
        parts.append(np.hypot(*np.diff(np.asarray(stroke, dtype=float), axis=0).T) / dt)
    v = np.concatenate(parts) if parts else np.zeros(0)
    return VelocityProfile(v, breaks)


def velocity_to_point_spans(rs):
    """For each velocity sample index, the index of the point where its interval starts."""
    idx = []
    start = 0
    for k, stroke in enumerate(rs.strokes()):
        if k:
            idx.append(-1)
        idx.extend(range(start, start + len(stroke) - 1))
        start += len(stroke)
    return np.asarray(idx, dtype=int)


def write_trace(path, tr, header=None):
    lines = ["TRACE v1"]
    if header:
        lines.extend(f"# {h}" for h in header)
    for sid, stroke in enumerate(tr.strokes()):
        if sid:
            lines.append("")
        lines.extend(f"{float(x)!r} {float(y)!r} {sid}" for x, y in stroke)
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace(path):
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != "TRACE v1":
        raise InvalidInputError(f"{path}: missing 'TRACE v1' header")
    pts, breaks, pending = [], [], False
    for line in text[1:]:
        if line.startswith("#"):
            continue
        if not line.strip():
            pending = True
            continue
        x, y, _ = line.split()
        if pending and pts:
            breaks.append(len(pts))
        pending = False
        pts.append((float(x), float(y)))
    return OrderedTrace(np.asarray(pts, dtype=float).reshape(-1, 2), breaks)


def recover(skeleton, strict=False):
    """Skeleton image -> ordered trace."""
    from .skeleton_graph import build_graph

    return order_segments(build_graph(skeleton, strict))
