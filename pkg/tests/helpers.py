"""Shared fixtures-by-construction: thin glyphs, alignment, independent oracles."""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra


def canvas(h=21, w=31):
    return np.zeros((h, w), dtype=bool)


def draw(img, *vertices):
    """8-connected polyline through integer (x, y) vertices; axis or 45-degree legs only."""
    for (x0, y0), (x1, y1) in zip(vertices[:-1], vertices[1:]):
        n = max(abs(x1 - x0), abs(y1 - y0))
        for i in range(n + 1):
            img[y0 + (y1 - y0) * i // n, x0 + (x1 - x0) * i // n] = True
    return img


def diamond(img, cx, cy, r):
    return draw(img, (cx, cy - r), (cx + r, cy), (cx, cy + r), (cx - r, cy), (cx, cy - r))


GLYPHS = {
    "line": lambda: draw(canvas(), (3, 10), (20, 10)),
    "T": lambda: draw(draw(canvas(), (3, 4), (17, 4)), (10, 4), (10, 16)),
    "plus": lambda: draw(draw(canvas(), (3, 10), (17, 10)), (10, 3), (10, 17)),
    "ring": lambda: diamond(canvas(), 12, 10, 6),
    "lollipop": lambda: draw(diamond(canvas(), 10, 10, 6), (16, 10), (26, 10)),
    "figure-eight": lambda: diamond(diamond(canvas(), 10, 10, 6), 22, 10, 6),
    "H": lambda: draw(draw(draw(canvas(), (5, 3), (5, 17)), (20, 3), (20, 17)), (5, 10), (20, 10)),
}

# hand-derived: (End, Branch, Cross, Anchor) points and (Type0, Type1, Type2) segments
GLYPH_COUNTS = {
    "line": ((2, 0, 0, 0), (0, 1, 0)),
    "T": ((3, 1, 0, 0), (0, 3, 0)),
    "plus": ((4, 0, 1, 0), (0, 4, 0)),
    "ring": ((0, 0, 0, 1), (1, 0, 0)),
    "lollipop": ((1, 1, 0, 0), (1, 1, 0)),
    "figure-eight": ((0, 0, 1, 0), (2, 0, 0)),
    "H": ((4, 2, 0, 0), (0, 4, 1)),
}


def cycle_edges(n_nodes, edges):
    """Edge ids lying on some simple cycle, by enumerating every edge subset.

    ``edges`` is a list of (u, v); a subset is a simple cycle when it is
    connected and every touched node has degree 2 (a self-loop alone counts).
    """
    on = set()
    ids = range(len(edges))
    for r in range(1, len(edges) + 1):
        for sub in itertools.combinations(ids, r):
            deg = {}
            for e in sub:
                u, v = edges[e]
                deg[u] = deg.get(u, 0) + 1
                deg[v] = deg.get(v, 0) + 1
            if any(d != 2 for d in deg.values()):
                continue
            # connectivity of the subset
            parent = {u: u for u in deg}

            def find(x):
                while parent[x] != x:
                    x = parent[x]
                return x

            for e in sub:
                u, v = edges[e]
                parent[find(u)] = find(v)
            if len({find(u) for u in deg}) == 1:
                on.update(sub)
    return on


def dtw_mean(a, b):
    """Mean point distance along the optimal monotone alignment of two paths."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    n, m = d.shape
    D = np.full((n + 1, m + 1), np.inf)
    L = np.zeros((n + 1, m + 1))
    D[0, 0] = 0.0
    for k in range(2, n + m + 1):
        i = np.arange(max(1, k - m), min(n, k - 1) + 1)
        j = k - i
        cand = np.stack([D[i - 1, j - 1], D[i - 1, j], D[i, j - 1]])
        lens = np.stack([L[i - 1, j - 1], L[i - 1, j], L[i, j - 1]])
        pick = np.argmin(cand, axis=0)
        cols = np.arange(len(i))
        D[i, j] = cand[pick, cols] + d[i - 1, j - 1]
        L[i, j] = lens[pick, cols] + 1
    return D[n, m] / L[n, m]


def geodesic_order(mask):
    """Pixel order of a simple open chain by chamfer geodesic distance.

    The chain ends are found as a double sweep of farthest pixels; the walk
    starts at the rightmost end (smaller y on ties).
    """
    ys, xs = np.nonzero(mask)
    idx = {(x, y): i for i, (x, y) in enumerate(zip(xs.tolist(), ys.tolist()))}
    rows, cols, w = [], [], []
    for (x, y), i in idx.items():
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                j = idx.get((x + dx, y + dy))
                if j is not None and j != i:
                    rows.append(i)
                    cols.append(j)
                    w.append(np.hypot(dx, dy))
    graph = coo_matrix((w, (rows, cols)), shape=(len(idx), len(idx))).tocsr()
    a = int(np.argmax(dijkstra(graph, indices=0)))
    da = dijkstra(graph, indices=a)
    b = int(np.argmax(da))
    start = min((a, b), key=lambda i: (-xs[i], ys[i]))
    order = np.argsort(dijkstra(graph, indices=start), kind="stable")
    return np.column_stack([xs[order], ys[order]])


def brute_distance(n1, n2):
    """Plain-Python reading of the distance: loops, math.hypot, lower index on ties."""
    small, large, swap = (n1, n2, False) if len(n1) <= len(n2) else (n2, n1, True)
    dists = []
    for p in small:
        best, best_d = None, math.inf
        for j, q in enumerate(large):
            d = math.hypot(p[0] - q[0], p[1] - q[1])
            if d < best_d:
                best, best_d = j, d
        dists.append(best_d)
    mean = math.fsum(dists) / len(dists)
    return mean + max(dists) * abs(len(n1) - len(n2))
