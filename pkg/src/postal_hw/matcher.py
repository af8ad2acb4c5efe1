"""Graph-matching recognition over stroke middle points.

Dist(g1, g2) = mean of the N associated point distances + P * |N1 - N2|,
with N = min(N1, N2) and the penalty P the largest associated distance.
Each node of the smaller graph is paired with its nearest node in the larger
one, so Dist is not symmetric in general.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .beta_elliptic import load_model, save_model
from .errors import ConfigError


@dataclass(frozen=True)
class TrajectoryGraph:
    nodes: np.ndarray               # (N, 2) stroke middle points in temporal order

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        if len(nodes) < 1:
            raise ValueError("a trajectory graph needs at least one node")
        object.__setattr__(self, "nodes", nodes)

    @property
    def n(self):
        return len(self.nodes)

    @classmethod
    def from_model(cls, model, raw_points=None, raw_spans=None):
        """Middle point of each stroke's elliptic arc, or of the raw span when given."""
        if raw_points is not None and raw_spans is not None:
            pts = np.asarray(raw_points, dtype=float)
            return cls(np.array([pts[(a + b) // 2] for a, b in raw_spans]))
        return cls(np.array([st.midpoint() for st in model.strokes]))


@dataclass(frozen=True)
class Association:
    pairs: tuple                    # ((i1, i2), ...) indices into graph 1 and graph 2

    @property
    def n(self):
        return len(self.pairs)


@dataclass(frozen=True)
class GraphDistance:
    value: float
    mean_term: float
    penalty: float
    size_gap: int


def normalize(g):
    """Centroid to origin and bounding-box diagonal to 1 (rigid + uniform scale only).

    Extents at rounding level of the coordinates count as a single point.
    """
    nodes = g.nodes - g.nodes.mean(axis=0)
    diag = float(np.hypot(*(nodes.max(axis=0) - nodes.min(axis=0))))
    if diag > 1e-9 * max(1.0, float(np.abs(g.nodes).max())):
        nodes = nodes / diag
    else:
        nodes = np.zeros_like(nodes)
    return TrajectoryGraph(nodes)


def point_distance(p1, p2):
    d = np.asarray(p1, dtype=float) - np.asarray(p2, dtype=float)
    return float(np.sqrt(d @ d))


def associate(g1, g2):
    """Nearest-node pairing driven by the smaller graph (g1 on equal sizes)."""
    if g1.n <= g2.n:
        d = np.linalg.norm(g1.nodes[:, None, :] - g2.nodes[None, :, :], axis=-1)
        # argmin returns the first (lowest) index on ties
        return Association(tuple((i, int(j)) for i, j in enumerate(np.argmin(d, axis=1))))
    d = np.linalg.norm(g2.nodes[:, None, :] - g1.nodes[None, :, :], axis=-1)
    return Association(tuple((int(i), j) for j, i in enumerate(np.argmin(d, axis=1))))


def graph_distance(g1, g2, symmetric=False):
    """Mean associated distance plus the max-distance penalty times the size gap."""
    if symmetric:
        a = graph_distance(g1, g2)
        b = graph_distance(g2, g1)
        return GraphDistance(0.5 * (a.value + b.value), 0.5 * (a.mean_term + b.mean_term),
                             0.5 * (a.penalty + b.penalty), a.size_gap)
    assoc = associate(g1, g2)
    dists = [point_distance(g1.nodes[i], g2.nodes[j]) for i, j in assoc.pairs]
    mean = sum(dists) / len(dists)
    penalty = max(dists)
    gap = abs(g1.n - g2.n)
    return GraphDistance(mean + penalty * gap, mean, penalty, gap)


@dataclass
class TemplateStore:
    entries: dict = field(default_factory=dict)    # label -> [TrajectoryGraph]
    sources: dict = field(default_factory=dict)    # label -> [model file names]

    def add(self, label, graph, source=None):
        self.entries.setdefault(label, []).append(normalize(graph))
        self.sources.setdefault(label, []).append(source)

    @property
    def labels(self):
        return sorted(self.entries)

    def __len__(self):
        return sum(len(v) for v in self.entries.values())

    @classmethod
    def from_models(cls, models):
        """models: iterable of (label, BetaEllipticModel)."""
        store = cls()
        for label, model in models:
            store.add(label, TrajectoryGraph.from_model(model))
        return store

    def save(self, root, models):
        """Write ``<root>/<label>/<i>.model.json`` and ``labels.manifest``.

        ``models`` maps label -> list of models in the order they were added.
        """
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        lines = []
        for label in sorted(models):
            d = root / label
            d.mkdir(exist_ok=True)
            for i, m in enumerate(models[label]):
                save_model(d / f"{i:03d}.model.json", m)
            lines.append(f"{label}\t{len(models[label])}")
        (root / "labels.manifest").write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, root):
        root = Path(root)
        manifest = root / "labels.manifest"
        if not manifest.exists():
            raise ConfigError(f"{root}: no labels.manifest")
        store = cls()
        for line in manifest.read_text().splitlines():
            if not line.strip():
                continue
            label, count = line.split("\t")
            files = sorted((root / label).glob("*.model.json"))
            if len(files) != int(count):
                raise ConfigError(f"{label}: manifest lists {count} models, found {len(files)}")
            for f in files:
                store.add(label, TrajectoryGraph.from_model(load_model(f)), source=f.name)
        return store


def classify(sample, store, symmetric=False):
    """(label, GraphDistance, margin) of the nearest template.

    A label's distance is that of its closest template; ties go to the
    lexicographically smaller label.  The margin is second-best minus best
    label distance (infinite with a single label).
    """
    if not store.entries:
        raise ConfigError("template store is empty")
    s = normalize(sample)
    scored = []
    for label in store.labels:
        best = min((graph_distance(s, tpl, symmetric) for tpl in store.entries[label]),
                   key=lambda d: d.value)
        scored.append((best.value, label, best))
    scored.sort(key=lambda x: (x[0], x[1]))
    margin = scored[1][0] - scored[0][0] if len(scored) > 1 else math.inf
    return scored[0][1], scored[0][2], margin
