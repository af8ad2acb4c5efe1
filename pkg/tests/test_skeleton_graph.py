import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from postal_hw import imaging
from postal_hw.errors import MalformedSkeletonError
from postal_hw.skeleton_graph import (PointKind, SegmentKind, build_graph, classify_pixels,
                                      dump_graph, extract_segments, parse_graph_dump)
from helpers import GLYPHS, GLYPH_COUNTS, canvas, cycle_edges, draw


def counts(g):
    pts = tuple(sum(n.kind == k for n in g.nodes)
                for k in (PointKind.END, PointKind.BRANCH, PointKind.CROSS, PointKind.ANCHOR))
    segs = tuple(sum(e.kind == k for e in g.edges)
                 for k in (SegmentKind.TYPE0, SegmentKind.TYPE1, SegmentKind.TYPE2))
    return pts, segs


def check_invariants(sk, g):
    pixels = int(np.asarray(sk, bool).sum())
    housed = sum(len(n.pixels) for n in g.nodes)
    interior = [tuple(p) for e in g.edges for p in e.interior.tolist()]
    assert housed + len(interior) == pixels
    assert len(set(interior)) == len(interior)
    for n in g.nodes:
        assert g.degree(n.id) == n.degree
    for e in g.edges:
        assert all(0 <= end < len(g.nodes) for end in e.ends)
        steps = np.abs(np.diff(e.chain, axis=0)).max(axis=1)
        assert (steps == 1).all()                     # consecutive 8-neighbours
    if len(g.edges) <= 12:
        assert {e.id for e in g.edges if e.kind == SegmentKind.TYPE0} == \
            cycle_edges(len(g.nodes), [e.ends for e in g.edges])


def test_point_examples():
    def kinds(img):
        return sorted(p.kind.value for p in classify_pixels(img))
    assert kinds(GLYPHS["line"]()) == ["End", "End"]
    assert kinds(GLYPHS["T"]()) == ["Branch", "End", "End", "End"]
    assert kinds(GLYPHS["plus"]()) == ["Cross", "End", "End", "End", "End"]
    dot = canvas()
    dot[4, 4] = True
    assert [p.kind for p in classify_pixels(dot)] == [PointKind.END]


@pytest.mark.parametrize("name", sorted(GLYPHS))
def test_glyph_counts_and_invariants(name):
    sk = GLYPHS[name]()
    g = build_graph(sk)
    assert counts(g) == GLYPH_COUNTS[name]
    check_invariants(sk, g)


def test_ring_anchor_is_top_then_right():
    g = build_graph(GLYPHS["ring"]())
    (anchor,) = g.nodes
    assert anchor.kind == PointKind.ANCHOR
    assert anchor.pos == (12.0, 4.0)
    assert g.edges[0].is_loop


def test_malformed_skeleton_reports_location():
    img = canvas()
    draw(img, (3, 10), (17, 10))
    draw(img, (10, 3), (10, 17))
    draw(img, (4, 4), (16, 16))        # five links leave the junction
    with pytest.raises(MalformedSkeletonError) as info:
        build_graph(img)
    assert info.value.location is not None
    g = build_graph(img, strict=False)
    assert any(n.kind == PointKind.CROSS for n in g.nodes)


def test_dump_round_trip():
    g = build_graph(GLYPHS["lollipop"]())
    nodes, edges = parse_graph_dump(dump_graph(g))
    assert [(n[0], n[3]) for n in nodes] == [(n.id, n.kind) for n in g.nodes]
    assert [(e[1], e[2], e[3]) for e in edges] == [(*e.ends, e.kind) for e in g.edges]


def test_extract_segments_walks_each_chain_once():
    sk = GLYPHS["H"]()
    g = extract_segments(sk, classify_pixels(sk))
    assert len(g.edges) == 5
    assert all(e.kind is None for e in g.edges)


@settings(max_examples=80, deadline=None)
@given(arrays(bool, st.tuples(st.integers(5, 14), st.integers(5, 14))))
def test_random_skeleton_invariants(img):
    sk = imaging.skeletonize(imaging.denoise(img))
    g = build_graph(sk, strict=False)
    check_invariants(sk, g)
