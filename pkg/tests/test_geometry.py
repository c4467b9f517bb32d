import json
import math

import numpy as np
import pytest

from fracmass import io
from fracmass.geometry import (OrientedSegment, PolyCurve, SegmentCurrent, boundary,
                               curve_to_current, curves_to_current, detect_quantum,
                               loop_decompose, merge_points, sample_smooth_curve,
                               self_intersections, transform, transform_curve)

SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]


def test_square_loop_gives_four_unit_segments():
    mu = curve_to_current(PolyCurve(SQUARE, closed=True))
    assert len(mu) == 4
    assert np.all(mu.weights == 1.0)


def test_open_two_vertex_curve_keeps_weight():
    mu = curve_to_current(PolyCurve([[0, 0], [1, 0]], weight=2.0))
    assert len(mu) == 1 and mu.weights[0] == 2.0


def test_closed_triangle_has_empty_boundary():
    mu = curve_to_current(PolyCurve([[0, 0], [1, 0], [0.3, 0.8]], closed=True, weight=0.5))
    assert np.all(mu.weights == 0.5)
    assert boundary(mu).is_empty()


def test_boundary_of_segment_and_chain():
    a, b, c = np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([1.0, 2.0])
    ch = boundary(SegmentCurrent([a], [b], [1.0]))
    atoms = {tuple(p): q for p, q in ch.atoms}
    assert atoms == {(1.0, 0.0): 1.0, (0.0, 0.0): -1.0}
    ch = boundary(SegmentCurrent([a, b], [b, c], [1.0, 1.0]))
    atoms = {tuple(p): q for p, q in ch.atoms}
    assert atoms == {(1.0, 2.0): 1.0, (0.0, 0.0): -1.0}


def test_loop_decompose_square():
    loops = loop_decompose(curve_to_current(PolyCurve(SQUARE, closed=True)))
    assert len(loops) == 1 and len(loops[0]) == 4 and loops[0].closed


def test_loop_decompose_figure_eight():
    t1 = PolyCurve([[0, 0], [1, 1], [1, 0]], closed=True)
    t2 = PolyCurve([[0, 0], [-1, -1], [-1, 0]], closed=True)
    loops = loop_decompose(curves_to_current([t1, t2]))
    assert sorted(len(c) for c in loops) == [3, 3]


def test_loop_decompose_splits_weight_quantum():
    delta = 0.25
    mu = curve_to_current(PolyCurve(SQUARE, closed=True, weight=2 * delta))
    loops = loop_decompose(mu, quantum=delta)
    assert len(loops) == 2
    assert all(c.weight == delta for c in loops)
    assert np.array_equal(loops[0].vertices, loops[1].vertices)


def test_loop_decompose_reproduces_segments():
    rng = np.random.default_rng(3)
    curves = [PolyCurve(rng.normal(size=(5, 2)), closed=True, weight=0.5) for _ in range(3)]
    mu = curves_to_current(curves)
    back = curves_to_current(loop_decompose(mu, quantum=0.5))
    key = lambda m: sorted(map(tuple, np.hstack([m.starts, m.ends, m.weights[:, None]])))
    assert key(back) == key(mu)


def test_detect_quantum():
    assert detect_quantum(np.array([0.3, 0.6, 0.9])) == pytest.approx(0.3)


def test_transform_identity_and_scaling():
    mu = curve_to_current(PolyCurve([[0, 0], [1, 0]]))
    same = transform(mu, 1.0, np.zeros(2))
    assert np.array_equal(same.starts, mu.starts) and np.array_equal(same.ends, mu.ends)
    assert transform(mu, 2.0).lengths[0] == 2.0


def test_shift_keeps_tangents():
    mu = curve_to_current(sample_smooth_curve("circle", {}, 16))
    moved = transform(mu, 1.0, np.array([0.25, -3.0]))
    np.testing.assert_allclose(moved.ends - moved.starts, mu.ends - mu.starts, atol=1e-15)
    assert np.array_equal(moved.weights, mu.weights)


def test_rotation_of_curve():
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    c = transform_curve(PolyCurve([[1, 0], [2, 0]]), rotation=rot)
    np.testing.assert_allclose(c.vertices, [[0, 1], [0, 2]], atol=1e-15)


def test_sample_circle_n4_and_segment():
    c = sample_smooth_curve("circle", {"r": 1.0}, 4)
    np.testing.assert_allclose(c.vertices, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)
    assert c.length() == pytest.approx(4 * math.sqrt(2))
    s = sample_smooth_curve("segment", {"length": 1.0}, 2)
    np.testing.assert_array_equal(s.vertices, [[0, 0], [1, 0]])


def test_fine_circle_length():
    c = sample_smooth_curve("circle", {"r": 1.0}, 10**4)
    assert abs(c.length() - 2 * math.pi) < 1e-6


def test_mass_additive_under_union():
    a = curve_to_current(PolyCurve(SQUARE, closed=True, weight=0.7))
    b = curve_to_current(sample_smooth_curve("circle", {}, 12))
    assert (a + b).mass() == pytest.approx(a.mass() + b.mass(), rel=1e-15)


def test_mixed_dimensions_rejected():
    a = curve_to_current(PolyCurve([[0, 0], [1, 0]]))
    b = curve_to_current(PolyCurve([[0, 0, 0], [1, 0, 0]]))
    with pytest.raises(ValueError):
        a + b


def test_oriented_segment_properties():
    seg = OrientedSegment(np.array([0.0, 0.0]), np.array([3.0, 4.0]), 2.0)
    assert seg.length == 5.0
    np.testing.assert_allclose(seg.tangent, [0.6, 0.8])


def test_merge_points_joins_close_points():
    pts = np.array([[0.0, 0.0], [1e-12, 0.0], [1.0, 0.0]])
    labels, reps = merge_points(pts, 1e-9)
    assert len(reps) == 2
    assert labels[0] == labels[1] != labels[2]


def test_self_intersections():
    bowtie = PolyCurve([[0, 0], [1, 1], [1, 0], [0, 1]], closed=True)
    assert self_intersections(bowtie)
    assert not self_intersections(PolyCurve(SQUARE, closed=True))


def test_curve_json_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    curves = [PolyCurve(rng.normal(size=(7, 3)) / 3.0, closed=True, weight=1 / 3),
              PolyCurve(rng.normal(size=(4, 3)) * 1e-7)]
    path = tmp_path / "curves.json"
    io.curves_to_json(curves, path)
    back = io.read_curves(path)
    for a, b in zip(curves, back):
        assert np.array_equal(a.vertices, b.vertices)
        assert a.closed == b.closed and a.weight == b.weight
    assert json.loads(path.read_text())["dim"] == 3


def test_current_json_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    mu = SegmentCurrent(rng.random((9, 2)), rng.random((9, 2)), rng.random(9) + 0.1)
    path = tmp_path / "mu.json"
    io.current_to_json(mu, path)
    back = io.read_current(path)
    assert np.array_equal(back.starts, mu.starts)
    assert np.array_equal(back.ends, mu.ends)
    assert np.array_equal(back.weights, mu.weights)


def test_malformed_json_is_input_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(io.InputError):
        io.read_curves(path)
