from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_pinned_graph
from hsigma.graph import (
    DisconnectedGraphError,
    GraphError,
    LevelError,
    MissingPinError,
    NonPositiveWeightError,
    SelfLoopError,
    build_exhaustion,
    build_host_graph,
    build_pinned_graph,
    exhaustion_from_json,
    graph_from_json,
    load_exhaustion,
    load_graph,
    path_exhaustion,
    wired_collapse,
)


def test_single_edge_is_valid():
    g = build_pinned_graph([0, 1], 0, [(0, 1, 1.0)])
    assert g.pin == 0 and g.interior == (1,)
    assert g.weight(0, 1) == 1.0


def test_path_graph_is_valid():
    g = build_pinned_graph([0, 1, 2], 0, [(0, 1, 1.0), (1, 2, 1.0)])
    assert g.n == 3
    np.testing.assert_array_equal(g.pin_weights, [1.0, 0.0])
    np.testing.assert_array_equal(g.interior_weights, [[0, 1], [1, 0]])


def test_self_loop_rejected():
    with pytest.raises(SelfLoopError):
        build_pinned_graph([0, 1], 0, [(1, 1, 1.0)])


@pytest.mark.parametrize("w", [0.0, -1.0])
def test_nonpositive_weight_rejected(w):
    with pytest.raises(NonPositiveWeightError):
        build_pinned_graph([0, 1], 0, [(0, 1, w)])


def test_disconnected_rejected():
    with pytest.raises(DisconnectedGraphError):
        build_pinned_graph([0, 1, 2], 0, [(0, 1, 1.0)])


def test_missing_pin_rejected():
    with pytest.raises(MissingPinError):
        build_pinned_graph([1, 2], 0, [(1, 2, 1.0)])


def test_error_classes_are_value_errors():
    for cls in (SelfLoopError, NonPositiveWeightError, DisconnectedGraphError, MissingPinError, LevelError):
        assert issubclass(cls, GraphError) and issubclass(cls, ValueError)


def test_pin_is_moved_first():
    g = build_pinned_graph([5, 7, 9], 9, [(5, 7, 2.0), (7, 9, 3.0)])
    assert g.vertices == (9, 5, 7)
    assert g.weight(7, 9) == 3.0
    assert g.weights[0, 2] == 3.0


def test_weights_are_read_only():
    g = build_pinned_graph([0, 1], 0, [(0, 1, 1.0)])
    with pytest.raises(ValueError):
        g.weights[0, 1] = 2.0


def test_with_weights_keeps_edge_set():
    g = build_pinned_graph([0, 1, 2], 0, [(0, 1, 1.0), (1, 2, 1.0)])
    with pytest.raises(GraphError):
        g.with_weights(np.ones((3, 3)) - np.eye(3))


def _path123():
    return build_host_graph([1, 2, 3], [(1, 2, 1.0), (2, 3, 1.0)])


def test_collapse_path_first_level():
    ex = build_exhaustion(_path123(), [[1], [1, 2]])
    g = wired_collapse(ex, 1)
    assert g.interior == (1,)
    assert g.weight(g.pin, 1) == 1.0


def test_collapse_path_second_level():
    ex = build_exhaustion(_path123(), [[1], [1, 2]])
    g = wired_collapse(ex, 2)
    assert g.interior == (1, 2)
    assert g.weight(1, 2) == 1.0
    assert g.weight(2, g.pin) == 1.0
    assert g.weight(1, g.pin) == 0.0


def test_collapse_star_sums_leaves():
    c, a, b, d = 0, 1, 2, 3
    host = build_host_graph([c, a, b, d], [(c, a, 1.0), (c, b, 1.0), (c, d, 1.0)])
    g = wired_collapse(build_exhaustion(host, [[c]]), 1)
    assert g.weight(c, g.pin) == 3.0


def test_collapsed_pin_ids_are_fresh():
    ex = path_exhaustion(2, [[0], [-1, 0, 1]])
    pins = {wired_collapse(ex, n).pin for n in (1, 2)}
    assert len(pins) == 2 and not pins & set(ex.host.vertices)


@pytest.mark.parametrize(
    "levels",
    [
        [[1, 2], [1]],  # not nested
        [[1], [1]],  # not strictly nested
        [[1, 2, 3]],  # whole host
        [[]],
    ],
)
def test_bad_levels_rejected(levels):
    with pytest.raises(LevelError):
        build_exhaustion(_path123(), levels)


def test_collapse_level_out_of_range():
    ex = build_exhaustion(_path123(), [[1]])
    with pytest.raises(LevelError):
        wired_collapse(ex, 2)


@given(st.integers(0, 10_000))
def test_json_round_trip(seed):
    g = random_pinned_graph(seed)
    doc = json.loads(json.dumps(g.to_json()))
    g2 = graph_from_json(doc)
    assert g2.vertices == g.vertices
    np.testing.assert_array_equal(g2.weights, g.weights)


def test_graph_file_round_trip(tmp_path):
    g = random_pinned_graph(3)
    p = tmp_path / "g.json"
    p.write_text(json.dumps(g.to_json()))
    g2 = load_graph(p)
    np.testing.assert_array_equal(g2.weights, g.weights)


def test_exhaustion_file_round_trip(tmp_path):
    ex = path_exhaustion(3, [[0], [-1, 0, 1], [-2, -1, 0, 1, 2]])
    p = tmp_path / "ex.json"
    p.write_text(json.dumps(ex.to_json()))
    ex2 = load_exhaustion(p)
    assert ex2.levels == ex.levels
    assert exhaustion_from_json(ex.to_json()).m == 3


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_collapse_conserves_boundary_weight(seed, radius):
    """Weight from V_n to the pin equals the host weight crossing out of V_n."""
    r = np.random.default_rng(seed)
    verts = list(range(-radius - 1, radius + 2))
    host = build_host_graph(verts, [(k, k + 1, float(r.uniform(0.1, 2))) for k in verts[:-1]])
    level = list(range(-radius, radius + 1))
    g = wired_collapse(build_exhaustion(host, [level]), 1)
    hidx = host.index
    crossing = sum(
        host.weights[hidx[v], hidx[w]] for v in level for w in host.vertices if w not in level
    )
    assert g.pin_weights.sum() == pytest.approx(crossing, rel=1e-14)
    assert np.allclose(g.weights, g.weights.T)
