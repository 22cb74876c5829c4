import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subkernel import space
from subkernel.errors import DisconnectedGraphWarning, ParseError, SizeOverflow

from oracles import gasket_edge_count, gasket_vertex_count


def test_lattice_shape_and_distances():
    Z = space.build_lattice(2, 9)
    assert Z.n == 81 and Z.n_edges == 2 * 9 * 8
    c = Z.center()
    assert Z.distance(c, Z.index_of([0, 0])) == 8
    assert Z.ball_size(c, 2) == 13


@given(st.integers(1, 3), st.floats(min_value=0, max_value=20))
@settings(max_examples=40, deadline=None)
def test_lattice_ball_volume_formula(d, r):
    # brute force count of the l1 ball in Z^d
    m = int(math.floor(r))
    grid = np.array(np.meshgrid(*[np.arange(-m, m + 1)] * d)).reshape(d, -1)
    count = int(np.sum(np.abs(grid).sum(axis=0) <= r))
    assert space.lattice_ball_volume(d, r) == count


def test_interior_volume_matches_ambient():
    Z = space.build_lattice(1, 101)
    c = Z.center()
    for r in (0, 1, 7.5, 49):
        assert Z.volume(c, r) == space.lattice_ball_volume(1, r) == 2 * math.floor(r) + 1
    assert Z.is_interior(c, 49) and not Z.is_interior(c, 50)


def test_size_budget():
    with pytest.raises(SizeOverflow):
        space.build_lattice(3, 1000)
    with pytest.raises(SizeOverflow):
        space.build_gasket(12)


@pytest.mark.parametrize("level", [0, 1, 2, 3, 5])
def test_gasket_counts(level):
    G = space.build_gasket(level)
    assert G.n == gasket_vertex_count(level)
    assert G.n_edges == gasket_edge_count(level)
    deg = G.degree
    assert sorted(np.unique(deg).tolist()) == ([2, 4] if level else [2])
    assert np.all(deg[G.corners] == 2)


def test_gasket_corner_ball():
    G = space.build_gasket(2)
    a = G.corners[0]
    assert G.ball_size(a, 1) == 3
    assert G.volume(a, 1) == 2 + 4 + 4
    assert G.connected


def test_edge_list_parsing(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# square\na b\nb c 2.0\nc d\nd a\nm a 3\n")
    S = space.load_edge_list(p)
    assert S.n == 4 and S.mu[0] == 3.0 and S.mu[1] == 3.0
    assert S.distance(0, 2) == 2


def test_edge_list_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("a b\nb c -1\n")
    with pytest.raises(ParseError) as exc:
        space.load_edge_list(p)
    assert exc.value.line == 2
    p.write_text("a b\nc d\n")
    with pytest.warns(DisconnectedGraphWarning):
        S = space.load_edge_list(p)
    assert S.n_components == 2


def test_volume_certificate_z1():
    Z = space.build_lattice(1, 1025)
    cert = space.volume_certificate(Z, window=(1, 256))
    assert abs(cert.gamma1 - 1) <= 0.05 and abs(cert.gamma2 - 1) <= 0.05
    assert cert.C_V <= 4
    assert cert.upper_violation <= 1e-12 and cert.lower_violation <= 1e-12


def test_volume_certificate_z2_slope():
    Z = space.build_lattice(2, 129)
    cert = space.volume_certificate(Z, sample_x=4, window=(1, 32))
    assert 1.8 <= cert.gamma_fit <= 2.05


def test_volume_certificate_gasket():
    G = space.build_gasket(5)
    cert = space.volume_certificate(G)
    assert abs(cert.gamma_fit - math.log(3) / math.log(2)) <= 0.1
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cert.to_dict()
