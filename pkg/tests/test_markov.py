import numpy as np
import pytest

from subkernel import markov, space
from subkernel.errors import (
    BoundaryContamination,
    DisconnectedGraphWarning,
    IsolatedVertex,
    MemoryBudgetExceeded,
)

from oracles import averaged_step_dist, srw_binomial


@pytest.fixture(scope="module")
def line():
    return space.build_lattice(1, 101)


def test_srw_rows_and_leak(line):
    k = markov.srw(line)
    mass = k.row_mass()
    assert mass[0] == pytest.approx(0.5) and mass[50] == pytest.approx(1.0)
    refl = markov.srw(space.build_lattice(1, 101, "reflected"))
    assert np.allclose(refl.row_mass(), 1.0)


def test_n_step_matches_binomial(line):
    k = markov.srw(line)
    c = line.center()
    st = markov.n_step(k, 20, rows=[c])
    for n in (1, 7, 20):
        for x in (-5, 0, 4):
            assert st.H[n, 0, c + x] == pytest.approx(srw_binomial(n, x), abs=1e-15)
    assert st.leak[20, 0] == pytest.approx(0.0, abs=1e-15)


def test_averaged_chain_matches_convolution(line):
    k = markov.average_two_step(markov.srw(line))
    c = line.center()
    st = markov.n_step(k, 12, rows=[c])
    ref = averaged_step_dist(12, line.side)
    assert np.allclose(st.H[12, 0, c - 24: c + 25], ref, atol=1e-15)
    assert k.range_ == 2


def test_chapman_kolmogorov():
    Z = space.build_lattice(1, 21)
    st = markov.n_step(markov.srw(Z), 8)
    assert markov.chapman_kolmogorov_error(st, 3, 5) < 1e-15


def test_memory_budget(line):
    with pytest.raises(MemoryBudgetExceeded):
        markov.n_step(markov.srw(line), 1000, budget=1 << 20)


def test_isolated_vertex(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("a b\nm c 1\n")
    with pytest.warns(DisconnectedGraphWarning):
        S = space.load_edge_list(p)
    with pytest.raises(IsolatedVertex):
        markov.srw(S)


def test_gasket_srw_is_symmetric():
    k = markov.srw(space.build_gasket(3))
    assert k.symmetric
    D = k.density()
    assert np.allclose(D, D.T)


def test_exit_time_single_point_lazy(line):
    k = markov.lazy(markov.srw(line), 0.25)
    res = markov.exit_time_dp(k, line.center(), 0.5, 200)
    assert res.ball_size == 1
    assert res.expected_exact == pytest.approx(4 / 3)
    assert res.expected_truncated == pytest.approx(4 / 3, rel=1e-12)


def test_exit_time_srw_quadratic(line):
    # E tau for exit from {-r..r} by SRW is (r + 1)^2
    k = markov.srw(line)
    for r in (1, 3, 10):
        res = markov.exit_time_dp(k, line.center(), r, 5000)
        assert res.expected_exact == pytest.approx((r + 1) ** 2, rel=1e-10)
        assert res.expected_exact - res.expected_truncated <= res.truncation_bias + 1e-9


def test_exit_boundary_check(line):
    with pytest.raises(BoundaryContamination):
        markov.exit_time_dp(markov.srw(line), 2, 5, 10)


def test_hitting_time(line):
    k = markov.srw(line)
    c = line.center()
    out = markov.hitting_time_dp(k, c + 3, 0, c, 50)
    assert out[2] == 0 and out[3] == pytest.approx(1 / 8)
    assert np.all(np.diff(out) >= 0)


def test_tail_probability_and_csv(line, tmp_path):
    k = markov.srw(line)
    c = line.center()
    st = markov.n_step(k, 4, rows=[c])
    assert markov.tail_probability(st, c, 4, 4) == pytest.approx(2 / 16)
    assert markov.tail_probability(k, c, 4, 4) == pytest.approx(2 / 16)
    p = tmp_path / "h.csv"
    markov.export_csv(st, p, n_values=[2])
    lines = p.read_text().splitlines()
    assert lines[0] == "n,x,y,h,d" and len(lines) == 4
