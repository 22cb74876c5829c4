import math

import numpy as np
import pytest

from subkernel import estimates as est, markov, space, subordinate as sub
from subkernel.bernstein import BernsteinFunction
from subkernel.errors import DegenerateCylinder, DomainError, EmptyDomain, NotALevyMeasure


@pytest.fixture(scope="module")
def z1():
    Z = space.build_lattice(1, 513)
    k = markov.average_two_step(markov.srw(Z))
    return Z, k


def test_profile_and_scale_function():
    p = est.psi_power(2.0)
    assert p(0) == 0.5 and p(1) == 1.0 and p(3) == 9.0
    assert p.inv(9.0) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        est.check_scale_function(est.Profile.power(2.0))


def test_dheat_target_value():
    Z = space.build_lattice(1, 101)
    V = est.VolumeFunction(Z)
    t = est.Target("dheat", V, psi=est.psi_power(1.0))
    c = Z.center()
    # psi^-1(4) = 4 gives V = 9 on-diagonal; 4 / (5 * 2) off the diagonal at d = 2
    assert est.eval_target(t, 4, c, d=0) == pytest.approx(1 / 9)
    assert est.eval_target(t, 4, c, d=2) == pytest.approx(1 / 9)
    assert est.eval_target(t, 4, c, d=10) == pytest.approx(4 / (21 * 10))
    assert est.eval_target(t, 4, c, c + 10, space=Z) == pytest.approx(4 / 210)


def test_green_target_off_diagonal_only():
    Z = space.build_lattice(1, 101)
    t = est.Target("green", est.VolumeFunction(Z), psi=est.psi_power(1.0))
    with pytest.raises(DomainError):
        t.row(0, Z.center(), [0, 1])
    with pytest.raises(ValueError):
        est.Target("thm1", est.VolumeFunction(Z))


def test_comparability_exact_and_scaled():
    tg = np.linspace(0.1, 1.0, 20)
    rep = est.comparability(tg, tg)
    assert rep.sup_ratio == rep.inf_ratio == 1.0 and rep.passed
    rep2 = est.comparability(2 * tg, tg, C_max=1.5)
    assert rep2.sup_ratio == pytest.approx(2.0) and not rep2.passed
    assert est.comparability(2 * tg, tg, C_max=1.5, band=True).passed
    z = tg.copy()
    z[3] = 0
    rz = est.comparability(z, tg, coords={"i": np.arange(20)})
    assert rz.n_zero == 1 and not rz.passed and rz.inf_witness == (3,)
    assert rz.to_dict()["width"] == "inf"


def test_comparability_errors():
    with pytest.raises(EmptyDomain):
        est.comparability([], [])
    with pytest.raises(DomainError):
        est.comparability([1.0], [0.0])


def test_kernel_scan_excludes_boundary(z1):
    Z, k = z1
    # the second row sees the boundary within d_max but the chain has not leaked yet
    sk = sub.subordinate(k, BernsteinFunction.stable(0.5), 8, rows=[Z.center(), 495], leak_tol=1.0)
    t = est.Target("dheat", est.VolumeFunction(Z), psi=est.psi_power(1.0))
    rep = est.kernel_scan(sk, t, [1, 8], 32, leak_max=1.0)
    assert rep.n_excluded == 2 * 50 and rep.n_points == 2 * 65
    assert rep.inf_ratio > 0 and rep.sup_ratio >= 1
    with pytest.raises(EmptyDomain):
        est.kernel_scan(sk, t, [1], 400)


def test_harnack_constant_function():
    Z = space.build_lattice(1, 101)
    H = np.ones((60, 1, Z.n))
    p = est.HarnackParams.default(0.99, 1.0, 1.0)
    res = est.harnack_ratio(H, Z, Z.center(), 16, est.psi_power(1.0), p)
    assert res.K0 == 1.0
    assert p.B == pytest.approx(3 / 0.99) and p.b >= 1 + 2 / p.B
    with pytest.raises(DegenerateCylinder):
        est.harnack_ratio(H, Z, Z.center(), 2, est.psi_power(1.0), p)


def test_harnack_on_subordinate(z1):
    Z, k = z1
    c = Z.center()
    sk = sub.subordinate(k, BernsteinFunction.stable(0.5), 24, rows=[c])
    p = est.HarnackParams.default(0.99, 1.0, 1.0)
    res = est.harnack_ratio(sk.H, Z, c, 16, est.psi_power(1.0), p)
    assert 1.0 <= res.K0 < 10
    assert res.N == est.harnack_depth(est.psi_power(1.0), 16, p)


def test_exit_profile_monotone():
    Z = space.build_lattice(1, 129)
    k = markov.average_two_step(markov.srw(Z))
    jk = sub.jump_kernel(k, BernsteinFunction.stable(0.5))
    ch = sub.jump_chain(Z, jk)
    out = est.exit_profile(ch, Z.center(), [2, 4, 8], est.psi_power(1.0))
    assert out["monotone"] and out["pass"] and out["width"] < 5
    with pytest.raises(ValueError):
        est.exit_profile(ch, Z.center(), [2, 4, 8], est.psi_power(1.0), horizon=10)


def test_tail_and_moment_checks(z1):
    Z, k = z1
    c = Z.center()
    sk = sub.subordinate(k, BernsteinFunction.stable(0.5), 8, rows=[c])
    def f2(r):
        return np.asarray(r, dtype=float) ** -2.0
    out = est.tail_estimate_check(sk, c, [1, 2, 4, 8], [2, 4, 8, 16], f2, s_max=64)
    assert out["holds"]
    m = est.truncated_moment_check(sk, c, 16, 4, est.Profile.power(2.0), s_max=64)
    assert m["holds"] and m["C1"] >= 1


def test_equivalence_probe(z1):
    Z, k = z1
    V = est.VolumeFunction(Z)
    f = est.Profile.power(2.0)
    sk = sub.subordinate(k, BernsteinFunction.stable(0.5), 1, rows=[Z.center()])
    res = est.equivalence_probe_thm6(sk, BernsteinFunction.stable(0.5), f, V, 32)
    assert res["scaling"]["regime_ok"] and res["one_step"].passed and res["consistent"]
    idn = BernsteinFunction.identity()
    ski = sub.subordinate(k, idn, 1, rows=[Z.center()])
    ri = est.equivalence_probe_thm6(ski, idn, f, V, 32)
    assert not ri["scaling"]["regime_ok"] and not ri["one_step"].passed
    assert ri["off_diagonal_zeros"] > 0 and ri["consistent"]


def test_levy_density_construction():
    psi, f = est.psi_power(1.0), est.Profile.power(2.0)
    phi, band = est.levy_density_for_psi(psi, f)
    assert phi(1.0) == pytest.approx(1.0, rel=1e-8)
    assert band["width"] < 20
    with pytest.raises(NotALevyMeasure):
        est.levy_density_for_psi(est.Profile.from_function(lambda r: np.log(2 + r), name="log"), f)
    with pytest.raises(NotALevyMeasure):
        est.levy_density_for_psi(est.Profile.from_function(lambda r: 1.0 / (1 + r), name="dec"), f)


def test_thm2_target_is_finite():
    Z = space.build_lattice(1, 101)
    t = est.Target("thm2", est.VolumeFunction(Z), phi=BernsteinFunction.stable(0.5), alpha=2.0)
    row = t.row(4, Z.center(), np.arange(0, 20))
    assert np.all(np.isfinite(row)) and np.all(row > 0)
    assert math.isclose(row[0], row[1]) or row[0] >= row[1]
