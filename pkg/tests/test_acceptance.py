"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned below. Criterion 7 (Green band for a recurrent
subordinate walk on Z) is expected to fail: the Green series diverges there,
and the test asserts the criterion as stated instead of hiding the failure.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from subkernel import bernstein as bern, estimates as est, markov, space, subordinate as sub
from subkernel.bernstein import BernsteinFunction
from subkernel.errors import NotConvergent

from _acceptance_log import record
from oracles import half_stable_exact

# pinned tolerances
WEIGHT_TOL = 1e-8
WEIGHT_SUM_TOL = 1e-12
WEIGHT_SECONDS = 1.0
LAPLACE_SLACK = 1e-8
TAIL_SLACK = 1e-12
POTENTIAL_BAND = (0.3655, 4.3003)
IDENTITY_TOL = 1e-15
DHK_C = 100.0
DHK_SECONDS = 300.0
GREEN_WIDTH = 100.0
EXIT_WIDTH = 50.0
HARNACK_SPREAD = 10.0
HARNACK_MAX = 1e4
POISSON_TAIL = 1e-10
POISSON_MASS_TOL = 1e-12
COROLLARY_SUP = 50.0
GAMMA_TOL = 0.05
C_V_MAX = 4.0
GASKET_GAMMA_TOL = 0.1


@pytest.fixture(scope="module")
def z1_2049():
    Z = space.build_lattice(1, 2049)
    return Z, markov.average_two_step(markov.srw(Z))


@pytest.fixture(scope="module")
def z1_1025():
    Z = space.build_lattice(1, 1025)
    return Z, markov.average_two_step(markov.srw(Z))


def test_c01_stable_half_weights():
    t0 = time.perf_counter()
    phi = BernsteinFunction.stable(0.5)
    w = bern.weights(phi, 20)
    q = bern.weights(phi, 20, method="quadrature")
    elapsed = time.perf_counter() - t0
    exact = half_stable_exact(20)
    err_closed = max(abs(Fraction(float(w.c[k])) - exact[k]) for k in range(1, 21))
    err_quad = max(abs(Fraction(float(q.c[k])) - exact[k]) for k in range(1, 21))
    total = abs(math.fsum(w.c) + w.tail_mass - 1.0)
    ok = float(max(err_closed, err_quad)) <= WEIGHT_TOL and total <= WEIGHT_SUM_TOL and elapsed < WEIGHT_SECONDS
    record(1, ok, f"max|c-exact| closed={float(err_closed):.2e} quadrature={float(err_quad):.2e}, "
                  f"|sum+tail-1|={total:.1e}, {elapsed:.3f}s")
    assert ok


def test_c02_laplace_identity():
    worst = -math.inf
    for a in (0.3, 0.5, 0.8):
        phi = BernsteinFunction.stable(a)
        w = bern.weights(phi, 4096)
        for lam in (0.1, 0.5, 1.0, 2.0):
            for n in (1, 2, 5, 10):
                direct, closed, tail = bern.laplace_Tn(w, phi, lam, n)
                worst = max(worst, abs(direct - closed) - tail - LAPLACE_SLACK)
    ok = worst <= 0
    record(2, ok, f"max(|direct-closed| - tail - 1e-8) = {worst:.2e}")
    assert ok


def test_c03_subordinator_tail_bound():
    radii = np.array([1.0] + [2.0 ** j for j in range(1, 14)])
    worst, wit = -math.inf, None
    for a in (0.3, 0.5, 0.8):
        phi = BernsteinFunction.stable(a)
        w = bern.weights(phi, 8192)
        T = bern.tail_table(w, 64, radii)
        for t in range(1, 65):
            for j, r in enumerate(radii):
                ub = min(1.0, bern.E_RATIO * t * float(bern.eval(phi, 1.0 / r)))
                if T[t - 1, j] - ub > worst:
                    worst, wit = T[t - 1, j] - ub, (a, t, float(r))
    ok = worst <= TAIL_SLACK
    record(3, ok, f"max(P(T_t>=r) - bound) = {worst:.2e} at alpha,t,r={wit}")
    assert ok


def test_c04_potential_measure_band():
    phi = BernsteinFunction.stable(0.5)
    xs = np.array([2.0 ** j for j in range(0, 11)])
    w = bern.weights(phi, 1024)
    prod = bern.potential_measure_table(w, xs) * np.asarray(bern.eval(phi, 1.0 / xs))
    ok = bool(np.all(prod >= POTENTIAL_BAND[0]) and np.all(prod <= POTENTIAL_BAND[1]))
    record(4, ok, f"U([0,x]) phi(1/x) in [{prod.min():.4f}, {prod.max():.4f}]")
    assert ok


def test_c05_identity_subordination(z1_1025):
    Z, k = z1_1025
    c = Z.center()
    rows = [c, c - 100, c + 300]
    sk = sub.subordinate(k, BernsteinFunction.identity(), 64, rows=rows)
    st = markov.n_step(k, 64, rows=rows)
    err = float(np.max(np.abs(sk.H - st.H)))
    ok = err <= IDENTITY_TOL
    record(5, ok, f"max|H_phi - H| = {err:.1e} for n<=64")
    assert ok


@pytest.mark.parametrize("alpha", [0.5, 0.75])
def test_c06_dhk_comparability(z1_2049, alpha):
    Z, k = z1_2049
    t0 = time.perf_counter()
    c = Z.center()
    sk = sub.subordinate(k, BernsteinFunction.stable(alpha), 128, rows=[c - 128, c, c + 128])
    target = est.Target("dheat", est.VolumeFunction(Z), psi=est.psi_power(2 * alpha))
    rep = est.kernel_scan(sk, target, np.arange(1, 129), 256, C_max=DHK_C)
    elapsed = time.perf_counter() - t0
    ok = rep.passed and rep.n_points > 0 and elapsed < DHK_SECONDS
    record(6, ok, f"alpha={alpha}: ratio in [{rep.inf_ratio:.3f}, {rep.sup_ratio:.3f}] over {rep.n_points} "
                  f"points, C={DHK_C:g}, {elapsed:.1f}s")
    assert ok


def test_c07_green_band_recurrent(z1_2049):
    # expected FAIL: for alpha = 1/2 on Z the subordinate walk is recurrent
    Z, k = z1_2049
    sk = sub.subordinate(k, BernsteinFunction.stable(0.5), 1, rows=[Z.center()], green=True)
    try:
        table = sub.green(sk)
    except NotConvergent as exc:
        table = exc.table
    target = est.Target("green", est.VolumeFunction(Z), psi=est.psi_power(1.0))
    rep = est.green_scan(table, target, Z, (1, 256), C_max=GREEN_WIDTH)
    ok = rep.passed and table.converged
    record(7, ok, f"converged={table.converged} block_ratio={table.block_ratio:.4f} "
                  f"band width={rep.width:.3g} (limit {GREEN_WIDTH:g}); series diverges in the recurrent case")
    assert ok


def test_c08_exit_band():
    Z = space.build_lattice(1, 257)
    k = markov.average_two_step(markov.srw(Z))
    ch = sub.jump_chain(Z, sub.jump_kernel(k, BernsteinFunction.stable(0.5)))
    prof = est.exit_profile(ch, Z.center(), [4, 8, 16, 32], est.psi_power(1.0), C_max=EXIT_WIDTH)
    ok = prof["width"] <= EXIT_WIDTH
    ratios = ", ".join(f"{r['ratio']:.3f}" for r in prof["rows"])
    record(8, ok, f"E[tau^H]/psi(r) = {ratios}; width {prof['width']:.3f}")
    assert ok


def test_c09_harnack(z1_1025):
    Z, k = z1_1025
    c = Z.center()
    psi = est.psi_power(1.0)
    params = est.HarnackParams.default(Z.r0, 1.0, 1.0)
    Rs = (16, 32, 64)
    depth = max(est.harnack_depth(psi, R, params) for R in Rs)
    sk = sub.subordinate(k, BernsteinFunction.stable(0.5), depth, rows=[c])
    K = [est.harnack_ratio(sk.H, Z, c, R, psi, params).K0 for R in Rs]
    spread = max(K) / min(K)
    ok = spread <= HARNACK_SPREAD and max(K) < HARNACK_MAX
    record(9, ok, f"K0(R=16,32,64) = {', '.join(f'{v:.3f}' for v in K)}; spread {spread:.2f}")
    assert ok


def test_c10_poissonization():
    Z = space.build_lattice(1, 257, "reflected")
    k = markov.average_two_step(markov.srw(Z))
    jk = sub.jump_kernel(k, BernsteinFunction.stable(0.5))
    ch = sub.jump_chain(Z, jk)
    c = Z.center()
    rows = [c, 3]
    worst_mass, worst_tail, worst_diag = 0.0, 0.0, math.inf
    for t in (0.5, 1.0, 2.0, 8.0):
        pk = sub.poissonize(ch, t, rows=rows)
        worst_tail = max(worst_tail, pk.tail)
        for i, x in enumerate(rows):
            mass = math.fsum(pk.p[i] * Z.mu)
            worst_mass = max(worst_mass, abs(mass - (1.0 - pk.tail)))
            worst_diag = min(worst_diag, pk.p[i, x] - math.exp(-t) * jk.J[x, x])
    ok = worst_tail <= POISSON_TAIL and worst_mass <= POISSON_MASS_TOL and worst_diag >= 0
    record(10, ok, f"max tail={worst_tail:.1e}, max|mass-(1-tail)|={worst_mass:.1e}, "
                   f"min(p(t;x,x) - e^-t J(x,x))={worst_diag:.3e}")
    assert ok


def test_c11_corollary_ratio():
    phi = BernsteinFunction.stable(0.5)
    w = bern.weights(phi, 1 << 15)
    out = bern.corollary3_check(w, phi, 1.0, np.arange(1, 65))
    ok = out["sup_ratio"] < COROLLARY_SUP
    record(11, ok, f"S(n)/(phi^-1(1/n))^(1/2) in [{out['inf_ratio']:.3f}, {out['sup_ratio']:.3f}] for n<=64")
    assert ok


def test_c12_volume_growth():
    cz = space.volume_certificate(space.build_lattice(1, 1025), window=(1, 256))
    cg = space.volume_certificate(space.build_gasket(5))
    dg = math.log(3) / math.log(2)
    ok = (abs(cz.gamma1 - 1) <= GAMMA_TOL and abs(cz.gamma2 - 1) <= GAMMA_TOL and cz.C_V <= C_V_MAX
          and abs(cg.gamma_fit - dg) <= GASKET_GAMMA_TOL)
    record(12, ok, f"Z1 gamma1={cz.gamma1:.3f} gamma2={cz.gamma2:.3f} C_V={cz.C_V:.3f}; "
                   f"gasket level 5 gamma={cg.gamma_fit:.4f} vs {dg:.4f}")
    assert ok


def test_c13_identity_fails_one_step_bound(z1_1025):
    Z, k = z1_1025
    idn = BernsteinFunction.identity()
    sk = sub.subordinate(k, idn, 1, rows=[Z.center()])
    res = est.equivalence_probe_thm6(sk, idn, est.Profile.power(2.0), est.VolumeFunction(Z), 32)
    rep = res["one_step"]
    ok = (not rep.passed) and res["off_diagonal_zeros"] > 0 and res["consistent"]
    record(13, ok, f"one-step band passed={rep.passed}, zero entries={res['off_diagonal_zeros']}, "
                   f"probe consistent={res['consistent']}")
    assert ok
