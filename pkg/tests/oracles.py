"""Independent reference values used by the tests.

Nothing here calls into ``subkernel``: every oracle is derived from a
different route (symbolic calculus, Fourier integrals, exact combinatorics).
"""

from fractions import Fraction
import math

import numpy as np
import sympy
from scipy import integrate


def symbolic_weights(alpha, K, phi_expr=None):
    """c(k) = |phi^(k)(1)| / k! by symbolic differentiation (default phi = u^alpha)."""
    u = sympy.Symbol("u", positive=True)
    f = u ** sympy.nsimplify(alpha) if phi_expr is None else phi_expr(u)
    out = [0.0]
    d = f
    for k in range(1, K + 1):
        d = sympy.diff(d, u)
        out.append(float(abs(d.subs(u, 1)) / sympy.factorial(k)))
    return np.array(out)


def half_stable_exact(K):
    """c(k) for alpha = 1/2 as exact fractions: |binom(1/2, k)|."""
    out = [Fraction(0)]
    b = Fraction(1)
    a = Fraction(1, 2)
    for k in range(1, K + 1):
        b = b * (a - k + 1) / k
        out.append(abs(b))
    return out


def half_stable_renewal(S):
    """u_s for alpha = 1/2: 1/phi(1 - z) = (1 - z)^{-1/2}, so u_s = binom(2s, s) / 4^s."""
    return np.array([math.comb(2 * s, s) / 4.0 ** s for s in range(S + 1)])


def averaged_char(theta):
    """Characteristic function of the averaged SRW step on Z: (cos + cos^2) / 2."""
    c = np.cos(theta)
    return 0.5 * c + 0.5 * c * c


def averaged_gap(theta):
    """1 - averaged_char(theta) without cancellation: (1 - cos)(2 + cos) / 2."""
    s = math.sin(0.5 * theta)
    return s * s * (2.0 + math.cos(theta))


def z1_subordinate_fourier(alpha, n, x, gap=averaged_gap):
    """h_phi(n; 0, x) on the infinite lattice Z (counting measure), phi = u^alpha."""
    def g(t):
        return (1.0 - gap(t) ** alpha) ** n * math.cos(x * t)

    val, _ = integrate.quad(g, 0.0, math.pi, limit=400, epsabs=1e-14, epsrel=1e-11)
    return val / math.pi


def z1_green_fourier(alpha, x, gap=averaged_gap):
    """G(0, x) = sum_{n >= 0} h_phi(n; 0, x) = (1/pi) int_0^pi cos(x t) / (1 - lam)^alpha dt."""
    def g(t):
        return math.cos(x * t) / gap(t) ** alpha

    # integrable singularity at t = 0 for alpha < 1/2
    pts = [1e-8, 1e-4, 1e-2]
    val, _ = integrate.quad(g, 0.0, math.pi, points=pts, limit=2000, epsabs=1e-13, epsrel=1e-10)
    return val / math.pi


def srw_binomial(n, x):
    """P(S_n = x) for the simple random walk on Z."""
    if (n + x) % 2 or abs(x) > n:
        return 0.0
    return math.comb(n, (n + x) // 2) / 2.0 ** n


def averaged_step_dist(n, side):
    """Distribution after n averaged steps from the center of an infinite line (numpy convolution)."""
    step = np.zeros(5)
    # 1/2 * (SRW one step) + 1/2 * (SRW two steps)
    step[1] += 0.25
    step[3] += 0.25
    step[0] += 0.125
    step[2] += 0.25
    step[4] += 0.125
    dist = np.zeros(1)
    dist[0] = 1.0
    for _ in range(n):
        dist = np.convolve(dist, step)
    return dist  # index j corresponds to displacement j - 2n


def gasket_vertex_count(level):
    return 3 * (3 ** level + 1) // 2


def gasket_edge_count(level):
    return 3 ** (level + 1)
