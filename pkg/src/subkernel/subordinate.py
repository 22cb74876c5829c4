"""Subordinate kernels, jump kernels, Poissonization and Green functions.

The subordinate density is ``h_phi(n) = sum_k P(T_n = k) h(k)``. It is built
by streaming the base powers ``P^k`` for the requested rows once and folding
them against a weight matrix whose rows are the laws of ``T_n`` (one extra
row per Green partial sum). Streaming stops at the first step where some row
has leaked more than ``leak_tol`` through the window boundary; the mass of
``T_n`` beyond that step is carried as an explicit error bound.

Bounds used here rely on mu-symmetry of the base chain: then
``h(k+1; x, y) = sum_z h(k; x, z) P(y, z) <= sup_z h(k; x, z)``, so the
row supremum of ``h(k)`` is nonincreasing in ``k`` and the discarded terms
are at most ``tail_n * sup_y h(K; x, y)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy import stats

from . import bernstein as bern
from . import kernels
from .errors import CutoffShapeError, InsufficientBaseDepth, NotConvergent
from .markov import Kernel, KernelStack

LEAK_TOL = 1e-9
DINI_RATIO = 0.95
DEFAULT_K = 1 << 15


def _default_K(phi, n_max):
    if phi is not None and phi.closed_form in ("identity", "user") or (
        phi is not None and phi.closed_form == "stable" and phi.alpha == 1.0
    ):
        return max(n_max, 1)
    return DEFAULT_K


@dataclass
class SubordinateKernel:
    """Subordinate densities on selected rows.

    ``H[n, i, y]`` is a lower estimate of ``h_phi(n; rows[i], y)`` and
    ``H[n, i, y] + err[n, i]`` an upper one. ``tails[n]`` is the mass of
    ``T_n`` beyond the last streamed step ``K_eff``.
    """

    base: Kernel
    weights: bern.SubordinatorWeights
    rows: np.ndarray
    H: np.ndarray
    err: np.ndarray
    tails: np.ndarray
    K_eff: int
    leak: np.ndarray
    sup: np.ndarray  # sup_y h(k; x, y) for k = 0..K_eff, per row
    phi: Optional[bern.BernsteinFunction] = None
    green_rows: Optional[np.ndarray] = None  # partial Green sums (excluding s = 0)
    green_N: Optional[np.ndarray] = None
    renewal: Optional[np.ndarray] = None

    @property
    def n_max(self):
        return self.H.shape[0] - 1

    def upper(self):
        return self.H + self.err[..., None]

    def row_index(self, x):
        hits = np.nonzero(self.rows == x)[0]
        if hits.size == 0:
            raise KeyError(f"vertex {x} not among the computed rows")
        return int(hits[0])

    def mass(self):
        """Row masses sum_y h_phi(n; x, y) mu(y) of the lower estimate."""
        return (self.H * self.base.mu[None, None, :]).sum(axis=2)


def subordinate(base: Kernel, phi, n_max: int, rows: Optional[Sequence[int]] = None,
                K: Optional[int] = None, leak_tol: float = LEAK_TOL,
                tail_tol: Optional[float] = None, green: bool = False,
                backend: Optional[str] = None) -> SubordinateKernel:
    """Subordinate ``base`` by ``phi`` (a BernsteinFunction or precomputed weights).

    Parameters
    ----------
    base : Kernel
        mu-symmetric base chain with a sparse one-step matrix.
    phi : BernsteinFunction or SubordinatorWeights
    n_max : int
        Largest subordinate time.
    rows : sequence of int, optional
        Starting vertices (all vertices by default).
    K : int, optional
        Largest base step considered; streaming may stop earlier on leakage.
    tail_tol : float, optional
        Raise :class:`InsufficientBaseDepth` if some ``T_n`` keeps more than
        this mass beyond the streamed depth.
    green : bool
        Also accumulate dyadic partial sums of ``sum_s u_s h(s)``.
    """
    if isinstance(phi, bern.SubordinatorWeights):
        w, phi_obj = phi, None
        Kw = w.K if K is None else min(int(K), w.K)
    else:
        phi_obj = phi
        Kw = int(K) if K is not None else _default_K(phi, n_max)
        w = bern.weights(phi, Kw)
    rows = np.arange(base.n) if rows is None else np.asarray(rows, dtype=np.int64)
    table, _ = bern.step_law_table(w, n_max, Kw)
    blocks = [table]
    green_N = None
    u = None
    if green:
        u = kernels.renewal_sequence(w.c[: Kw + 1], Kw)
        green_N = np.unique(np.concatenate([2 ** np.arange(0, int(math.log2(max(Kw, 1))) + 1), [Kw]]))
        G = np.zeros((green_N.size, Kw + 1))
        for j, N in enumerate(green_N):
            G[j, 1:N + 1] = u[1:N + 1]
        blocks.append(G)
    Wmat = np.ascontiguousarray(np.vstack(blocks))
    PT = base.transpose_csr()
    V0 = np.zeros((base.n, rows.size))
    V0[rows, np.arange(rows.size)] = 1.0
    impl = kernels if backend is None else kernels.get_backend(backend)
    acc, mass, sup, K_eff = impl.power_accumulate(PT, V0, Wmat, 1.0 / base.mu, leak_tol)
    mu = base.mu
    dens = np.transpose(acc, (0, 2, 1)) / mu[None, None, :]  # (q, m, N)
    H = dens[: n_max + 1]
    used = table[:, : K_eff + 1].sum(axis=1)
    tails = np.maximum(0.0, 1.0 - used)
    leak_K = np.maximum(0.0, 1.0 - mass[K_eff])
    mu_min = float(mu.min())
    err = tails[:, None] * (sup[K_eff][None, :] + leak_K[None, :] / mu_min) + leak_K[None, :] / mu_min
    if tail_tol is not None and np.any(tails > tail_tol):
        n_bad = int(np.argmax(tails > tail_tol))
        raise InsufficientBaseDepth(
            f"T_{n_bad} keeps mass {tails[n_bad]:.3e} beyond depth {K_eff} (tolerance {tail_tol:.1e})")
    if K_eff < n_max and K_eff < Kw:
        raise InsufficientBaseDepth(f"base chain leaked before step {n_max} (stopped at {K_eff})")
    sk = SubordinateKernel(base=base, weights=w, rows=rows, H=H, err=err, tails=tails, K_eff=int(K_eff),
                           leak=leak_K, sup=sup, phi=phi_obj)
    if green:
        sk.green_rows = dens[n_max + 1:]
        sk.green_N = green_N
        sk.renewal = u
    return sk


def subordinate_stack(stack: KernelStack, w: bern.SubordinatorWeights, n_max: int,
                      tail_tol: float = 1e-12) -> np.ndarray:
    """h_phi(0..n_max) from a precomputed base stack h(0..K).

    Raises :class:`InsufficientBaseDepth` when the law of some ``T_n`` puts
    more than ``tail_tol`` mass beyond the depth of the stack.
    """
    K = stack.n_max
    table, _ = bern.step_law_table(w, n_max, K)
    tails = 1.0 - table.sum(axis=1)
    if np.any(tails > tail_tol):
        n_bad = int(np.argmax(tails > tail_tol))
        raise InsufficientBaseDepth(f"T_{n_bad} has mass {tails[n_bad]:.3e} beyond base depth {K}")
    m, N = stack.H.shape[1:]
    out = (table @ stack.H.reshape(K + 1, m * N)).reshape(n_max + 1, m, N)
    return out


# -- spectral oracle -------------------------------------------------------------


class SpectralOperator:
    """Functional calculus for a mu-symmetric (sub)stochastic matrix.

    ``apply(g)`` returns the probability matrix
    ``M^{-1/2} U diag(g(lam)) U^T M^{1/2}``, where ``M^{1/2} P M^{-1/2} = U diag(lam) U^T``.
    """

    def __init__(self, base: Kernel):
        P = base.dense()
        s = np.sqrt(base.mu)
        A = (s[:, None] * P) / s[None, :]
        A = 0.5 * (A + A.T)
        self.lam, self.U = np.linalg.eigh(A)
        self.s = s
        self.base = base

    def apply(self, g: Callable) -> np.ndarray:
        vals = g(self.lam)
        B = (self.U * vals[None, :]) @ self.U.T
        return (B / self.s[:, None]) * self.s[None, :]

    def subordinate(self, phi, n: int) -> np.ndarray:
        """Probability matrix of h_phi(n), all base steps included."""
        lam = np.clip(self.lam, -1.0, 1.0)
        return self.apply(lambda l: (1.0 - np.asarray(bern.eval(phi, np.clip(1.0 - l, 0.0, None)))) ** n)

    def green(self, phi) -> np.ndarray:
        """sum_{n >= 0} h_phi(n) as a probability-weighted matrix (killed chains only)."""
        return self.apply(lambda l: 1.0 / np.asarray(bern.eval(phi, np.clip(1.0 - l, 0.0, None))))


@dataclass
class JumpKernel:
    J: np.ndarray  # density w.r.t. mu
    mu: np.ndarray
    symmetric_error: float
    row_mass: np.ndarray

    @property
    def probabilities(self):
        return self.J * self.mu[None, :]


def jump_kernel(source, phi=None) -> JumpKernel:
    """J = h_phi(1).

    ``source`` is a :class:`SubordinateKernel` covering every row, or a base
    :class:`Kernel` together with ``phi`` (spectral route, no truncation).
    """
    if isinstance(source, SubordinateKernel):
        if source.rows.size != source.base.n:
            raise ValueError("jump kernel needs every row; use the spectral route")
        J = source.H[1][np.argsort(source.rows)]
        mu = source.base.mu
    else:
        if phi is None:
            raise ValueError("phi is required with a base kernel")
        P = SpectralOperator(source).subordinate(phi, 1)
        P = np.maximum(P, 0.0)
        mu = source.mu
        J = P / mu[None, :]
    sym = float(np.max(np.abs(J - J.T))) if J.shape[0] == J.shape[1] else float("nan")
    mass = (J * mu[None, :]).sum(axis=1)
    return JumpKernel(J=J, mu=mu, symmetric_error=sym, row_mass=mass)


def jump_chain(space, jk: JumpKernel, name="jump") -> Kernel:
    """Kernel whose one-step density is ``jk.J``."""
    return Kernel(space, jk.probabilities, True, name)


# -- Poissonization --------------------------------------------------------------


@dataclass
class PoissonKernel:
    t: float
    rows: np.ndarray
    p: np.ndarray  # (m, N) densities
    tail: float  # Poisson mass beyond K
    K: int
    leak: np.ndarray


def poisson_depth(t: float, tol: float = 1e-10) -> int:
    """Smallest K >= t + 10 sqrt(t) with P(Poisson(t) > K) <= tol."""
    K = int(math.ceil(t + 10.0 * math.sqrt(t)))
    while stats.poisson.sf(K, t) > tol:
        K += 1
    return K


def poissonize(base: Kernel, t: float, K: Optional[int] = None, rows=None,
               leak_tol: float = 1.0) -> PoissonKernel:
    """p(t) = sum_{k <= K} h(k) e^{-t} t^k / k!, including the k = 0 term."""
    if t <= 0:
        raise ValueError("t must be positive")
    K = poisson_depth(t) if K is None else int(K)
    if K < t + 10 * math.sqrt(t):
        raise ValueError("K must be at least t + 10 sqrt(t)")
    rows = np.arange(base.n) if rows is None else np.asarray(rows, dtype=np.int64)
    wts = stats.poisson.pmf(np.arange(K + 1), t)[None, :]
    P = base.P if sp.issparse(base.P) else sp.csr_matrix(base.P)
    PT = sp.csr_matrix(P).T.tocsr()
    V0 = np.zeros((base.n, rows.size))
    V0[rows, np.arange(rows.size)] = 1.0
    acc, mass, _, K_eff = kernels.power_accumulate(PT, V0, np.ascontiguousarray(wts), 1.0 / base.mu, leak_tol)
    p = acc[0].T / base.mu[None, :]
    tail = float(stats.poisson.sf(K_eff, t))
    return PoissonKernel(t=t, rows=rows, p=p, tail=tail, K=int(K_eff), leak=1.0 - mass[K_eff])


# -- Green function --------------------------------------------------------------


@dataclass
class GreenTable:
    """Green function rows with the n = 0 atom kept apart.

    ``G[i, y]`` is the lower estimate of ``sum_{n >= 1} h_phi(n; rows[i], y)``
    and ``G + tail_bound[i]`` an upper one. ``partial[j]`` are the partial
    sums ``sum_{1 <= s <= N_j} u_s h(s)``.
    """

    rows: np.ndarray
    G: np.ndarray
    atom: np.ndarray  # 1/mu(x) at y = x
    tail_bound: np.ndarray
    N: np.ndarray
    partial: np.ndarray
    block_ratio: float
    converged: bool
    blocks: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def upper(self):
        return self.G + self.tail_bound[:, None]


def dyadic_blocks(values: np.ndarray):
    """Sums of ``values[s]`` over [2^j, 2^{j+1}) for complete blocks (s >= 1)."""
    out = []
    j = 0
    while (1 << (j + 1)) - 1 < values.size:
        out.append(float(values[1 << j: 1 << (j + 1)].sum()))
        j += 1
    return np.array(out)


def green(sk: SubordinateKernel, ratio_max: float = DINI_RATIO, raise_on_divergence: bool = True) -> GreenTable:
    """Green function from a kernel built with ``green=True``.

    Summability is decided by the ratio of the last two dyadic block sums of
    ``u_s sup_y h(s; x, y)``; below ``ratio_max`` the remaining tail is bounded
    by the geometric continuation ``B q / (1 - q)``.
    """
    if sk.green_rows is None:
        raise ValueError("subordinate(..., green=True) is required")
    u = sk.renewal[: sk.K_eff + 1]
    mu = sk.base.mu
    env = u[None, :] * sk.sup[: sk.K_eff + 1].T  # (m, K+1)
    ratios = []
    tails = []
    blocks_all = []
    for i in range(sk.rows.size):
        b = dyadic_blocks(env[i])
        blocks_all.append(b)
        if b.size < 3 or b[-2] <= 0:
            q = 0.0 if b.size and b[-1] == 0 else float("inf")
        else:
            q = float(max(b[-1] / b[-2], b[-2] / b[-3] if b[-3] > 0 else 0.0))
        ratios.append(q)
        tails.append(b[-1] * q / (1.0 - q) if q < 1 else float("inf"))
    q = float(max(ratios))
    converged = q < ratio_max
    leak_term = float(u.sum()) * sk.leak / mu.min()
    tail = np.asarray(tails) + leak_term
    N = np.minimum(sk.green_N, sk.K_eff)
    table = GreenTable(rows=sk.rows, G=sk.green_rows[-1], atom=1.0 / mu[sk.rows],
                       tail_bound=tail if converged else np.full(sk.rows.size, np.inf),
                       N=N, partial=sk.green_rows, block_ratio=q, converged=converged,
                       blocks=np.array(blocks_all[0]))
    if not converged and raise_on_divergence:
        exc = NotConvergent(
            f"dyadic block ratio {q:.3f} >= {ratio_max}: no evidence that the Green series converges",
            block_ratio=q)
        exc.table = table
        raise exc
    return table


# -- energy forms ----------------------------------------------------------------


def carre_du_champ(J: np.ndarray, mu: np.ndarray, f) -> np.ndarray:
    """Gamma[f]({x}) = 1/2 sum_y (f(x) - f(y))^2 J(x, y) mu(y) mu(x)."""
    f = np.asarray(f, dtype=float)
    D = (f[:, None] - f[None, :]) ** 2
    return 0.5 * (D * J * mu[None, :]).sum(axis=1) * mu


def cs_probe(J, mu, space, psi, x0, R, r, f, phi_cut, eps, C=None):
    """Evaluate both sides of the cut-off Sobolev inequality for one (f, cut-off).

    Returns a dict with ``lhs``, the energy and L2 pieces, ``C_threshold`` (the
    smallest C making the inequality hold for this pair) and, when ``C`` is
    given, ``rhs`` and ``satisfied``.
    """
    f = np.asarray(f, dtype=float)
    phi_cut = np.asarray(phi_cut, dtype=float)
    d = space.distances_from(x0)
    tol = 1e-12
    if np.any(phi_cut < -tol) or np.any(phi_cut > 1 + tol):
        raise CutoffShapeError("cut-off must take values in [0, 1]")
    if np.any(np.abs(phi_cut[d <= R] - 1.0) > tol):
        raise CutoffShapeError("cut-off must equal 1 on B(x0, R)")
    if np.any(np.abs(phi_cut[d > R + r]) > tol):
        raise CutoffShapeError("cut-off must vanish outside B(x0, R + r)")
    ball = d <= R + 2 * r
    gam = carre_du_champ(J, mu, phi_cut)
    lhs = float((f[ball] ** 2 * gam[ball]).sum())
    U = (d >= R) & (d <= R + r)
    Up = (d >= R - r) & (d <= R + 2 * r)
    D = (f[Up][:, None] - f[U][None, :]) ** 2
    energy = float((D * J[np.ix_(Up, U)] * mu[Up][:, None] * mu[U][None, :]).sum())
    l2 = float((f[ball] ** 2 * mu[ball]).sum())
    pr = float(psi(r))
    slack = lhs - eps * energy
    if slack <= 0:
        thr = 0.0
    elif l2 == 0:
        thr = float("inf")
    else:
        thr = slack * pr / l2
    out = {"lhs": lhs, "energy": energy, "l2": l2, "psi_r": pr, "eps": eps, "C_threshold": thr}
    if C is not None:
        rhs = eps * energy + C / pr * l2
        out.update(rhs=rhs, satisfied=bool(lhs <= rhs))
    return out


def linear_ramp(space, x0, R, r):
    """Cut-off equal to 1 on B(x0, R), 0 beyond R + r, linear in between."""
    d = space.distances_from(x0)
    return np.clip((R + r - d) / r, 0.0, 1.0)


# -- Monte Carlo ------------------------------------------------------------------


@dataclass
class MCResult:
    positions: np.ndarray  # (paths, steps); -1 killed, -2 subordinator truncated
    times: np.ndarray
    x0: int

    @property
    def n_paths(self):
        return self.positions.shape[0]

    def exit_times(self, space, r):
        """First n >= 1 with d(S_n, x0) > r (killing counts as exit); -1 if none."""
        d = np.where(self.positions >= 0, 0.0, np.inf)
        alive = self.positions >= 0
        d[alive] = space.distances_from(self.x0)[self.positions[alive]]
        out = d > r
        first = np.where(out.any(axis=1), out.argmax(axis=1) + 1, -1)
        return first

    def tail(self, space, n, r):
        """Estimate of P(d(S_n, x0) >= r) with its binomial standard error."""
        pos = self.positions[:, n - 1]
        alive = pos >= 0
        d = np.full(pos.size, np.inf)
        d[alive] = space.distances_from(self.x0)[pos[alive]]
        hits = float(np.mean(d >= r))
        return hits, math.sqrt(max(hits * (1 - hits), 1e-300) / pos.size)

    def subordinator_tail(self, t, r):
        T = self.times[:, t - 1]
        hits = float(np.mean((T >= r) | (T < 0)))
        return hits, math.sqrt(max(hits * (1 - hits), 1e-300) / T.size)


def _csr_arrays(base: Kernel):
    P = sp.csr_matrix(base.P)
    P.sort_indices()
    indptr = P.indptr.astype(np.int64)
    indices = P.indices.astype(np.int64)
    cum = np.empty(P.data.size)
    for i in range(P.shape[0]):
        a, b = indptr[i], indptr[i + 1]
        cum[a:b] = np.cumsum(P.data[a:b])
    return indptr, indices, cum


def mc_sample(base: Kernel, w: bern.SubordinatorWeights, x0: int, n_steps: int, n_paths: int,
              seed: int, workers: int = 1, backend: Optional[str] = None) -> MCResult:
    """Simulate the subordinate chain from ``x0``.

    Each worker gets its own stream from ``SeedSequence(seed).spawn``; for
    fixed ``(seed, workers)`` the output is deterministic.
    """
    cdf = np.cumsum(w.c)
    indptr, indices, cum = _csr_arrays(base)
    impl = kernels if backend is None else kernels.get_backend(backend)
    seqs = np.random.SeedSequence(seed).spawn(workers)
    counts = [n_paths // workers + (1 if i < n_paths % workers else 0) for i in range(workers)]

    def job(i):
        rng = np.random.Generator(np.random.PCG64(seqs[i]))
        return impl.sample_paths(cdf, indptr, indices, cum, int(x0), int(n_steps), counts[i], rng)

    if workers == 1:
        parts = [job(0)]
    else:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(job, range(workers)))
    pos = np.concatenate([p[0] for p in parts])
    times = np.concatenate([p[1] for p in parts])
    return MCResult(pos, times, int(x0))
