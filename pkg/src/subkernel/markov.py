"""Base chains, exact n-step kernels and absorbing-chain dynamic programming.

A :class:`Kernel` holds the one-step transition *probabilities* ``P``; the
density with respect to the vertex measure is ``h(1; x, y) = P(x, y) / mu(y)``.
On truncated lattice windows ``P`` is substochastic and the missing row mass
is the probability of having left the window.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BoundaryContamination, IsolatedVertex, MemoryBudgetExceeded
from .space import DiscreteSpace

MEMORY_BUDGET = 1 << 30  # bytes
DENSE_LIMIT = 4096


@dataclass
class Kernel:
    """One-step transition probabilities on a :class:`DiscreteSpace`."""

    space: DiscreteSpace
    P: object  # scipy.sparse.csr_matrix or ndarray
    symmetric: bool = True
    name: str = "kernel"
    range_: Optional[float] = None  # max jump length, if bounded

    @property
    def n(self):
        return self.space.n

    @property
    def mu(self):
        return self.space.mu

    @property
    def is_sparse(self):
        return sp.issparse(self.P)

    def dense(self) -> np.ndarray:
        return self.P.toarray() if self.is_sparse else np.asarray(self.P)

    def density(self) -> np.ndarray:
        """h(1; x, y) as a dense matrix."""
        return self.dense() / self.mu[None, :]

    def row_mass(self) -> np.ndarray:
        return np.asarray(self.P.sum(axis=1)).ravel()

    def transpose_csr(self):
        return sp.csr_matrix(self.P).T.tocsr()

    def step(self, v):
        """Row-vector step ``v -> v P`` for one or several (stacked) rows."""
        if self.is_sparse:
            return (self.P.T @ np.asarray(v).T).T
        return np.asarray(v) @ self.P


def srw(space: DiscreteSpace) -> Kernel:
    """Simple random walk: ``P(x, y) = w(x, y) / deg_w(x)``.

    On lattice windows every ambient neighbour gets ``1 / (2d)``; a move that
    would leave the window is killed (``truncated``) or replaced by staying put
    (``reflected``).
    """
    W = space.weights
    if space.kind == "lattice":
        deg = np.diff(W.indptr)
        if np.any(deg == 0):
            raise IsolatedVertex("lattice window has isolated vertices")
        P = W.multiply(1.0 / space.ambient_degree).tocsr()
        if space.boundary_policy == "reflected":
            missing = 1.0 - np.asarray(P.sum(axis=1)).ravel()
            P = (P + sp.diags(missing)).tocsr()
        return Kernel(space, P, True, f"srw[{space.name}]", range_=1.0)
    dw = np.asarray(W.sum(axis=1)).ravel()
    if np.any(dw == 0):
        bad = np.nonzero(dw == 0)[0]
        raise IsolatedVertex(f"vertices without neighbours: {bad[:5].tolist()}")
    P = sp.diags(1.0 / dw) @ W
    # mu-symmetric iff mu is proportional to the weighted degree
    ratio = space.mu / dw
    symmetric = bool(np.allclose(ratio, ratio[0], rtol=1e-12))
    return Kernel(space, sp.csr_matrix(P), symmetric, f"srw[{space.name}]", range_=1.0)


def average_two_step(k: Kernel) -> Kernel:
    """The averaged chain ``1/2 P + 1/2 P^2`` (aperiodic, same symmetry)."""
    P = k.P
    P2 = P @ P
    Q = 0.5 * P + 0.5 * P2
    Q = sp.csr_matrix(Q) if sp.issparse(Q) else Q
    rng = None if k.range_ is None else 2 * k.range_
    return Kernel(k.space, Q, k.symmetric, f"avg[{k.name}]", range_=rng)


def lazy(k: Kernel, q: float) -> Kernel:
    """``q I + (1 - q) P``."""
    if not 0 <= q < 1:
        raise ValueError("laziness must lie in [0, 1)")
    I = sp.identity(k.n, format="csr") if k.is_sparse else np.eye(k.n)
    Q = q * I + (1 - q) * k.P
    return Kernel(k.space, sp.csr_matrix(Q) if k.is_sparse else Q, k.symmetric,
                  f"lazy{q:g}[{k.name}]", k.range_)


def from_probabilities(space: DiscreteSpace, P, symmetric=True, name="custom") -> Kernel:
    return Kernel(space, P, symmetric, name)


@dataclass
class KernelStack:
    """Densities ``h(n; x, y)`` for n = 0..n_max on selected rows.

    ``H[n, i, y]`` is the density from ``rows[i]``; ``leak[n, i]`` is the mass
    lost through the window boundary by time n.
    """

    kernel: Kernel
    rows: np.ndarray
    H: np.ndarray
    leak: np.ndarray

    @property
    def n_max(self):
        return self.H.shape[0] - 1

    def probabilities(self, n):
        return self.H[n] * self.kernel.mu[None, :]

    def row_index(self, x):
        hits = np.nonzero(self.rows == x)[0]
        if hits.size == 0:
            raise KeyError(f"vertex {x} not among the computed rows")
        return int(hits[0])


def n_step(k: Kernel, n_max: int, rows: Optional[Sequence[int]] = None,
           budget: int = MEMORY_BUDGET) -> KernelStack:
    """Exact densities h(0..n_max) by repeated multiplication.

    With ``rows=None`` every row is kept (dense stack); otherwise only the
    given centers are propagated ("center slice").
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    rows = np.arange(k.n) if rows is None else np.asarray(rows, dtype=np.int64)
    need = (n_max + 1) * rows.size * k.n * 8
    if need > budget:
        raise MemoryBudgetExceeded(f"kernel stack needs {need / 2**20:.0f} MiB > budget {budget / 2**20:.0f} MiB")
    H = np.empty((n_max + 1, rows.size, k.n))
    V = np.zeros((rows.size, k.n))
    V[np.arange(rows.size), rows] = 1.0
    inv = 1.0 / k.mu
    leak = np.zeros((n_max + 1, rows.size))
    H[0] = V * inv
    for n in range(1, n_max + 1):
        V = k.step(V)
        H[n] = V * inv
        leak[n] = 1.0 - V.sum(axis=1)
    return KernelStack(k, rows, H, leak)


def chapman_kolmogorov_error(stack: KernelStack, m: int, n: int) -> float:
    """max |h(m+n) - h(m) mu h(n)| on the rows of a full stack."""
    if stack.rows.size != stack.kernel.n:
        raise ValueError("needs a full stack")
    mu = stack.kernel.mu
    lhs = stack.H[m + n]
    rhs = (stack.H[m] * mu[None, :]) @ stack.H[n]
    return float(np.max(np.abs(lhs - rhs)))


def _ball_check(k: Kernel, x0, r, what="ball"):
    sp_ = k.space
    if not sp_.is_interior(x0, r):
        raise BoundaryContamination(f"{what} B({x0}, {r}) touches the window boundary")


def _restricted(k: Kernel, idx):
    P = k.P
    if sp.issparse(P):
        return sp.csr_matrix(P)[idx][:, idx]
    return np.asarray(P)[np.ix_(idx, idx)]


@dataclass
class ExitResult:
    survival: np.ndarray  # P(tau > n), n = 0..horizon
    expected_truncated: float  # E[tau ^ horizon]
    expected_exact: Optional[float]  # E[tau] from a linear solve, when feasible
    ball_size: int

    @property
    def truncation_bias(self):
        """Upper bound on E[tau] - E[tau ^ horizon] from geometric decay of the survival."""
        s = self.survival
        if s[-1] == 0:
            return 0.0
        H = s.size - 1
        half = max(1, H // 2)
        rate = (s[-1] / s[half]) ** (1.0 / (H - half)) if s[half] > 0 else 0.0
        if rate >= 1:
            return float("inf")
        return float(s[-1] * rate / (1 - rate))


def exit_time_dp(k: Kernel, x0: int, r: float, horizon: int, check_boundary=True, solve=True) -> ExitResult:
    """Survival probabilities and E[tau ^ horizon] for the exit from B(x0, r)."""
    if check_boundary:
        _ball_check(k, x0, r)
    idx = k.space.ball(x0, r)
    Q = _restricted(k, idx)
    v = np.zeros(idx.size)
    v[np.nonzero(idx == x0)[0][0]] = 1.0
    surv = np.empty(horizon + 1)
    surv[0] = 1.0
    QT = Q.T.tocsr() if sp.issparse(Q) else Q.T
    for n in range(1, horizon + 1):
        v = QT @ v
        surv[n] = v.sum()
    expected = float(np.sum(surv[:horizon]))
    exact = None
    if solve and idx.size <= 20000:
        A = (sp.identity(idx.size, format="csc") - sp.csc_matrix(Q)) if sp.issparse(Q) else np.eye(idx.size) - Q
        b = np.ones(idx.size)
        try:
            t = spla.spsolve(A, b) if sp.issparse(A) else np.linalg.solve(A, b)
            exact = float(t[np.nonzero(idx == x0)[0][0]])
        except (np.linalg.LinAlgError, RuntimeError):
            exact = None
    return ExitResult(surv, expected, exact, int(idx.size))


def hitting_time_dp(k: Kernel, target_center: int, target_r: float, start: int, horizon: int,
                    check_boundary=True) -> np.ndarray:
    """P(T <= n), n = 0..horizon, for the first visit to B(target_center, target_r)."""
    if check_boundary:
        _ball_check(k, target_center, target_r, "target")
    target = np.zeros(k.n, dtype=bool)
    target[k.space.ball(target_center, target_r)] = True
    out = np.zeros(horizon + 1)
    if target[start]:
        out[:] = 1.0
        return out
    v = np.zeros(k.n)
    v[start] = 1.0
    hit = 0.0
    for n in range(1, horizon + 1):
        v = k.step(v)
        hit += v[target].sum()
        v[target] = 0.0
        out[n] = hit
    return out


def tail_probability(source, x0: int, n: int, r: float) -> float:
    """P^x0(d(S_n, x0) >= r), from a :class:`KernelStack` or a :class:`Kernel`."""
    if isinstance(source, KernelStack):
        i = source.row_index(x0)
        p = source.probabilities(n)[i]
        sp_ = source.kernel.space
    else:
        v = np.zeros(source.n)
        v[x0] = 1.0
        for _ in range(n):
            v = source.step(v)
        p = v
        sp_ = source.space
    d = sp_.distances_from(x0)
    return float(p[d >= r].sum())


def export_csv(stack: KernelStack, path, n_values=None):
    """Write rows ``n, x, y, h, d`` for every stored row and time."""
    n_values = range(stack.n_max + 1) if n_values is None else n_values
    sp_ = stack.kernel.space
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "x", "y", "h", "d"])
        for i, x in enumerate(stack.rows):
            d = sp_.distances_from(x)
            for n in n_values:
                h = stack.H[n, i]
                for y in np.nonzero(h)[0]:
                    w.writerow([n, int(x), int(y), repr(float(h[y])), int(d[y])])
