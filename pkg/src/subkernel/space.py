"""Discrete metric measure spaces: lattice windows, gasket graphs, edge lists.

Balls are closed, ``B(x, r) = {y : d(x, y) <= r}``, and ``V(x, r)`` is their
measure. Distances are integers (graph distance), so every ball of radius below
``r0 = 0.99`` is a single vertex.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.special import comb

from .errors import DisconnectedGraphWarning, ParseError, SizeOverflow

VERTEX_BUDGET = 4_000_000
GASKET_MAX_LEVEL = 10


class DiscreteSpace:
    """Finite vertex set with a graph metric and a positive measure.

    Parameters
    ----------
    weights : scipy.sparse matrix
        Symmetric nonnegative edge weights (no self loops).
    mu : ndarray
        Vertex measure, strictly positive.
    kind : str
        ``'lattice'``, ``'gasket'`` or ``'graph'``.
    coords : ndarray, optional
        Integer coordinates (lattices use them for fast l1 distances).
    boundary_policy : {'truncated', 'reflected'}
        Only meaningful for lattice windows.
    """

    def __init__(self, weights, mu, kind="graph", coords=None, r0=0.99,
                 boundary_policy="truncated", dim=None, side=None, labels=None, name=""):
        W = sp.csr_matrix(weights, dtype=float)
        W.eliminate_zeros()
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (W.shape[0],):
            raise ValueError("measure must have one entry per vertex")
        if np.any(mu <= 0):
            raise ValueError("the measure must charge every vertex")
        if boundary_policy not in ("truncated", "reflected"):
            raise ValueError(f"unknown boundary policy {boundary_policy!r}")
        self.weights = W
        self.mu = mu
        self.kind = kind
        self.coords = None if coords is None else np.asarray(coords, dtype=np.int64)
        self.r0 = float(r0)
        self.boundary_policy = boundary_policy
        self.dim = dim
        self.side = side
        self.labels = labels
        self.name = name or kind
        self._rows = {}
        self._lock = threading.Lock()
        ncomp = csgraph.connected_components(W, directed=False, return_labels=False)
        self.connected = ncomp == 1
        self.n_components = int(ncomp)

    # -- basic queries ---------------------------------------------------------

    @property
    def n(self):
        return self.mu.size

    @property
    def degree(self):
        """Number of neighbours of each vertex."""
        return np.diff(self.weights.indptr)

    @property
    def weighted_degree(self):
        return np.asarray(self.weights.sum(axis=1)).ravel()

    @property
    def n_edges(self):
        return int(self.weights.nnz // 2)

    @property
    def ambient_degree(self):
        return 2 * self.dim if self.kind == "lattice" else None

    def distances_from(self, x: int) -> np.ndarray:
        """Graph distances from ``x`` to every vertex (inf if unreachable)."""
        x = int(x)
        if self.kind == "lattice":
            return np.abs(self.coords - self.coords[x]).sum(axis=1).astype(float)
        with self._lock:
            row = self._rows.get(x)
        if row is None:
            row = csgraph.shortest_path(self.weights, directed=False, unweighted=True, indices=x)
            with self._lock:
                self._rows[x] = row
        return row

    def distance(self, x: int, y: int) -> float:
        return float(self.distances_from(x)[int(y)])

    def ball(self, x: int, r: float) -> np.ndarray:
        return np.nonzero(self.distances_from(x) <= r)[0]

    def ball_size(self, x: int, r: float) -> int:
        return int(np.count_nonzero(self.distances_from(x) <= r))

    def volume(self, x: int, r: float) -> float:
        d = self.distances_from(x)
        return float(self.mu[d <= r].sum())

    def volume_profile(self, x: int, radii) -> np.ndarray:
        """V(x, r) for several radii from one distance row."""
        d = self.distances_from(x)
        order = np.argsort(d, kind="stable")
        cum = np.cumsum(self.mu[order])
        pos = np.searchsorted(d[order], np.asarray(radii, dtype=float), side="right")
        return np.where(pos > 0, cum[np.maximum(pos - 1, 0)], 0.0)

    def ambient_volume(self, r) -> np.ndarray:
        """Counting-measure volume of an l1 ball in Z^d (lattices only)."""
        if self.kind != "lattice":
            raise ValueError("ambient volume is defined for lattice windows")
        return lattice_ball_volume(self.dim, r)

    # -- windows ---------------------------------------------------------------

    def boundary_vertices(self) -> np.ndarray:
        """Lattice vertices missing at least one ambient neighbour."""
        if self.kind != "lattice":
            return np.zeros(0, dtype=np.int64)
        c = self.coords
        return np.nonzero(np.any((c == 0) | (c == self.side - 1), axis=1))[0]

    def interior(self, R: float) -> np.ndarray:
        """Vertices whose closed ball of radius ``R`` avoids the window boundary.

        A level-n gasket is treated as the window of the infinite one-sided
        gasket anchored at its first corner: a ball is exact when it stays at
        distance below 2^n from that corner.
        """
        if self.kind == "gasket":
            d0 = self.distances_from(self.corners[0])
            return np.nonzero(d0 + R < self.extent)[0]
        if self.kind != "lattice":
            return np.arange(self.n)
        m = int(math.floor(R)) + 1
        c = self.coords
        ok = np.all((c >= m) & (c <= self.side - 1 - m), axis=1)
        return np.nonzero(ok)[0]

    def is_interior(self, x: int, R: float) -> bool:
        if self.kind == "gasket":
            return bool(self.distances_from(self.corners[0])[int(x)] + R < self.extent)
        if self.kind != "lattice":
            return True
        m = int(math.floor(R)) + 1
        c = self.coords[int(x)]
        return bool(np.all((c >= m) & (c <= self.side - 1 - m)))

    def index_of(self, coord: Sequence[int]) -> int:
        """Vertex index of a lattice coordinate tuple."""
        coord = np.asarray(coord, dtype=np.int64)
        if np.any(coord < 0) or np.any(coord >= self.side):
            raise IndexError("coordinate outside the window")
        idx = 0
        for c in coord:
            idx = idx * self.side + int(c)
        return idx

    def center(self) -> int:
        if self.kind == "lattice":
            return self.index_of([self.side // 2] * self.dim)
        return 0

    def __repr__(self):
        return f"DiscreteSpace({self.name!r}, n={self.n}, edges={self.n_edges})"


def lattice_ball_volume(d: int, r):
    """#{z in Z^d : |z|_1 <= r} = sum_k 2^k C(d, k) C(floor(r), k)."""
    r = np.asarray(r, dtype=float)
    m = np.floor(np.maximum(r, -1)).astype(np.int64)
    out = np.zeros(r.shape)
    for k in range(d + 1):
        out += (2.0 ** k) * comb(d, k, exact=False) * comb(np.maximum(m, 0), k, exact=False)
    out = np.where(m < 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def build_lattice(d: int, side: int, boundary_policy: str = "truncated",
                  budget: int = VERTEX_BUDGET) -> DiscreteSpace:
    """Box ``{0, ..., side-1}^d`` of Z^d with counting measure."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if side < 3:
        raise ValueError("side must be >= 3")
    if side ** d > budget:
        raise SizeOverflow(f"{side}^{d} vertices exceeds the budget {budget}")
    N = side ** d
    coords = np.array(np.unravel_index(np.arange(N), (side,) * d)).T
    rows, cols = [], []
    stride = 1
    for axis in reversed(range(d)):
        ok = coords[:, axis] < side - 1
        a = np.nonzero(ok)[0]
        rows.append(a)
        cols.append(a + stride)
        stride *= side
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    W = sp.coo_matrix((np.ones(2 * r.size), (np.r_[r, c], np.r_[c, r])), shape=(N, N)).tocsr()
    return DiscreteSpace(W, np.ones(N), kind="lattice", coords=coords, r0=0.99,
                         boundary_policy=boundary_policy, dim=d, side=side,
                         name=f"Z{d}[{side}]")


def build_gasket(level: int, max_level: int = GASKET_MAX_LEVEL) -> DiscreteSpace:
    """Pre-Sierpinski gasket graph of the given level, measure = degree.

    Vertices live on the triangular lattice ``{(a, b) : a, b >= 0, a + b <= 2^level}``;
    level 0 is a single triangle.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    if level > max_level:
        raise SizeOverflow(f"gasket level {level} exceeds cap {max_level}")
    cells = np.zeros((1, 2), dtype=np.int64)
    for j in range(level):
        s = 1 << j
        cells = np.concatenate([cells, cells + [s, 0], cells + [0, s]])
    tri = np.stack([cells, cells + [1, 0], cells + [0, 1]], axis=1)  # (m, 3, 2)
    pts = tri.reshape(-1, 2)
    uniq, inv = np.unique(pts, axis=0, return_inverse=True)
    inv = inv.reshape(-1, 3)
    e = np.concatenate([inv[:, [0, 1]], inv[:, [1, 2]], inv[:, [0, 2]]])
    N = uniq.shape[0]
    W = sp.coo_matrix((np.ones(2 * e.shape[0]), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                      shape=(N, N)).tocsr()
    W.data[:] = 1.0  # edges are shared by at most one cell, but be safe
    deg = np.diff(W.indptr).astype(float)
    sp_ = DiscreteSpace(W, deg, kind="gasket", coords=uniq, r0=0.99, name=f"gasket[{level}]")
    sp_.corners = [int(np.nonzero((uniq == c).all(axis=1))[0][0])
                   for c in ([0, 0], [1 << level, 0], [0, 1 << level])]
    sp_.extent = float(1 << level)
    return sp_


def load_edge_list(path, default_weight: float = 1.0) -> DiscreteSpace:
    """Read ``u v w`` edge lines and optional ``m u mu`` measure lines.

    Blank lines and ``#`` comments are ignored. Without measure lines the
    measure is the weighted degree.
    """
    labels = {}
    edges = []
    measures = {}

    def vid(tok):
        if tok not in labels:
            labels[tok] = len(labels)
        return labels[tok]

    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "m":
                if len(parts) != 3:
                    raise ParseError(lineno, "measure line must be 'm <vertex> <mass>'")
                try:
                    m = float(parts[2])
                except ValueError:
                    raise ParseError(lineno, f"bad measure {parts[2]!r}") from None
                if not m > 0:
                    raise ParseError(lineno, "vertex measure must be positive")
                measures[vid(parts[1])] = m
                continue
            if len(parts) not in (2, 3):
                raise ParseError(lineno, "edge line must be '<u> <v> [<w>]'")
            try:
                w = float(parts[2]) if len(parts) == 3 else default_weight
            except ValueError:
                raise ParseError(lineno, f"bad weight {parts[2]!r}") from None
            if not w > 0:
                raise ParseError(lineno, "edge weight must be positive")
            if parts[0] == parts[1]:
                raise ParseError(lineno, "self loops are not supported")
            edges.append((vid(parts[0]), vid(parts[1]), w))
    N = len(labels)
    if N == 0:
        raise ParseError(0, "no vertices")
    if edges:
        u, v, w = (np.array(x) for x in zip(*edges))
        W = sp.coo_matrix((np.r_[w, w], (np.r_[u, v], np.r_[v, u])), shape=(N, N)).tocsr()
    else:
        W = sp.csr_matrix((N, N))
    deg = np.asarray(W.sum(axis=1)).ravel()
    mu = deg.copy()
    for k, m in measures.items():
        mu[k] = m
    if np.any(mu <= 0):
        bad = [lab for lab, k in labels.items() if mu[k] <= 0]
        raise ParseError(0, f"vertices without edges or measure: {bad[:5]}")
    names = [None] * N
    for lab, k in labels.items():
        names[k] = lab
    space = DiscreteSpace(W, mu, kind="graph", labels=names, name=str(path))
    if not space.connected:
        warnings.warn(f"{path}: graph has {space.n_components} components",
                      DisconnectedGraphWarning, stacklevel=2)
    return space


# -- volume certificates -------------------------------------------------------


@dataclass
class VolumeCertificate:
    C_V: float
    gamma1: float
    gamma2: float
    window: tuple
    upper_violation: float
    lower_violation: float
    gamma_fit: float
    centers: list = field(default_factory=list)
    radii: list = field(default_factory=list)

    def to_dict(self):
        return {
            "C_V": self.C_V, "gamma1": self.gamma1, "gamma2": self.gamma2,
            "window": list(self.window), "upper_violation": self.upper_violation,
            "lower_violation": self.lower_violation, "gamma_fit": self.gamma_fit,
            "n_centers": len(self.centers), "n_radii": len(self.radii),
        }


def _sample_centers(space, sample_x, r_max):
    if sample_x is None:
        if space.kind == "gasket":
            # the anchor corner: its balls are exact for every radius of the window
            return np.array([space.corners[0]], dtype=np.int64)
        sample_x = 8
    pool = space.interior(r_max) if space.boundary_policy == "truncated" else np.arange(space.n)
    if space.kind == "gasket":
        pool = np.union1d(pool, [space.corners[0]])
    if pool.size == 0:
        raise ValueError("no interior centers for this window")
    if isinstance(sample_x, (list, tuple, np.ndarray)):
        return np.asarray(sample_x, dtype=np.int64)
    k = min(int(sample_x), pool.size)
    return pool[np.linspace(0, pool.size - 1, k).round().astype(int)]


def volume_certificate(space: DiscreteSpace, sample_x=None, window=(1.0, None), n_radii=48):
    """Doubling and reverse-doubling certificate on a radius window.

    Exponents are the extreme secant slopes of log V against log r over pairs
    with ``R >= 2 r`` in the upper half (in log scale) of the window; ``C_V`` is
    then the smallest constant making both inequalities hold on the whole
    grid (the lower one only for ``r >= r0``). ``gamma_fit`` is the pooled
    least-squares slope over the dyadic radii of the upper half, which keeps
    the log-periodic wiggle of self-similar graphs out of the fit.

    ``sample_x`` is a count of evenly spread interior centers or an explicit
    list; by default 8 centers (lattices, graphs) or the anchor corner (gaskets).
    """
    r_min, r_max = window
    if r_max is None:
        if space.kind == "lattice":
            r_max = float((space.side - 1) // 4)
        elif space.kind == "gasket":
            r_max = space.extent / 2
        else:
            r_max = float(np.max(space.distances_from(0)[np.isfinite(space.distances_from(0))]))
    r_min = max(float(r_min), space.r0)
    centers = _sample_centers(space, sample_x, r_max)
    # distances are integers, so V(x, .) only changes at integer radii
    radii = np.unique(np.concatenate([
        np.round(np.logspace(np.log10(max(r_min, 1.0)), np.log10(r_max), n_radii)),
        2.0 ** np.arange(int(np.ceil(np.log2(max(r_min, 1.0)))), int(np.floor(np.log2(r_max))) + 1),
    ]))
    if r_min < 1.0:
        radii = np.concatenate([[r_min], radii])
    V = np.array([space.volume_profile(x, radii) for x in centers])  # (m, R)
    lr = np.log(radii)
    lv = np.log(V)
    i, j = np.triu_indices(radii.size, k=1)
    dlr = lr[j] - lr[i]
    dlv = lv[:, j] - lv[:, i]
    mid = 0.5 * (lr[0] + lr[-1])
    longp = (lr[i] >= mid) & (dlr >= math.log(2.0) - 1e-12)
    if not np.any(longp):
        longp = dlr > 0
    slopes = dlv[:, longp] / dlr[longp]
    g1, g2 = float(slopes.min()), float(slopes.max())
    # smallest C with log ratio <= log C + g2 dlr  and  >= -log C + g1 dlr (r >= r0)
    up = np.max(dlv - g2 * dlr)
    lo_mask = radii[i] >= space.r0
    low = np.max(g1 * dlr[lo_mask] - dlv[:, lo_mask])
    C = float(max(1.0, math.exp(max(up, low))))
    upper_h = lr >= mid - 1e-12
    dyadic = upper_h & np.isclose(np.log2(radii), np.round(np.log2(radii)))
    if dyadic.sum() >= 2:
        upper_h = dyadic
    fit = float(np.polyfit(np.repeat(lr[upper_h][None, :], len(centers), 0).ravel(),
                           lv[:, upper_h].ravel(), 1)[0])
    cert = VolumeCertificate(C_V=C, gamma1=g1, gamma2=g2, window=(r_min, r_max),
                             upper_violation=0.0, lower_violation=0.0, gamma_fit=fit,
                             centers=[int(c) for c in centers], radii=list(map(float, radii)))
    uv, lv_ = check_volume(space, cert, centers, radii, V)
    cert.upper_violation, cert.lower_violation = uv, lv_
    return cert


def check_volume(space, cert: VolumeCertificate, centers, radii, V=None):
    """Worst log-violations of both volume inequalities (<= 0 means valid)."""
    radii = np.asarray(radii, dtype=float)
    if V is None:
        V = np.array([space.volume_profile(x, radii) for x in centers])
    lr, lv = np.log(radii), np.log(V)
    i, j = np.triu_indices(radii.size, k=1)
    dlr = lr[j] - lr[i]
    dlv = lv[:, j] - lv[:, i]
    lc = math.log(cert.C_V)
    upper = float(np.max(dlv - lc - cert.gamma2 * dlr))
    mask = radii[i] >= space.r0
    lower = float(np.max(-lc + cert.gamma1 * dlr[mask] - dlv[:, mask])) if mask.any() else -np.inf
    return upper, lower
