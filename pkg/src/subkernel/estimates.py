"""Target estimates and the harness that compares kernels against them.

Every two-sided claim of the form ``h ~ target`` is turned into a ratio band
``[inf h/target, sup h/target]``. Kernel values come as certified intervals
``[lo, hi]``; the band uses the pessimistic endpoint on each side, so a pass
is a statement about the exact kernel and not about its truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from . import bernstein as bern
from . import scaling
from .errors import (
    DegenerateCylinder,
    DomainError,
    EmptyDomain,
    NotALevyMeasure,
)
from .markov import Kernel, exit_time_dp

DEFAULT_C_MAX = 100.0
LEAK_MAX = 1e-9


# -- monotone profiles -------------------------------------------------------------


@dataclass(frozen=True)
class Profile:
    """Increasing function on [0, inf) with its generalised inverse.

    ``inv(s) = inf{r >= 0 : func(r) >= s}``. ``index`` is the exponent for
    power profiles and ``None`` otherwise.
    """

    func: Callable
    inv: Callable
    name: str = "profile"
    index: Optional[float] = None
    floor: float = 0.0

    def __call__(self, r):
        return self.func(r)

    @classmethod
    def power(cls, beta: float, floor: float = 0.0, name: Optional[str] = None):
        """``max(floor, r^beta)``; ``floor=1/2`` gives a scale function with psi(1) = 1."""
        if not beta > 0:
            raise ValueError("power profile needs a positive exponent")
        b = float(beta)

        def func(r, b=b, fl=floor):
            r = np.asarray(r, dtype=float)
            out = np.maximum(fl, r ** b)
            return float(out) if out.ndim == 0 else out

        def inv(s, b=b, fl=floor):
            s = np.asarray(s, dtype=float)
            out = np.where(s <= fl, 0.0, np.maximum(s, 0.0) ** (1.0 / b))
            return float(out) if out.ndim == 0 else out

        return cls(func, inv, name or (f"max({floor:g}, r^{b:g})" if floor else f"r^{b:g}"), b, floor)

    @classmethod
    def from_function(cls, func, name="custom", floor=None, r_max=1e12):
        """Wrap a vectorised increasing ``func``; the inverse is found by bisection."""
        f0 = float(func(0.0))

        def inv(s):
            s_arr = np.atleast_1d(np.asarray(s, dtype=float))
            out = np.empty(s_arr.size)
            for i, v in enumerate(s_arr):
                if v <= f0:
                    out[i] = 0.0
                    continue
                hi = 1.0
                while float(func(hi)) < v:
                    hi *= 2.0
                    if hi > r_max:
                        raise DomainError(f"{name}: value {v} not reached below r={r_max:g}")
                out[i] = optimize.brentq(lambda r: float(func(r)) - v, 0.0, hi, xtol=1e-14, rtol=1e-14)
            return float(out[0]) if np.ndim(s) == 0 else out.reshape(np.shape(s))

        return cls(func, inv, name, None, f0 if floor is None else floor)


def psi_power(beta: float) -> Profile:
    """Scale function ``psi(r) = max(1/2, r^beta)`` (psi(0) = 1/2, psi(1) = 1)."""
    return Profile.power(beta, floor=0.5, name=f"psi=r^{beta:g}")


def check_scale_function(psi: Profile, grid=None):
    """Raise ValueError unless psi(0) = 1/2, psi(1) = 1 and psi is nondecreasing."""
    if abs(float(psi(0.0)) - 0.5) > 1e-12 or abs(float(psi(1.0)) - 1.0) > 1e-12:
        raise ValueError(f"scale function needs psi(0)=1/2 and psi(1)=1, got {psi(0.0)}, {psi(1.0)}")
    grid = np.linspace(0.0, 64.0, 1025) if grid is None else np.asarray(grid)
    if np.any(np.diff(np.asarray(psi(grid), dtype=float)) < -1e-14):
        raise ValueError("scale function must be nondecreasing")


# -- volumes ---------------------------------------------------------------------


class VolumeFunction:
    """``V(x, r)`` backed by a space, vectorised in ``r``.

    With ``ambient=True`` on lattice windows the translation-invariant volume
    of Z^d is used, which agrees with the window volume on interior balls.
    """

    def __init__(self, space, ambient: bool = False):
        self.space = space
        self.ambient = bool(ambient and space.kind == "lattice")
        self._cache = {}

    def __call__(self, x, r):
        r = np.asarray(r, dtype=float)
        if self.ambient:
            out = np.asarray(self.space.ambient_volume(r), dtype=float)
        else:
            x = int(x)
            prof = self._cache.get(x)
            if prof is None:
                d = self.space.distances_from(x)
                order = np.argsort(d, kind="stable")
                prof = (d[order], np.cumsum(self.space.mu[order]))
                self._cache[x] = prof
            ds, cum = prof
            pos = np.searchsorted(ds, r, side="right")
            out = np.where(pos > 0, cum[np.maximum(pos - 1, 0)], 0.0)
        return float(out) if out.ndim == 0 else out


# -- targets ---------------------------------------------------------------------

TARGET_KINDS = ("dheat", "thm1", "thm2", "green", "one_step")


@dataclass
class Target:
    """A min{on-diagonal, off-diagonal} profile.

    kind
        ``dheat``: min{1/V(x, psi^-1(n)), n / (V(x, d) psi(d))}
        ``thm1``: min{1/V(x, f^-1(1/phi^-1(1/t))), t phi(1/f(d)) / V(x, d)}
        ``thm2``: min{1/V(x, (phi^-1(1/t))^(-1/alpha)), t phi(d^-alpha) / V(x, d)}
        ``green``: psi(d) / V(x, d), or 1 / (V(x, d) phi(1/f(d))) without psi
        ``one_step``: min{1/V(x, f^-1(1)), phi(1/f(d)) / V(x, d)}
    """

    kind: str
    V: Callable
    psi: Optional[Profile] = None
    phi: Optional[bern.BernsteinFunction] = None
    f: Optional[Profile] = None
    alpha: Optional[float] = None
    phi_bracket: Optional[Sequence[float]] = None
    certificates: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TARGET_KINDS:
            raise ValueError(f"unknown target kind {self.kind!r}")
        need = {"dheat": ("psi",), "thm1": ("phi", "f"), "thm2": ("phi", "alpha"),
                "one_step": ("phi", "f")}.get(self.kind, ())
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"target kind {self.kind!r} needs {name!r}")
        if self.kind == "green" and self.psi is None and (self.phi is None or self.f is None):
            raise ValueError("green target needs psi, or phi and f")
        if self.kind == "dheat":
            check_scale_function(self.psi)

    def _phi_inv(self, v):
        return bern.inverse(self.phi, v, self.phi_bracket)

    def on_diagonal(self, t, x):
        k = self.kind
        if k == "dheat":
            return 1.0 / self.V(x, self.psi.inv(t))
        if k == "thm1":
            return 1.0 / self.V(x, self.f.inv(1.0 / self._phi_inv(1.0 / t)))
        if k == "thm2":
            return 1.0 / self.V(x, self._phi_inv(1.0 / t) ** (-1.0 / self.alpha))
        if k == "one_step":
            return 1.0 / self.V(x, self.f.inv(1.0))
        return math.inf

    def off_diagonal(self, t, x, d):
        """Off-diagonal term on an array of distances (d > 0)."""
        d = np.asarray(d, dtype=float)
        V = np.asarray(self.V(x, d), dtype=float)
        k = self.kind
        if k == "dheat":
            return t / (V * np.asarray(self.psi(d), dtype=float))
        if k == "green":
            if self.psi is not None:
                return np.asarray(self.psi(d), dtype=float) / V
            return 1.0 / (V * _phi_vec(self.phi, 1.0 / np.asarray(self.f(d), dtype=float)))
        if k == "thm1":
            return t * _phi_vec(self.phi, 1.0 / np.asarray(self.f(d), dtype=float)) / V
        if k == "thm2":
            return t * _phi_vec(self.phi, d ** (-self.alpha)) / V
        return _phi_vec(self.phi, 1.0 / np.asarray(self.f(d), dtype=float)) / V

    def row(self, t, x, d):
        """Target at time ``t`` from ``x`` for an array of distances."""
        d = np.atleast_1d(np.asarray(d, dtype=float))
        if self.kind == "green":
            if np.any(d <= 0):
                raise DomainError("the Green target is off-diagonal only (d(x, y) > 0)")
            return self.off_diagonal(t, x, d)
        out = np.full(d.size, self.on_diagonal(t, x))
        pos = d > 0
        if np.any(pos):
            out[pos] = np.minimum(out[pos], self.off_diagonal(t, x, d[pos]))
        return out


def _phi_vec(phi, u):
    u = np.asarray(u, dtype=float)
    # phi(inf) = sup phi: only reached at d = 0, which callers exclude
    return np.asarray(bern.eval(phi, u), dtype=float)


def eval_target(target: Target, t, x, y=None, d=None, space=None) -> float:
    """Target value at time ``t`` and points ``x, y`` (or a distance ``d``)."""
    if d is None:
        if space is None:
            raise ValueError("pass a distance or a space to measure d(x, y)")
        d = space.distance(x, y)
    return float(target.row(t, x, [d])[0])


# -- comparability ---------------------------------------------------------------


@dataclass
class ComparabilityReport:
    sup_ratio: float
    inf_ratio: float
    sup_witness: tuple
    inf_witness: tuple
    domain: str
    n_points: int
    n_excluded: int
    n_zero: int
    C_max: float
    passed: bool
    records: Optional[dict] = None

    @property
    def width(self):
        """sup/inf; the multiplicative width of the band."""
        if self.inf_ratio <= 0:
            return math.inf
        return self.sup_ratio / self.inf_ratio

    def to_dict(self, records=False):
        out = {
            "sup_ratio": _json_float(self.sup_ratio), "inf_ratio": _json_float(self.inf_ratio),
            "width": _json_float(self.width), "sup_witness": list(self.sup_witness),
            "inf_witness": list(self.inf_witness), "domain": self.domain,
            "n_points": self.n_points, "n_excluded": self.n_excluded, "n_zero": self.n_zero,
            "C_max": self.C_max, "pass": self.passed,
        }
        if records and self.records is not None:
            out["records"] = {k: np.asarray(v).tolist() for k, v in self.records.items()}
        return out


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")


def comparability(values, target, upper=None, coords=None, excluded=0, domain="",
                  C_max: float = DEFAULT_C_MAX, keep_records=True, band=False) -> ComparabilityReport:
    """Ratio band of ``values`` (lower estimates) and ``upper`` against ``target``.

    Parameters
    ----------
    values, upper : array_like
        Lower and upper estimates of the kernel (``upper`` defaults to
        ``values``). Zero lower values at positive targets give ratio 0 and
        count in ``n_zero``: they are lower-bound failures, not exclusions.
    coords : dict of arrays, optional
        Labels of each point (e.g. ``n``, ``x``, ``y``, ``d``) for witnesses.
    excluded : int
        Number of points already removed by a domain filter (reported only).
    band : bool
        Pass on the width ``sup/inf <= C_max`` instead of ``[1/C_max, C_max]``;
        used where only the shape of an estimate is claimed.
    """
    v = np.ravel(np.asarray(values, dtype=float))
    hi = v if upper is None else np.ravel(np.asarray(upper, dtype=float))
    tg = np.ravel(np.asarray(target, dtype=float))
    if v.size == 0:
        raise EmptyDomain(f"no points left in the domain {domain!r}")
    if not (v.shape == hi.shape == tg.shape):
        raise ValueError("values, upper and target must have the same shape")
    if np.any(tg <= 0) or np.any(~np.isfinite(tg)):
        raise DomainError("targets must be positive and finite")
    lo_r = v / tg
    hi_r = hi / tg
    i_sup = int(np.argmax(hi_r))
    i_inf = int(np.argmin(lo_r))
    coords = coords or {}
    keys = sorted(coords)

    def wit(i):
        return tuple(_label(coords[k], i) for k in keys)

    sup_r, inf_r = float(hi_r[i_sup]), float(lo_r[i_inf])
    if band:
        ok = inf_r > 0 and sup_r / inf_r <= C_max
    else:
        ok = inf_r > 0 and sup_r <= C_max and 1.0 / inf_r <= C_max
    records = None
    if keep_records:
        records = {k: np.ravel(np.asarray(coords[k])) for k in keys}
        records.update(value=v, upper=hi, target=tg, ratio=lo_r)
    return ComparabilityReport(
        sup_ratio=sup_r, inf_ratio=inf_r, sup_witness=wit(i_sup), inf_witness=wit(i_inf),
        domain=domain + (f" [{', '.join(keys)}]" if keys else ""), n_points=int(v.size),
        n_excluded=int(excluded), n_zero=int(np.count_nonzero(v <= 0)), C_max=float(C_max),
        passed=bool(ok), records=records)


def _label(arr, i):
    a = np.ravel(np.asarray(arr))
    x = a[i]
    return int(x) if np.issubdtype(a.dtype, np.integer) else float(x)


def kernel_scan(sk, target: Target, n_values, d_max: float, C_max: float = DEFAULT_C_MAX,
                leak_max: float = LEAK_MAX, space=None, keep_records=True, band=False):
    """Compare a :class:`SubordinateKernel` with ``target`` on n x rows x B(x, d_max).

    Rows whose ball ``B(x, d_max)`` touches the window boundary, and rows
    whose streamed chain leaked more than ``leak_max``, are excluded.
    """
    space = sk.base.space if space is None else space
    n_values = np.asarray(n_values, dtype=int)
    if np.any(n_values < 1) or n_values.max() > sk.n_max:
        raise ValueError("times must lie in 1..n_max")
    cols = {k: [] for k in ("n", "x", "y", "d")}
    lo, hi, tg = [], [], []
    excluded = 0
    for i, x in enumerate(sk.rows):
        d = space.distances_from(int(x))
        ys = np.nonzero(d <= d_max)[0]
        if not space.is_interior(int(x), d_max) or sk.leak[i] > leak_max:
            excluded += ys.size * n_values.size
            continue
        dy = d[ys]
        for n in n_values:
            cols["n"].append(np.full(ys.size, n))
            cols["x"].append(np.full(ys.size, int(x)))
            cols["y"].append(ys)
            cols["d"].append(dy.astype(np.int64))
            h = sk.H[n, i, ys]
            lo.append(h)
            hi.append(h + sk.err[n, i])
            tg.append(target.row(n, int(x), dy))
    if not lo:
        raise EmptyDomain("every row was excluded by the boundary/leak filter")
    coords = {k: np.concatenate(v) for k, v in cols.items()}
    return comparability(np.concatenate(lo), np.concatenate(tg), np.concatenate(hi), coords,
                         excluded, f"{target.kind}, n<={int(n_values.max())}, d<={d_max:g}",
                         C_max, keep_records, band)


def green_scan(table, target: Target, space, d_range=(1, 256), C_max: float = DEFAULT_C_MAX,
               keep_records=True):
    """Band of ``G(x, y) / target`` over ``d_range[0] <= d(x, y) <= d_range[1]``.

    Uses the certified interval ``[G, G + tail_bound]``; a divergent table has
    an infinite upper end and therefore fails.
    """
    cols = {k: [] for k in ("x", "y", "d")}
    lo, hi, tg = [], [], []
    excluded = 0
    for i, x in enumerate(table.rows):
        d = space.distances_from(int(x))
        ys = np.nonzero((d >= d_range[0]) & (d <= d_range[1]))[0]
        if not space.is_interior(int(x), d_range[1]):
            excluded += ys.size
            continue
        cols["x"].append(np.full(ys.size, int(x)))
        cols["y"].append(ys)
        cols["d"].append(d[ys].astype(np.int64))
        lo.append(table.G[i, ys])
        hi.append(table.G[i, ys] + table.tail_bound[i])
        tg.append(target.row(0, int(x), d[ys]))
    if not lo:
        raise EmptyDomain("every Green row was excluded")
    coords = {k: np.concatenate(v) for k, v in cols.items()}
    return comparability(np.concatenate(lo), np.concatenate(tg), np.concatenate(hi), coords, excluded,
                         f"green, {d_range[0]}<=d<={d_range[1]}", C_max, keep_records, band=True)


# -- parabolic Harnack -------------------------------------------------------------


@dataclass(frozen=True)
class HarnackParams:
    """Cylinder constants ``B = 3/r0``, ``delta`` and ``b``.

    ``delta = min{C_psi^-1 B^-beta2, C_psi^-1 (eta B)^-beta1, delta0}`` and
    ``b = max{1 + 2/B, (3 delta C_psi)^(1/beta1)}``. ``eta`` and ``delta0``
    come from proofs without closed values; ``delta0=None`` drops that term.
    """

    B: float
    delta: float
    b: float
    eta: float = 2.0

    @classmethod
    def default(cls, r0: float, beta1: float, beta2: float, C_psi: float = 1.0,
                eta: float = 2.0, delta0: Optional[float] = None):
        B = 3.0 / r0
        cands = [B ** (-beta2) / C_psi, (eta * B) ** (-beta1) / C_psi]
        if delta0 is not None:
            cands.append(delta0)
        delta = min(cands)
        b = max(1.0 + 2.0 / B, (3.0 * delta * C_psi) ** (1.0 / beta1))
        return cls(B, delta, b, eta)


@dataclass
class HarnackResult:
    K0: float
    z: int
    R: float
    N: int
    times: tuple  # integer times in the upper cylinder
    radius: float
    max_point: tuple
    min_point: int
    params: HarnackParams

    def to_dict(self):
        return {"K0": self.K0, "z": self.z, "R": self.R, "N": self.N, "times": list(self.times),
                "radius": self.radius, "max_point": list(self.max_point), "min_point": self.min_point,
                "B": self.params.B, "delta": self.params.delta, "b": self.params.b, "eta": self.params.eta}


def harnack_depth(psi: Profile, R: float, params: HarnackParams) -> int:
    """Default depth: the reference kernel is started ``delta psi(bR)`` before the cylinder."""
    dp = params.delta * float(psi(params.b * R))
    return int(math.ceil(2.0 * params.delta * float(psi(R)))) + int(math.ceil(dp))


def harnack_ratio(H, space, z: int, R: float, psi: Profile, params: HarnackParams,
                  N: Optional[int] = None, row: int = 0) -> HarnackResult:
    """K0 = max over Q(delta psi(R); z, R/B) of u over min over B(z, R/B) of u(0, .).

    ``u(j, y) = h(N - j; x_ref, y)`` with ``H[n, row, y] = h(n; x_ref, y)``.
    """
    H = np.asarray(H)
    if H.ndim == 2:
        H = H[:, None, :]
    t0 = params.delta * float(psi(R))
    if t0 < 1:
        raise DegenerateCylinder(f"delta*psi(R) = {t0:.3g} < 1: no integer time in the cylinder")
    if N is None:
        N = harnack_depth(psi, R, params)
    N = int(N)
    need = params.delta * float(psi(params.b * R))
    if N < need:
        raise ValueError(f"depth N={N} below delta*psi(bR)={need:.3g}")
    if N > H.shape[0] - 1:
        raise ValueError(f"kernel stack has depth {H.shape[0] - 1} < N={N}")
    js = np.arange(int(math.ceil(t0)), int(math.floor(2.0 * t0)) + 1)
    js = js[js <= N]
    if js.size == 0:
        raise DegenerateCylinder("cylinder has no admissible integer time")
    rad = R / params.B
    ball = space.ball(int(z), rad)
    u0 = H[N, row, ball]
    imin = int(np.argmin(u0))
    Uc = H[N - js][:, row, :][:, ball]
    jm, ym = np.unravel_index(int(np.argmax(Uc)), Uc.shape)
    lo = float(u0[imin])
    K0 = math.inf if lo <= 0 else float(Uc[jm, ym]) / lo
    return HarnackResult(K0, int(z), float(R), N, tuple(int(j) for j in js), rad,
                         (int(js[jm]), int(ball[ym])), int(ball[imin]), params)


# -- exit times ------------------------------------------------------------------


def exit_profile(kernel: Kernel, x0: int, radii, psi: Profile, horizon: Optional[int] = None,
                 C_max: float = 50.0):
    """E[tau(x0, r) ^ horizon] / psi(r) across a ladder of radii.

    The horizon defaults to ``10 psi(r_max)`` (rounded up); the truncation
    bias of each entry is bounded from the geometric decay of the survival.
    """
    radii = np.asarray(radii, dtype=float)
    if horizon is None:
        horizon = int(math.ceil(10.0 * float(psi(radii.max()))))
    if horizon < 10.0 * float(psi(radii.max())):
        raise ValueError("horizon must be at least 10 psi(r_max)")
    rows = []
    for r in radii:
        res = exit_time_dp(kernel, x0, r, horizon)
        bias = res.truncation_bias
        pr = float(psi(r))
        rows.append({"r": float(r), "E_trunc": res.expected_truncated, "E_exact": res.expected_exact,
                     "bias_bound": bias, "psi": pr, "ratio": res.expected_truncated / pr,
                     "ratio_upper": (res.expected_truncated + bias) / pr, "ball_size": res.ball_size})
    lo = min(r["ratio"] for r in rows)
    hi = max(r["ratio_upper"] for r in rows)
    E = [r["E_trunc"] for r in rows]
    width = hi / lo if lo > 0 else math.inf
    return {"rows": rows, "inf_ratio": lo, "sup_ratio": hi, "width": width, "horizon": horizon,
            "monotone": bool(np.all(np.diff(E) >= -1e-12)), "C_max": C_max, "pass": bool(width <= C_max)}


# -- tail and moment inequalities --------------------------------------------------


def _dist_profile(space, x0):
    return space.distances_from(int(x0))


def base_tail_table(kernel: Kernel, x0: int, s_max: int, radii) -> np.ndarray:
    """Upper estimates of P(d(S_s, x0) >= r), s = 1..s_max (killed mass counts as far)."""
    d = _dist_profile(kernel.space, x0)
    radii = np.asarray(radii, dtype=float)
    v = np.zeros(kernel.n)
    v[int(x0)] = 1.0
    out = np.empty((s_max, radii.size))
    for s in range(1, s_max + 1):
        v = kernel.step(v)
        for j, r in enumerate(radii):
            out[s - 1, j] = max(0.0, 1.0 - float(v[d < r].sum()))
    return out


def subordinate_tail_table(sk, x0: int, t_values, radii) -> np.ndarray:
    """Upper estimates ``1 - sum_{d < r} H mu`` of P(d(S^phi_t, x0) >= r)."""
    i = sk.row_index(int(x0))
    d = _dist_profile(sk.base.space, x0)
    mu = sk.base.mu
    radii = np.asarray(radii, dtype=float)
    out = np.empty((len(t_values), radii.size))
    for a, t in enumerate(t_values):
        p = sk.H[int(t), i] * mu
        for j, r in enumerate(radii):
            out[a, j] = max(0.0, 1.0 - float(p[d < r].sum()))
    return out


def tail_estimate_check(sk, x0: int, t_values, radii, f: Callable, s_max: Optional[int] = None,
                        phi: Optional[bern.BernsteinFunction] = None):
    """Check P(d(S^phi_t, x0) >= r) <= e/(e-1) C1 t phi(f(r)).

    ``f`` is the nonincreasing envelope of the base hypothesis
    P(d(S_s, x0) >= r) <= C1 s f(r); C1 is estimated on s <= s_max first.
    """
    phi = sk.phi if phi is None else phi
    if phi is None:
        raise ValueError("a Bernstein function is needed for the envelope")
    radii = np.asarray(radii, dtype=float)
    s_max = int(max(t_values)) * 16 if s_max is None else int(s_max)
    base = base_tail_table(sk.base, x0, s_max, radii)
    fr = np.asarray(f(radii), dtype=float)
    s = np.arange(1, s_max + 1, dtype=float)[:, None]
    C1 = float(max(1e-300, np.max(base / (s * fr[None, :]))))
    lhs = subordinate_tail_table(sk, x0, t_values, radii)
    t = np.asarray(t_values, dtype=float)[:, None]
    rhs = bern.E_RATIO * C1 * t * _phi_vec(phi, fr)[None, :]
    slack = rhs - lhs
    i, j = np.unravel_index(int(np.argmin(slack)), slack.shape)
    return {"C1": C1, "s_max": s_max, "lhs": lhs, "rhs": rhs, "holds": bool(np.all(lhs <= rhs)),
            "worst": {"t": int(t_values[i]), "r": float(radii[j]), "lhs": float(lhs[i, j]),
                      "rhs": float(rhs[i, j])}}


def truncated_moment_check(sk, x0: int, r: float, t: int, f: Profile, C1: Optional[float] = None,
                           s_max: int = 256, phi: Optional[bern.BernsteinFunction] = None):
    """Both sides of E[f(d(x0, S^phi_t)); S^phi_t in B(x0, r)] <= C1 2e/(e-1) t f(r) phi(1/f(r)).

    Without ``C1`` the base hypothesis ``P(d(S_s, x0) >= rho) <= C1 s^2 / f(rho)^2``
    is fitted on s <= s_max and integer rho up to ``r`` (C1 >= 1).
    """
    phi = sk.phi if phi is None else phi
    space = sk.base.space
    i = sk.row_index(int(x0))
    d = _dist_profile(space, x0)
    inb = d <= r
    vals = np.asarray(f(d[inb]), dtype=float)
    p_hi = (sk.H[int(t), i, inb] + sk.err[int(t), i]) * sk.base.mu[inb]
    lhs = float(np.sum(vals * p_hi))
    if C1 is None:
        rhos = np.arange(1, int(max(1, math.floor(r))) + 1, dtype=float)
        base = base_tail_table(sk.base, x0, s_max, rhos)
        s = np.arange(1, s_max + 1, dtype=float)[:, None]
        fr2 = np.asarray(f(rhos), dtype=float)[None, :] ** 2
        C1 = float(max(1.0, np.max(base * fr2 / s ** 2)))
    fr = float(f(r))
    rhs = C1 * 2.0 * bern.E_RATIO * t * fr * float(bern.eval(phi, 1.0 / fr)) if fr > 0 else 0.0
    return {"lhs": lhs, "rhs": rhs, "C1": C1, "holds": bool(lhs <= rhs), "slack": rhs - lhs}


# -- equivalence probe -------------------------------------------------------------


def equivalence_probe_thm6(sk, phi: bern.BernsteinFunction, f: Profile, V: Callable, d_max: float,
                           C_max: float = DEFAULT_C_MAX, u_range=(1e-6, 1.0)):
    """Scaling indices of phi on (0, 1] next to one-step comparability of h_phi(1).

    The one-step target is min{1/V(x, f^-1(1)), phi(1/f(d)) / V(x, d)}.
    """
    samples = scaling.log_samples(lambda u: bern.eval(phi, u), u_range[0], u_range[1], 48)
    lower, upper = scaling.estimate_indices(samples, "at_zero", mode="asymptotic")
    target = Target("one_step", V, phi=phi, f=f)
    rep = kernel_scan(sk, target, [1], d_max, C_max=C_max)
    return {
        "scaling": {"lower": lower.to_dict(), "upper": upper.to_dict(),
                    "regime_ok": bool(lower.index > 0 and upper.index < 1)},
        "one_step": rep,
        "off_diagonal_zeros": rep.n_zero,
        "consistent": bool((lower.index > 0 and upper.index < 1) == rep.passed),
    }


# -- Lévy density from a scale function ----------------------------------------------


def levy_density_for_psi(psi: Profile, f: Profile, check_grid=None, normalize: bool = True):
    """Bernstein function with Lévy density ``1 / (s psi(f^-1(s)))``.

    Returns ``(phi, band)`` where ``band`` reports the ratio
    ``phi(u) psi(f^-1(1/u))`` on a log grid of (0, 1].
    """
    def g(s):
        return np.asarray(psi(f.inv(s)), dtype=float)

    grid = np.logspace(0, 16, 33)
    gv = g(grid)
    if np.any(np.diff(gv) < -1e-12 * gv[:-1]) or gv[-1] <= gv[0] * (1 + 1e-12):
        raise NotALevyMeasure("psi o f^-1 must be increasing for the construction")
    # tail mass int_1^inf ds / (s g(s)) = int_0^inf dv / g(e^v): decade increments must decay
    inc = np.log(10.0) / gv[::2]
    if inc[-1] > 0.5 * inc[0]:
        raise NotALevyMeasure("int_1^inf nu(ds) diverges numerically (psi o f^-1 grows too slowly)")

    def density(s, g=g):
        s = np.asarray(s, dtype=float)
        return 1.0 / (s * g(s))

    phi = bern.BernsteinFunction.custom(levy_density=density, name=f"levy[{psi.name}, {f.name}]")
    try:
        bern.levy_mass_check(phi)
    except Exception as exc:  # quadrature failure or infinite mass
        raise NotALevyMeasure(str(exc)) from None
    if normalize:
        phi = bern.normalize(phi)
    u = np.logspace(-8, 0, 33) if check_grid is None else np.asarray(check_grid, dtype=float)
    ratio = np.asarray(bern.eval(phi, u)) * np.asarray(psi(f.inv(1.0 / u)), dtype=float)
    band = {"u": u, "ratio": ratio, "min": float(ratio.min()), "max": float(ratio.max()),
            "width": float(ratio.max() / ratio.min())}
    return phi, band
