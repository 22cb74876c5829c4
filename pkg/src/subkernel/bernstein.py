"""Bernstein functions, discrete subordinators and their laws.

A Bernstein function without killing is

    phi(u) = b u + int_(0, inf) (1 - exp(-u t)) nu(dt),

and, once normalised so that phi(1) = 1, it defines a subordinator on the
positive integers with step law

    c(k) = |phi^(k)(1)| / k! = int t^k e^{-t} / k! nu(dt) + b 1{k = 1}.

Everything here works with truncated probability vectors indexed by the value
of the step (index 0 is kept and is always 0 for a single step) and tracks the
probability mass that the truncation discarded.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, special

from . import kernels
from .errors import (
    BracketError,
    ConfigError,
    DegenerateFunction,
    DensityUnavailable,
    QuadratureFailure,
    TailToleranceNotMet,
)
from .expr import compile_expression

E_RATIO = math.e / (math.e - 1.0)
POTENTIAL_LOWER = 1.0 / (2.0 * (1.0 + math.exp(-1.0)))
POTENTIAL_UPPER = math.e / (1.0 - math.exp(-1.0))

_FFT_THRESHOLD = 4096
_GL_SWITCH = 200
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(160)


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for Lévy integrals.

    ``upper_cutoff`` is where explicit integration stops; beyond it the
    integral is replaced by a bound built from the Lévy tail when one is known.
    """

    abs_tol: float = 1e-13
    rel_tol: float = 1e-11
    max_subdivisions: int = 400
    upper_cutoff: float = 1e4

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if not self.upper_cutoff > 0:
            raise ValueError("upper_cutoff must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class BernsteinFunction:
    """Drift plus Lévy measure, optionally with a closed form.

    Parameters
    ----------
    drift : float
        The linear coefficient ``b``.
    levy_density : callable, optional
        Vectorised density of the absolutely continuous part of ``nu``.
    levy_atoms : tuple of (location, mass)
        Point masses of ``nu``.
    closed_form : {'identity', 'stable', 'gamma_exponent', 'user'}, optional
    alpha : float, optional
        Stability index for ``closed_form='stable'``.
    scale : float
        Overall multiplier; :func:`normalize` only changes this field.
    levy_tail : callable, optional
        ``T -> int_T^inf nu(dt)`` for the density part, used to bound the
        neglected tail of the quadrature.
    """

    drift: float = 0.0
    levy_density: Optional[Callable] = None
    levy_atoms: tuple = ()
    closed_form: Optional[str] = None
    alpha: Optional[float] = None
    scale: float = 1.0
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    levy_tail: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        if self.drift < 0:
            raise ValueError("drift must be nonnegative")
        for loc, mass in self.levy_atoms:
            if not (loc > 0 and mass > 0):
                raise ValueError("Lévy atoms need positive location and mass")
        if self.closed_form == "stable":
            if self.alpha is None or not (0 < self.alpha <= 1):
                raise ValueError("stable index must lie in (0, 1]")

    # -- constructors ---------------------------------------------------------

    @classmethod
    def identity(cls, scale=1.0, **kw):
        return cls(drift=1.0, closed_form="identity", scale=scale, name="identity", **kw)

    @classmethod
    def stable(cls, alpha, **kw):
        """phi(u) = u^alpha; alpha = 1 is the identity."""
        alpha = float(alpha)
        if alpha == 1.0:
            return cls(drift=1.0, closed_form="stable", alpha=1.0, name="stable(1)", **kw)
        if not 0 < alpha < 1:
            raise ValueError("stable index must lie in (0, 1]")
        g = special.gamma(1.0 - alpha)

        def density(t, a=alpha, g=g):
            t = np.asarray(t, dtype=float)
            return a / g * t ** (-1.0 - a)

        def tail(T, a=alpha, g=g):
            return T ** (-a) / g

        return cls(levy_density=density, closed_form="stable", alpha=alpha,
                   levy_tail=tail, name=f"stable({alpha:g})", **kw)

    @classmethod
    def gamma_exponent(cls, **kw):
        """phi(u) = u / (1 + u), Lévy density e^{-t}."""
        return cls(levy_density=lambda t: np.exp(-np.asarray(t, dtype=float)),
                   closed_form="gamma_exponent", levy_tail=lambda T: math.exp(-T),
                   name="gamma_exponent", **kw)

    @classmethod
    def custom(cls, drift=0.0, levy_density=None, atoms=(), levy_tail=None, name="custom", **kw):
        if isinstance(levy_density, str):
            levy_density = compile_expression(levy_density)
        atoms = tuple((float(a), float(m)) for a, m in atoms)
        if levy_density is None and not atoms and drift == 0:
            raise DegenerateFunction("custom Bernstein function is identically zero")
        return cls(drift=float(drift), levy_density=levy_density, levy_atoms=atoms,
                   closed_form="user" if levy_density is None and not atoms else None,
                   levy_tail=levy_tail, name=name, **kw)

    @classmethod
    def from_spec(cls, spec):
        """Build from a JSON-style mapping (``{"kind": "stable", "alpha": 0.5}`` ...)."""
        if isinstance(spec, str):
            import json
            try:
                spec = json.loads(spec)
            except json.JSONDecodeError:
                spec = {"kind": spec}
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError(f"Bernstein spec needs a 'kind': {spec!r}")
        kind = spec["kind"]
        quad = QuadratureConfig(**spec["quadrature"]) if "quadrature" in spec else QuadratureConfig()
        if kind == "identity":
            phi = cls.identity(quadrature=quad)
        elif kind == "stable":
            if "alpha" not in spec:
                raise ConfigError("stable Bernstein spec needs 'alpha'")
            try:
                phi = cls.stable(spec["alpha"], quadrature=quad)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        elif kind == "gamma_exponent":
            phi = cls.gamma_exponent(quadrature=quad)
        elif kind == "custom":
            phi = cls.custom(drift=spec.get("drift", 0.0), levy_density=spec.get("levy_density"),
                             atoms=spec.get("atoms", ()), quadrature=quad)
        else:
            raise ConfigError(f"unknown Bernstein kind {kind!r}")
        if spec.get("normalize", False):
            phi = normalize(phi)
        return phi

    # -- evaluation -----------------------------------------------------------

    def nu(self, t):
        """Scaled Lévy density."""
        if self.levy_density is None:
            raise DensityUnavailable("Lévy measure has no density part")
        return self.scale * np.asarray(self.levy_density(t), dtype=float)

    @property
    def has_density(self):
        return self.levy_density is not None

    def __call__(self, u):
        return eval(self, u)


def _quad_checked(f, a, b, cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                             limit=cfg.max_subdivisions, full_output=1)
    val, err = out[0], out[1]
    if len(out) > 3 and out[3] and "maximum number of subdivisions" in str(out[3]):
        raise QuadratureFailure(
            f"subdivision limit {cfg.max_subdivisions} reached on [{a}, {b}] (error {err:.2e})"
        )
    return val, err


def _closed_eval(phi, u):
    cf = phi.closed_form
    if cf == "identity" or (cf == "stable" and phi.alpha == 1.0):
        return phi.scale * u
    if cf == "stable":
        return phi.scale * u ** phi.alpha
    if cf == "gamma_exponent":
        return phi.scale * u / (1.0 + u)
    if cf == "user":
        return phi.scale * phi.drift * u
    return None


def eval_with_error(phi: BernsteinFunction, u):
    """Evaluate phi(u) by quadrature, returning ``(value, error_bound)``.

    The closed form (when present) is bypassed; this is the route used to
    cross-check closed forms.
    """
    u = float(u)
    if u < 0:
        raise ValueError("phi is defined on [0, inf)")
    if u == 0:
        return 0.0, 0.0
    cfg = phi.quadrature
    s = phi.scale
    val = s * phi.drift * u
    err = 0.0
    for loc, mass in phi.levy_atoms:
        val += s * mass * -math.expm1(-u * loc)
    if phi.levy_density is not None:
        def f(t):
            return -math.expm1(-u * t) * float(phi.nu(t))

        T = cfg.upper_cutoff
        v0, e0 = _quad_checked(f, 0.0, 1.0, cfg)
        v1, e1 = _quad_checked(f, 1.0, T, cfg)
        val += v0 + v1
        err += e0 + e1
        if phi.levy_tail is not None:
            L = s * phi.levy_tail(T)
            lo = -math.expm1(-u * T) * L
            val += 0.5 * (lo + L)
            err += 0.5 * (L - lo)
        else:
            v2, e2 = _quad_checked(f, T, np.inf, cfg)
            val += v2
            err += e2
    return val, err


def eval(phi: BernsteinFunction, u):  # noqa: A001 - mirrors the operation name
    """phi(u), exact for closed forms and by quadrature otherwise.

    Accepts scalars or arrays.
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0):
        raise ValueError("phi is defined on [0, inf)")
    if phi.closed_form is not None and phi.closed_form != "user" or (
        phi.closed_form == "user" and phi.levy_density is None and not phi.levy_atoms
    ):
        out = _closed_eval(phi, arr)
        return float(out) if arr.ndim == 0 else out
    if arr.ndim == 0:
        return eval_with_error(phi, float(arr))[0]
    return np.array([eval_with_error(phi, float(x))[0] for x in arr.ravel()]).reshape(arr.shape)


def inverse(phi: BernsteinFunction, v, bracket: Optional[Sequence[float]] = None):
    """Solve phi(u) = v for u >= 0.

    Closed forms are inverted exactly; otherwise monotone bisection on
    ``bracket``. Without a bracket, ``[0, 1]`` is doubled until it contains the
    root, and :class:`BracketError` is raised if phi saturates below ``v``.
    """
    v = float(v)
    if v < 0:
        raise BracketError("phi takes nonnegative values")
    if v == 0:
        return 0.0
    cf = phi.closed_form
    exact = None
    if cf == "identity" or (cf == "stable" and phi.alpha == 1.0) or (cf == "user" and phi.levy_density is None and not phi.levy_atoms):
        slope = phi.scale * (phi.drift if cf == "user" else 1.0)
        exact = v / slope
    elif cf == "stable":
        exact = (v / phi.scale) ** (1.0 / phi.alpha)
    elif cf == "gamma_exponent":
        w = v / phi.scale
        exact = w / (1.0 - w) if w < 1 else math.inf
    if bracket is not None:
        lo, hi = float(bracket[0]), float(bracket[1])
        flo, fhi = eval(phi, lo), eval(phi, hi)
        if not (flo <= v <= fhi):
            raise BracketError(f"v={v} outside [phi({lo}), phi({hi})] = [{flo}, {fhi}]")
        if exact is not None:
            return min(max(exact, lo), hi)
    else:
        if exact is not None:
            if not math.isfinite(exact):
                raise BracketError(f"v={v} is not attained: sup phi = {phi.scale}")
            return exact
        lo, hi = 0.0, 1.0
        while eval(phi, hi) < v:
            lo, hi = hi, 2.0 * hi
            if hi > 1e150:
                raise BracketError(f"v={v} exceeds the numerical supremum of phi")
    if exact is not None:
        return exact
    return optimize.bisect(lambda x: eval(phi, x) - v, lo, hi, xtol=1e-300,
                           rtol=8.9e-16, maxiter=4000)


def normalize(phi: BernsteinFunction) -> BernsteinFunction:
    """Rescale so that phi(1) = 1 (returned unchanged if already so)."""
    p1 = eval(phi, 1.0)
    if p1 == 0:
        raise DegenerateFunction("phi(1) = 0 forces phi = 0")
    if p1 == 1.0:
        return phi
    return replace(phi, scale=phi.scale / p1, name=f"{phi.name}/phi(1)")


def levy_mass_check(phi: BernsteinFunction):
    """Return int min(1, t) nu(dt), raising if it is numerically infinite."""
    total = sum(min(1.0, a) * m for a, m in phi.levy_atoms) * phi.scale
    if phi.levy_density is None:
        return total
    cfg = phi.quadrature
    v0, _ = _quad_checked(lambda t: t * float(phi.nu(t)), 0.0, 1.0, cfg)
    if phi.levy_tail is not None:
        v1 = phi.scale * phi.levy_tail(1.0)
    else:
        v1, _ = _quad_checked(lambda t: float(phi.nu(t)), 1.0, np.inf, cfg)
    total += v0 + v1
    if not np.isfinite(total):
        raise DensityUnavailable("int min(1,t) nu(dt) diverges")
    return total


def concavity_violation(phi, lambdas=None, thetas=None):
    """Largest violation of phi(lam*theta) >= lam*phi(theta) on a grid (<= 0 is fine)."""
    lambdas = np.linspace(0.1, 1.0, 10) if lambdas is None else np.asarray(lambdas)
    thetas = np.logspace(-3, 3, 25) if thetas is None else np.asarray(thetas)
    worst = -np.inf
    for th in thetas:
        pt = eval(phi, th)
        for lam in lambdas:
            worst = max(worst, lam * pt - eval(phi, lam * th))
    return float(worst)


# -- subordinator weights ------------------------------------------------------


@dataclass(frozen=True)
class SubordinatorWeights:
    """Truncated step law ``c[k] = P(R = k)``, with ``c[0] = 0``.

    ``tail_mass`` is 1 - sum(c); ``error`` bounds the quadrature error in
    the computed entries (zero for closed forms).
    """

    c: np.ndarray
    tail_mass: float
    normalized: bool = True
    error: float = 0.0
    method: str = "closed"

    @property
    def K(self):
        return self.c.size - 1

    def __post_init__(self):
        self.c.setflags(write=False)


def _stable_weights(alpha, K):
    c = np.zeros(K + 1)
    if alpha == 1.0:
        if K >= 1:
            c[1] = 1.0
        return c
    c[1] = alpha
    k = np.arange(1, K, dtype=float)
    c[2:] = alpha * np.cumprod((k - alpha) / (k + 1.0))
    return c


def _gamma_weights(scale, K):
    # c(k) = scale * int t^k e^{-2t} / k! dt = scale * 2^{-(k+1)}
    return scale * np.concatenate([[0.0], 0.5 ** (np.arange(1, K + 1) + 1.0)])


def _poisson_log(k, t):
    return k * np.log(t) - t - special.gammaln(k + 1.0)


def _quadrature_weights(phi, K):
    cfg = phi.quadrature
    c = np.zeros(K + 1)
    err = 0.0
    if K >= 1:
        c[1] += phi.scale * phi.drift
    for loc, mass in phi.levy_atoms:
        k = np.arange(1, K + 1)
        c[1:] += phi.scale * mass * np.exp(_poisson_log(k, loc))
    if phi.levy_density is None:
        return c, err
    small = min(K, _GL_SWITCH)
    for k in range(1, small + 1):
        sq = math.sqrt(k)
        lo = max(0.0, k - 12.0 * sq - 6.0)
        hi = k + 12.0 * sq + 30.0

        def f(t, k=k):
            return math.exp(_poisson_log(k, t)) * float(phi.nu(t)) if t > 0 else 0.0

        pieces = [(0.0, lo), (lo, float(k)), (float(k), hi)] if lo > 0 else [(0.0, float(k)), (float(k), hi)]
        for a, b in pieces:
            v, e = _quad_checked(f, a, b, cfg)
            c[k] += v
            err += e
        # right tail: envelope nu(hi) * P(Gamma(k+1) > hi) when nu looks monotone there
        nu_hi = float(phi.nu(hi))
        env = nu_hi * special.gammaincc(k + 1, hi)
        if env < 1e-17 and float(phi.nu(2 * hi)) <= nu_hi:
            err += env
        else:
            v, e = _quad_checked(f, hi, np.inf, cfg)
            c[k] += v
            err += e
    if K > _GL_SWITCH:
        ks = np.arange(_GL_SWITCH + 1, K + 1, dtype=float)
        sq = np.sqrt(ks)
        lo = ks - 12.0 * sq
        hi = ks + 12.0 * sq + 30.0
        half = 0.5 * (hi - lo)
        t = 0.5 * (hi + lo)[:, None] + half[:, None] * _GL_NODES[None, :]
        vals = np.exp(_poisson_log(ks[:, None], t)) * phi.nu(t)
        c[_GL_SWITCH + 1:] += half * (vals @ _GL_WEIGHTS)
        # Poisson mass outside the window is < 1e-30 relative
        err += float(np.sum(phi.nu(lo) * special.gammainc(ks + 1.0, lo) + phi.nu(hi) * special.gammaincc(ks + 1.0, hi)))
    return c, err


def weights(phi: BernsteinFunction, K: int, tail_tol: Optional[float] = None,
            method: str = "auto", grow: bool = False, K_max: int = 1 << 22) -> SubordinatorWeights:
    """Step law of the discrete subordinator, truncated at ``K``.

    Parameters
    ----------
    phi : BernsteinFunction
        Must satisfy phi(1) = 1 (see :func:`normalize`).
    K : int
        Largest step kept.
    tail_tol : float, optional
        Maximum allowed discarded mass.
    method : {'auto', 'closed', 'quadrature'}
        ``'auto'`` uses the closed form when there is one.
    grow : bool
        Double ``K`` (up to ``K_max``) until ``tail_tol`` is met instead of raising.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    p1 = eval(phi, 1.0)
    if abs(p1 - 1.0) > 1e-9:
        raise DegenerateFunction(f"weights need phi(1) = 1, got {p1!r}; call normalize() first")
    while True:
        if method not in ("auto", "closed", "quadrature"):
            raise ValueError(f"unknown method {method!r}")
        cf = phi.closed_form
        use_closed = method != "quadrature" and cf in ("identity", "stable", "gamma_exponent", "user")
        if cf == "user" and (phi.levy_density is not None or phi.levy_atoms):
            use_closed = False
        if method == "closed" and not use_closed:
            raise ValueError("no closed form available")
        if use_closed:
            if cf == "identity" or cf == "user":
                c = np.zeros(K + 1)
                c[1] = 1.0
            elif cf == "stable":
                c = _stable_weights(phi.alpha, K)
            else:
                c = _gamma_weights(phi.scale, K)
            err, used = 0.0, "closed"
        else:
            c, err = _quadrature_weights(phi, K)
            used = "quadrature"
        c = np.maximum(c, 0.0)
        tail = 1.0 - math.fsum(c)
        if tail < 0:
            # quadrature overshoot: renormalise the discrepancy into the error budget
            err += -tail
            c = c / math.fsum(c)
            tail = max(0.0, 1.0 - math.fsum(c))
        if tail_tol is None or tail <= tail_tol:
            return SubordinatorWeights(c=c, tail_mass=tail, normalized=True, error=err, method=used)
        if not grow or 2 * K > K_max:
            raise TailToleranceNotMet(K, tail, tail_tol)
        K *= 2


def step_law_from_pmf(pmf, n, K_cap):
    """Distribution of a sum of ``n`` iid copies, truncated at ``K_cap``."""
    base = np.zeros(K_cap + 1)
    m = min(pmf.size, K_cap + 1)
    base[:m] = pmf[:m]
    out = np.zeros(K_cap + 1)
    out[0] = 1.0
    power = base
    e = n
    while e:
        if e & 1:
            out = _conv(out, power, K_cap)
        e >>= 1
        if e:
            power = _conv(power, power, K_cap)
    return out


def _conv(a, b, K):
    if K <= _FFT_THRESHOLD:
        return kernels.truncated_convolve(a, b, K)
    from scipy.signal import fftconvolve
    out = fftconvolve(a[: K + 1], b[: K + 1])[: K + 1]
    np.maximum(out, 0.0, out=out)
    return out


@dataclass(frozen=True)
class StepLaw:
    """Law of T_n: ``probs[j] = P(T_n = offset + j)`` for values up to ``K_cap``."""

    offset: int
    probs: np.ndarray
    tail_mass: float

    @property
    def pmf(self):
        out = np.zeros(self.offset + self.probs.size)
        out[self.offset:] = self.probs
        return out

    @property
    def K_cap(self):
        return self.offset + self.probs.size - 1


def step_law(w: SubordinatorWeights, n: int, K_cap: Optional[int] = None) -> StepLaw:
    """Exact law of T_n = R_1 + ... + R_n truncated at ``K_cap``.

    The tail mass collects everything above ``K_cap``, including the weight tail.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    K_cap = w.K if K_cap is None else int(K_cap)
    pmf = step_law_from_pmf(w.c, n, K_cap)
    pmf[: min(n, K_cap + 1)] = 0.0
    tail = max(0.0, 1.0 - math.fsum(pmf))
    off = min(n, K_cap + 1)
    return StepLaw(offset=n, probs=pmf[off:].copy(), tail_mass=tail)


def step_law_table(w: SubordinatorWeights, n_max: int, K_cap: Optional[int] = None):
    """Rows ``P(T_n = k)`` for n = 0..n_max and k = 0..K_cap, plus per-row tails."""
    K_cap = w.K if K_cap is None else int(K_cap)
    base = np.zeros(K_cap + 1)
    m = min(w.c.size, K_cap + 1)
    base[:m] = w.c[:m]
    table = np.zeros((n_max + 1, K_cap + 1))
    table[0, 0] = 1.0
    for n in range(1, n_max + 1):
        row = _conv(table[n - 1], base, K_cap)
        row[: min(n, K_cap + 1)] = 0.0
        table[n] = row
    tails = np.maximum(0.0, 1.0 - table.sum(axis=1))
    return table, tails


def laplace_Tn(w: SubordinatorWeights, phi: BernsteinFunction, lam: float, n: int):
    """E exp(-lam T_n) two ways: ``(direct, closed, tail_mass)``.

    ``direct`` sums the truncated law; the missing terms are bounded by the
    tail mass times exp(-lam (K + 1)).
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    law = step_law(w, n)
    k = np.arange(law.offset, law.offset + law.probs.size)
    direct = math.fsum(law.probs * np.exp(-lam * k))
    closed = (1.0 - eval(phi, -math.expm1(-lam))) ** n
    return direct, closed, law.tail_mass


def tail_probability(w: SubordinatorWeights, t: int, r: float) -> float:
    """Exact P(T_t >= r) (exact as long as ``r - 1 <= K``)."""
    rr = int(math.ceil(r))
    if rr <= 0:
        return 1.0
    if rr - 1 > w.K:
        raise ValueError("r exceeds the truncation of the weights")
    pmf = step_law_from_pmf(w.c, t, rr - 1)
    return max(0.0, 1.0 - math.fsum(pmf))


def tail_table(w: SubordinatorWeights, t_max: int, r_values):
    """Matrix of exact P(T_t >= r) for t = 1..t_max and r in ``r_values``."""
    r_values = np.asarray(r_values, dtype=float)
    K_cap = int(math.ceil(r_values.max())) - 1
    if K_cap > w.K:
        raise ValueError("largest r exceeds the truncation of the weights")
    table, _ = step_law_table(w, t_max, max(K_cap, 0))
    cdf = np.cumsum(table, axis=1)
    idx = np.ceil(r_values).astype(int) - 1
    out = np.ones((t_max, r_values.size))
    for j, i in enumerate(idx):
        if i >= 0:
            out[:, j] = np.maximum(0.0, 1.0 - cdf[1:, i])
    return out


def tail_bounds(phi: BernsteinFunction, t: int, r: float, wusc_beta: Optional[float] = None):
    """Bounds for P(T_t >= r).

    Returns ``(upper, lower_shape)`` with ``upper = min(1, e/(e-1) t phi(1/r))``.
    ``lower_shape = min(1, t phi(1/r))`` is only returned when an upper scaling
    index ``wusc_beta < 1`` is supplied; its multiplicative constant is not
    known in closed form (see :func:`empirical_lower_constant`).
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    s = t * eval(phi, 1.0 / r)
    upper = min(1.0, E_RATIO * s)
    lower = None
    if wusc_beta is not None:
        if not wusc_beta < 1:
            raise ValueError("the lower tail shape needs an upper scaling index below 1")
        lower = min(1.0, s)
    return upper, lower


def empirical_lower_constant(w, phi, t_values, r_values):
    """Best C with P(T_t >= r) >= C min(1, t phi(1/r)) on the grid."""
    T = tail_table(w, int(max(t_values)), r_values)
    best = np.inf
    for t in t_values:
        for j, r in enumerate(r_values):
            shape = min(1.0, t * eval(phi, 1.0 / r))
            best = min(best, T[t - 1, j] / shape)
    return float(best)


def potential_measure(w: SubordinatorWeights, x: float, n_max: Optional[int] = None) -> float:
    """U([0, x]) = sum_n P(T_n <= x), including the n = 0 term."""
    return float(potential_measure_table(w, [x], n_max)[0])


def potential_measure_table(w: SubordinatorWeights, xs, n_max: Optional[int] = None):
    """:func:`potential_measure` for several ``x`` sharing one convolution pass."""
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < 0):
        raise ValueError("x must be nonnegative")
    X = int(math.floor(xs.max()))
    if X > w.K:
        raise ValueError("x exceeds the truncation of the weights")
    N = X if n_max is None else min(X, int(n_max))
    base = np.zeros(X + 1)
    base[: min(w.c.size, X + 1)] = w.c[: X + 1]
    out = np.zeros(xs.size)
    fl = np.floor(xs).astype(int)
    row = np.zeros(X + 1)
    row[0] = 1.0
    for n in range(0, N + 1):
        if n > 0:
            row = kernels.truncated_convolve(row, base, X)
            row[:n] = 0.0
        cdf = np.cumsum(row)
        out += np.where(fl >= n, cdf[fl], 0.0)
    return out


def potential_measure_renewal(w: SubordinatorWeights, x: float) -> float:
    """U([0, x]) via the renewal sequence, sum_{s <= x} u_s."""
    X = int(math.floor(x))
    u = kernels.renewal_sequence(w.c[: X + 1] if w.c.size > X + 1 else w.c, X)
    return float(math.fsum(u))


def levy_comparison(phi: BernsteinFunction, k_values, w: Optional[SubordinatorWeights] = None):
    """Ratios c(k) / nu(k) with the lower envelope P(Gamma(k+1) <= k).

    The envelope is valid when nu is nonincreasing (c(k) >= nu(k) times that
    probability); ``monotone`` reports whether that was seen on a grid.
    """
    if not phi.has_density:
        raise DensityUnavailable("ratio c(k)/nu(k) needs a Lévy density")
    k_values = np.asarray(k_values, dtype=int)
    if w is None:
        w = weights(phi, int(k_values.max()), method="auto")
    grid = np.linspace(1.0, float(k_values.max()) + 1.0, 512)
    nv = phi.nu(grid)
    monotone = bool(np.all(np.diff(nv) <= 1e-15 * np.abs(nv[:-1])))
    ratio = w.c[k_values] / phi.nu(k_values.astype(float))
    env = special.gammainc(k_values + 1.0, k_values.astype(float))
    return {
        "k": k_values, "ratio": ratio, "envelope": env, "monotone": monotone,
        "min_ratio": float(ratio.min()), "max_ratio": float(ratio.max()),
        "envelope_holds": bool(np.all(ratio >= env * (1 - 1e-9))),
    }


def corollary3_check(w: SubordinatorWeights, phi: BernsteinFunction, d: float, n_values):
    """S(n) = sum_k P(T_n = k) k^{-d/2} against (phi^{-1}(1/n))^{d/2}.

    ``S_upper`` adds the truncated mass at the largest weight, ``tail * K^{-d/2}``.
    """
    n_values = np.asarray(n_values, dtype=int)
    table, tails = step_law_table(w, int(n_values.max()))
    k = np.arange(table.shape[1], dtype=float)
    kp = np.zeros_like(k)
    kp[1:] = k[1:] ** (-d / 2.0)
    rows = []
    for n in n_values:
        S = float(table[n] @ kp) if n > 0 else 1.0
        S_up = S + tails[n] * (w.K ** (-d / 2.0))
        env = inverse(phi, 1.0 / n) ** (d / 2.0)
        rows.append((int(n), S, S_up, env, S_up / env))
    ratios = np.array([r[4] for r in rows])
    return {"rows": rows, "sup_ratio": float(ratios.max()), "inf_ratio": float(ratios.min())}
