"""Weak lower/upper scaling conditions, certified on finite grids.

At zero, for lam in (0, 1] and theta < theta0:

* lower (index alpha, constant C >= 1):   f(lam theta) <= C lam^alpha f(theta)
* upper (index beta,  constant c <= 1):   f(lam theta) >= c lam^beta  f(theta)

At infinity a certificate ``(kind, index, k, theta0)`` for ``f`` means that
``g(x) = 1 / f(1 / x)`` satisfies the corresponding condition at zero with
constant ``1 / k`` and threshold ``1 / theta0``.

All checks are done in log space; a certificate is "verified" when the worst
log-violation over the grid is at most ``LOG_SLACK``.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import DegenerateData

LOG_SLACK = 1e-10


@dataclass(frozen=True)
class ScalingCertificate:
    direction: str  # 'at_zero' | 'at_infinity'
    kind: str  # 'lower' | 'upper'
    index: float
    constant: float
    theta0: float = np.inf
    verified_grid: str = ""
    worst_violation: float = 0.0

    def __post_init__(self):
        if self.direction not in ("at_zero", "at_infinity"):
            raise ValueError(f"bad direction {self.direction!r}")
        if self.kind not in ("lower", "upper"):
            raise ValueError(f"bad kind {self.kind!r}")
        if not self.constant > 0:
            raise ValueError("scaling constant must be positive")

    def to_dict(self):
        d = asdict(self)
        d["theta0"] = None if not np.isfinite(self.theta0) else self.theta0
        return d


@dataclass(frozen=True)
class Samples:
    """Positive function values on a strictly increasing grid."""

    theta: np.ndarray
    values: np.ndarray

    @classmethod
    def from_function(cls, f, theta):
        theta = np.asarray(theta, dtype=float)
        return cls(theta, np.asarray([f(t) for t in theta], dtype=float))

    def reciprocal(self):
        """Samples of g(x) = 1/f(1/x) on the reversed grid."""
        return Samples(1.0 / self.theta[::-1], 1.0 / self.values[::-1])


FunctionLike = Union[Callable, Samples]


def _pairs(theta, values):
    """Log-differences over all ordered pairs i < j (theta_i < theta_j)."""
    lt, lf = np.log(theta), np.log(values)
    i, j = np.triu_indices(theta.size, k=1)
    return lt[j] - lt[i], lf[j] - lf[i]


def _zero_violation(theta, values, kind, index, constant, theta0):
    """Worst log-violation of the at-zero condition using sample pairs.

    For a pair theta_i = lam theta_j (lam < 1, theta_j < theta0):
    lower: log f_i - log f_j - log C - alpha log lam <= 0
    upper: log c + beta log lam - (log f_i - log f_j) <= 0
    """
    keep = theta < theta0
    theta, values = theta[keep], values[keep]
    if theta.size < 2:
        return -np.inf, None
    dlt, dlf = _pairs(theta, values)
    # log lam = -dlt, log f_i - log f_j = -dlf
    if kind == "lower":
        viol = -dlf - np.log(constant) + index * dlt
    else:
        viol = np.log(constant) - index * dlt + dlf
    w = int(np.argmax(viol))
    i, j = np.triu_indices(theta.size, k=1)
    return float(viol[w]), (float(theta[i[w]] / theta[j[w]]), float(theta[j[w]]))


def _grid_samples(f, lambdas, thetas):
    """Turn a callable on a (lam, theta) grid into one sorted sample set."""
    pts = np.unique(np.concatenate([thetas, np.outer(lambdas, thetas).ravel()]))
    pts = pts[pts > 0]
    return Samples(pts, np.asarray(f(pts), dtype=float))


def verify(f: FunctionLike, cert: ScalingCertificate, lambdas=None, thetas=None):
    """Check ``cert`` for ``f`` on a grid.

    ``f`` is either a :class:`Samples` (all sample pairs are used as (lam,
    theta) pairs) or a vectorised callable evaluated on ``lambdas x thetas``
    (defaults: 32 log-spaced lam in (0, 1], 64 log-spaced theta).

    Returns ``(ok, worst_violation, witness)`` where the witness is the
    ``(lam, theta)`` of the worst pair in the at-zero coordinates actually
    checked.
    """
    if isinstance(f, Samples):
        s = f
    else:
        if lambdas is None:
            lambdas = np.logspace(-4, 0, 32)
        if thetas is None:
            hi = cert.theta0 if np.isfinite(cert.theta0) else 1e3
            if cert.direction == "at_infinity":
                lo = cert.theta0 if 0 < cert.theta0 < np.inf else 1e-3
                thetas = np.logspace(np.log10(lo), np.log10(lo) + 6, 64)
            else:
                thetas = np.logspace(np.log10(hi) - 6, np.log10(hi), 64, endpoint=False)
        if cert.direction == "at_infinity":
            # lam <= 1 in the reciprocal variable means theta * (1/lam) here
            pts = np.unique(np.concatenate([thetas, np.outer(1.0 / np.asarray(lambdas), thetas).ravel()]))
            s = Samples(pts, np.asarray(f(pts), dtype=float))
        else:
            s = _grid_samples(f, np.asarray(lambdas), np.asarray(thetas))
    if np.any(s.values <= 0):
        raise DegenerateData("scaling checks need a positive function")
    if cert.direction == "at_zero":
        worst, wit = _zero_violation(s.theta, s.values, cert.kind, cert.index, cert.constant, cert.theta0)
    else:
        g = s.reciprocal()
        t0 = _recip_threshold(cert.theta0)
        worst, wit = _zero_violation(g.theta, g.values, cert.kind, cert.index, 1.0 / cert.constant, t0)
    return bool(worst <= LOG_SLACK), worst, wit


def _recip_threshold(theta0):
    if theta0 is None or theta0 == 0:
        return np.inf
    return 1.0 / theta0 if np.isfinite(theta0) else 0.0


def estimate_indices(f: Samples, direction: str = "at_zero", theta0: Optional[float] = None,
                     mode: str = "extremal", strict: bool = False):
    """Best lower and upper scaling certificates supported by the samples.

    Parameters
    ----------
    f : Samples
        At least 8 log-spaced samples.
    direction : {'at_zero', 'at_infinity'}
    theta0 : float, optional
        Threshold of the window; by default every sample is used.
    mode : {'extremal', 'asymptotic'}
        ``'extremal'``: indices are the extreme secant slopes with trivial
        constants (the widest valid interval). ``'asymptotic'``: indices from
        secants spanning at least half the log-range, with the smallest
        constants that make them valid.
    strict : bool
        Raise :class:`DegenerateData` for constant data instead of warning.

    Returns
    -------
    (lower, upper) : tuple of ScalingCertificate
    """
    if f.theta.size < 8:
        raise DegenerateData("need at least 8 samples")
    if direction == "at_zero":
        theta0 = np.inf if theta0 is None else theta0
        s = f
        t0 = theta0
    elif direction == "at_infinity":
        theta0 = 0.0 if theta0 is None else theta0
        s = f.reciprocal()
        t0 = _recip_threshold(theta0)
    else:
        raise ValueError(f"bad direction {direction!r}")
    keep = s.theta < t0
    th, va = s.theta[keep], s.values[keep]
    if th.size < 2:
        raise DegenerateData("no samples inside the window")
    dlt, dlf = _pairs(th, va)
    slope = dlf / dlt
    if np.allclose(va, va[0], rtol=1e-14, atol=0):
        msg = "constant samples: both indices are 0"
        if strict:
            raise DegenerateData(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if mode == "extremal":
        alpha, beta = float(slope.min()), float(slope.max())
        C, c = 1.0, 1.0
    elif mode == "asymptotic":
        span = np.log(th[-1] / th[0])
        longr = dlt >= 0.5 * span
        alpha, beta = float(slope[longr].min()), float(slope[longr].max())
        C = float(max(1.0, np.exp(np.max((alpha - slope) * dlt))))
        c = float(min(1.0, np.exp(np.min((beta - slope) * dlt))))
    else:
        raise ValueError(f"bad mode {mode!r}")
    grid = f"{th.size} samples on [{th[0]:.3g}, {th[-1]:.3g}]"
    if direction == "at_infinity":
        # the constant for f is the reciprocal of the one found for g
        C, c = 1.0 / C, 1.0 / c
    t0_out = theta0
    lower = ScalingCertificate(direction, "lower", alpha, C, t0_out, grid)
    upper = ScalingCertificate(direction, "upper", beta, c, t0_out, grid)
    ok_l, wl, _ = verify(f, lower)
    ok_u, wu, _ = verify(f, upper)
    lower = ScalingCertificate(direction, "lower", alpha, C, t0_out, grid, wl)
    upper = ScalingCertificate(direction, "upper", beta, c, t0_out, grid, wu)
    return lower, upper


def log_samples(f, lo, hi, n=64):
    """Convenience: :class:`Samples` of a vectorised ``f`` on a log grid."""
    theta = np.logspace(np.log10(lo), np.log10(hi), n)
    return Samples(theta, np.asarray(f(theta), dtype=float))
