"""Command-line driver: ``subkernel run | list-presets | weights``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bernstein as bern
from . import estimates as est
from . import kernels, markov, presets, space, subordinate as sub, svg
from .errors import ConfigError, NotConvergent, SubkernelError

SUITES = ("weights", "tails", "potential", "dheat", "thm1", "thm2", "green", "exit", "harnack",
          "cs_probe", "equivalence")
CSV_COLUMNS = ("suite", "n_or_t", "x", "y", "d", "value", "target", "ratio")
HARNACK_SPREAD = 10.0
HARNACK_MAX = 1e4
EXIT_WIDTH = 50.0


# -- configuration ---------------------------------------------------------------


@dataclass
class ExperimentConfig:
    name: str
    space: dict
    base: dict
    bernstein: dict
    n_max: int
    grids: dict
    suites: list
    C_max: float = est.DEFAULT_C_MAX
    seed: int = 0
    walk_dimension: float = 2.0
    psi_exponent: Optional[float] = None
    output: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {"name", "space", "base", "bernstein", "n_max", "grids", "suites", "C_max", "seed",
                 "walk_dimension", "psi_exponent", "output"}
        for key in ("space", "bernstein", "n_max", "suites"):
            if key not in d:
                raise ConfigError(f"missing required key {key!r}")
        base = d.get("base", {"kind": "srw"})
        if isinstance(base, str):
            base = {"kind": base}
        sp_ = d["space"]
        if not isinstance(sp_, dict) or sp_.get("kind") not in ("lattice", "gasket", "edge_list"):
            raise ConfigError("space.kind must be one of lattice, gasket, edge_list")
        if base.get("kind") not in ("srw", "averaged", "lazy"):
            raise ConfigError("base.kind must be one of srw, averaged, lazy")
        bspec = d["bernstein"]
        if isinstance(bspec, str):
            bspec = {"kind": bspec}
        suites = d["suites"]
        if not isinstance(suites, list) or not suites:
            raise ConfigError("suites must be a nonempty list")
        bad = [s for s in suites if s not in SUITES]
        if bad:
            raise ConfigError(f"unknown suites {bad}; choose from {', '.join(SUITES)}")
        try:
            n_max = int(d["n_max"])
        except (TypeError, ValueError):
            raise ConfigError("n_max must be an integer") from None
        if n_max < 1:
            raise ConfigError("n_max must be >= 1")
        grids = dict(d.get("grids", {}))
        times = grids.setdefault("times", list(range(1, n_max + 1)))
        radii = grids.setdefault("radii", [1, 2, 4, 8])
        for key in ("times", "radii"):
            if not isinstance(grids[key], list) or not grids[key]:
                raise ConfigError(f"grids.{key} must be a nonempty list")
        if any(int(t) < 1 for t in times):
            raise ConfigError("grids.times must be positive integers")
        if max(int(t) for t in times) > n_max:
            raise ConfigError(f"n_max={n_max} is below the largest time {max(times)}")
        if any(float(r) <= 0 for r in radii):
            raise ConfigError("grids.radii must be positive")
        extra = {k: v for k, v in d.items() if k not in known}
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        cfg = cls(name=str(d.get("name", "experiment")), space=sp_, base=base, bernstein=bspec,
                  n_max=n_max, grids=grids, suites=list(suites), C_max=float(d.get("C_max", est.DEFAULT_C_MAX)),
                  seed=int(d.get("seed", 0)), walk_dimension=float(d.get("walk_dimension", 2.0)),
                  psi_exponent=None if d.get("psi_exponent") is None else float(d["psi_exponent"]),
                  output=d.get("output"))
        try:
            cfg.phi()
        except (ConfigError, ValueError, SubkernelError) as exc:
            raise ConfigError(f"bernstein: {exc}") from None
        return cfg

    def to_dict(self):
        out = {"name": self.name, "space": self.space, "base": self.base, "bernstein": self.bernstein,
               "n_max": self.n_max, "grids": self.grids, "suites": self.suites, "C_max": self.C_max,
               "seed": self.seed, "walk_dimension": self.walk_dimension}
        if self.psi_exponent is not None:
            out["psi_exponent"] = self.psi_exponent
        if self.output is not None:
            out["output"] = self.output
        return out

    def phi(self):
        return bern.BernsteinFunction.from_spec(self.bernstein)

    def psi_index(self):
        if self.psi_exponent is not None:
            return self.psi_exponent
        phi = self.phi()
        if phi.closed_form == "identity":
            return self.walk_dimension
        if phi.closed_form == "stable":
            return phi.alpha * self.walk_dimension
        raise ConfigError("psi_exponent is required for this Bernstein function")


def parse_config(text: str, base_dir: str = ".") -> ExperimentConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    cfg = ExperimentConfig.from_dict(d)
    if cfg.space.get("kind") == "edge_list":
        path = cfg.space.get("path")
        if not path:
            raise ConfigError("edge_list space needs a path")
        if not os.path.isabs(path):
            cfg.space = dict(cfg.space, path=os.path.join(base_dir, path))
    return cfg


# -- experiment context ------------------------------------------------------------


def _build_space(spec):
    kind = spec["kind"]
    try:
        if kind == "lattice":
            return space.build_lattice(int(spec.get("dim", 1)), int(spec["side"]),
                                       spec.get("boundary", "truncated"))
        if kind == "gasket":
            return space.build_gasket(int(spec["level"]))
        return space.load_edge_list(spec["path"])
    except KeyError as exc:
        raise ConfigError(f"space spec is missing {exc}") from None


def _build_base(sp_, spec):
    k = markov.srw(sp_)
    if spec["kind"] == "averaged":
        k = markov.average_two_step(k)
    elif spec["kind"] == "lazy":
        k = markov.lazy(k, float(spec.get("q", 0.5)))
    return k


class Context:
    """Lazily built objects shared between suites."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.space = _build_space(cfg.space)
        self.base = _build_base(self.space, cfg.base)
        self.phi = cfg.phi()
        self.grids = cfg.grids
        self.centers = self._centers(self.grids.get("centers"))
        self._sk = {}
        self._small = None

    def _centers(self, spec):
        sp_ = self.space
        if spec is None:
            spec = "anchor" if sp_.kind == "gasket" else "center"
        if spec == "center":
            return [sp_.center()]
        if spec == "anchor":
            if sp_.kind != "gasket":
                raise ConfigError("centers='anchor' needs a gasket")
            return [int(sp_.corners[0])]
        out = []
        for c in spec:
            if isinstance(c, list):
                if sp_.kind != "lattice":
                    raise ConfigError("coordinate offsets need a lattice space")
                base = np.full(sp_.dim, sp_.side // 2) + np.asarray(c, dtype=int)
                try:
                    out.append(sp_.index_of(base))
                except IndexError:
                    raise ConfigError(f"center offset {c} lies outside the window") from None
            else:
                if not 0 <= int(c) < sp_.n:
                    raise ConfigError(f"center {c} is not a vertex")
                out.append(int(c))
        return out

    @property
    def d_max(self):
        return float(self.grids.get("d_max", max(self.grids["radii"])))

    def psi(self):
        return est.psi_power(self.cfg.psi_index())

    def volume(self):
        return est.VolumeFunction(self.space, ambient=self.space.kind == "lattice")

    def sk(self, n_max=None, green=False):
        n_max = self.cfg.n_max if n_max is None else n_max
        key = (n_max, green)
        if key not in self._sk:
            K = sub.DEFAULT_K if green else None
            self._sk[key] = sub.subordinate(self.base, self.phi, n_max, rows=self.centers, K=K, green=green)
        return self._sk[key]

    def small(self):
        """(space, base, x0) on which dense spectral jump kernels are affordable."""
        if self._small is None:
            sp_ = self.space
            if sp_.kind == "lattice" and sp_.n > markov.DENSE_LIMIT:
                rmax = max(self.grids.get("exit_radii", [8]))
                side = int(self.grids.get("exit_window", 8 * rmax + 1))
                sp_ = space.build_lattice(sp_.dim, side, sp_.boundary_policy)
                base = _build_base(sp_, self.cfg.base)
                x0 = sp_.center()
            else:
                base = self.base
                x0 = self.centers[0]
            self._small = (sp_, base, x0)
        return self._small


# -- suites ------------------------------------------------------------------------


def _rows(suite, n_or_t, x, y, d, value, target):
    n = len(value)
    ratio = [v / t if t else math.nan for v, t in zip(value, target)]

    def col(c):
        return [""] * n if c is None else list(c)

    return list(zip([suite] * n, col(n_or_t), col(x), col(y), col(d), value, target, ratio))


def suite_weights(ctx):
    K = int(ctx.grids.get("K", 1024))
    w = bern.weights(ctx.phi, K)
    total = math.fsum(w.c) + w.tail_mass
    out = {"K": K, "tail_mass": w.tail_mass, "method": w.method, "sum_plus_tail_error": abs(total - 1.0)}
    ok = abs(total - 1.0) <= 1e-12
    k = np.arange(1, min(K, 64) + 1)
    ref = w.c[k].copy()
    if ctx.phi.closed_form in ("stable", "gamma_exponent") and ctx.phi.has_density:
        kq = min(20, K)
        q = bern.weights(ctx.phi, kq, method="quadrature")
        diff = float(np.max(np.abs(q.c - w.c[: kq + 1])))
        out["quadrature_vs_closed"] = diff
        ok = ok and diff <= 1e-8
        ref[:kq] = q.c[1: kq + 1]
    out["pass"] = bool(ok)
    return out, _rows("weights", k.tolist(), None, None, None, w.c[k].tolist(), ref.tolist())


def suite_tails(ctx):
    times = [int(t) for t in ctx.grids["times"]]
    radii = np.asarray(ctx.grids["radii"], dtype=float)
    K = int(max(radii.max(), 2))
    w = bern.weights(ctx.phi, K)
    T = bern.tail_table(w, max(times), radii)
    recs = []
    worst = -math.inf
    wit = None
    for t in times:
        for j, r in enumerate(radii):
            ub = bern.tail_bounds(ctx.phi, t, r)[0]
            val = float(T[t - 1, j])
            recs.append((t, r, val, ub))
            if val - ub > worst:
                worst, wit = val - ub, (t, float(r))
    out = {"max_excess": worst, "witness": list(wit), "pass": bool(worst <= 1e-12)}
    return out, _rows("tails", [r[0] for r in recs], None, None, [r[1] for r in recs],
                      [r[2] for r in recs], [r[3] for r in recs])


def suite_potential(ctx):
    xs = np.asarray(ctx.grids["radii"], dtype=float)
    w = bern.weights(ctx.phi, int(xs.max()))
    U = bern.potential_measure_table(w, xs)
    inv = 1.0 / np.asarray(bern.eval(ctx.phi, 1.0 / xs))
    prod = U / inv
    ok = bool(np.all(prod >= bern.POTENTIAL_LOWER) and np.all(prod <= bern.POTENTIAL_UPPER))
    out = {"min": float(prod.min()), "max": float(prod.max()),
           "band": [bern.POTENTIAL_LOWER, bern.POTENTIAL_UPPER], "pass": ok}
    return out, _rows("potential", None, None, None, xs.tolist(), U.tolist(), inv.tolist())


def _scan_rows(suite, rep):
    r = rep.records
    return _rows(suite, r["n"].tolist(), r["x"].tolist(), r["y"].tolist(), r["d"].tolist(),
                 r["value"].tolist(), r["target"].tolist())


def _target(ctx, kind):
    V = ctx.volume()
    if kind == "dheat":
        return est.Target("dheat", V, psi=ctx.psi())
    f = est.Profile.power(ctx.cfg.walk_dimension)
    if kind == "thm1":
        return est.Target("thm1", V, phi=ctx.phi, f=f)
    return est.Target("thm2", V, phi=ctx.phi, alpha=ctx.cfg.walk_dimension)


def suite_scan(kind):
    def run(ctx):
        sk = ctx.sk()
        rep = est.kernel_scan(sk, _target(ctx, kind), ctx.grids["times"], ctx.d_max, C_max=ctx.cfg.C_max)
        out = rep.to_dict()
        out.update(K_eff=sk.K_eff, max_error=float(sk.err.max()), max_leak=float(sk.leak.max()))
        return out, _scan_rows(kind, rep), _scan_plot(ctx, kind, sk, rep)
    return run


def _scan_plot(ctx, kind, sk, rep):
    times = sorted(set(int(t) for t in ctx.grids["times"]))
    pick = sorted(set(times[int(round(q * (len(times) - 1)))] for q in (0.0, 0.33, 0.67, 1.0)))
    x = int(sk.rows[0])
    d = ctx.space.distances_from(x)
    ys = np.nonzero((d >= 1) & (d <= ctx.d_max))[0]
    dd = d[ys]
    order = np.argsort(dd, kind="stable")
    series = []
    tgt = _target(ctx, kind)
    for n in pick:
        # one point per distance: the mean over the sphere
        vals = sk.H[n, 0, ys][order]
        ds = dd[order]
        uniq = np.unique(ds)
        mean = np.array([vals[ds == u].mean() for u in uniq])
        series.append((f"n={n}", uniq, mean, False))
        series.append((f"target n={n}", uniq, tgt.row(n, x, uniq), True))
    return svg.loglog(series, f"{kind}: kernel vs target from x={x}", "d(x, y)", "h(n; x, y)")


def suite_green(ctx):
    sk = ctx.sk(n_max=1, green=True)
    out = {}
    try:
        table = sub.green(sk)
    except NotConvergent as exc:
        table = exc.table
        out["error"] = f"NotConvergent: {exc}"
    V = ctx.volume()
    tgt = est.Target("green", V, psi=ctx.psi())
    lo = int(ctx.grids.get("green_d_min", 1))
    rep = est.green_scan(table, tgt, ctx.space, (lo, ctx.d_max), C_max=ctx.cfg.C_max)
    out.update(rep.to_dict())
    out.update(block_ratio=table.block_ratio, converged=table.converged)
    out["pass"] = bool(rep.passed and table.converged)
    r = rep.records
    return out, _rows("green", None, r["x"].tolist(), r["y"].tolist(), r["d"].tolist(),
                      r["value"].tolist(), r["target"].tolist())


def _jump_chain(ctx):
    sp_, base, x0 = ctx.small()
    jk = sub.jump_kernel(base, ctx.phi)
    return sp_, sub.jump_chain(sp_, jk), jk, x0


def suite_exit(ctx):
    sp_, ch, _, x0 = _jump_chain(ctx)
    radii = ctx.grids.get("exit_radii", [4, 8, 16, 32])
    prof = est.exit_profile(ch, x0, radii, ctx.psi(), C_max=float(ctx.grids.get("exit_width", EXIT_WIDTH)))
    rows = prof["rows"]
    return prof, _rows("exit", None, [x0] * len(rows), None, [r["r"] for r in rows],
                       [r["E_trunc"] for r in rows], [r["psi"] for r in rows])


def suite_harnack(ctx):
    psi = ctx.psi()
    beta = ctx.cfg.psi_index()
    params = est.HarnackParams.default(ctx.space.r0, beta, beta, eta=float(ctx.grids.get("harnack_eta", 2.0)))
    Rs = ctx.grids.get("harnack_R", [16, 32, 64])
    depth = max(est.harnack_depth(psi, R, params) for R in Rs)
    z = ctx.centers[0]
    sk = sub.subordinate(ctx.base, ctx.phi, depth, rows=[z])
    res = [est.harnack_ratio(sk.H, ctx.space, z, R, psi, params) for R in Rs]
    K = [r.K0 for r in res]
    spread = max(K) / min(K)
    ok = spread <= HARNACK_SPREAD and max(K) < HARNACK_MAX
    out = {"results": [r.to_dict() for r in res], "spread": spread, "pass": bool(ok)}
    return out, _rows("harnack", [r.N for r in res], [z] * len(res), None, Rs, K, [1.0] * len(res))


def suite_cs_probe(ctx):
    sp_, _, jk, x0 = _jump_chain(ctx)
    psi = ctx.psi()
    rng = np.random.default_rng(ctx.cfg.seed)
    pairs = ctx.grids.get("cs_pairs", [[4, 2], [8, 4], [16, 8]])
    eps = float(ctx.grids.get("cs_eps", 0.5))
    results = []
    for R, r in pairs:
        cut = sub.linear_ramp(sp_, x0, R, r)
        for label, f in (("const", np.ones(sp_.n)), ("random", rng.uniform(0.5, 1.5, sp_.n))):
            res = sub.cs_probe(jk.J, jk.mu, sp_, psi, x0, R, r, f, cut, eps)
            results.append(dict(res, R=R, r=r, f=label))
    thr = [r["C_threshold"] for r in results]
    out = {"results": results, "max_C_threshold": max(thr), "pass": bool(max(thr) <= ctx.cfg.C_max)}
    return out, _rows("cs_probe", None, [x0] * len(results), None, [r["r"] for r in results],
                      [r["lhs"] for r in results], [r["l2"] / r["psi_r"] for r in results])


def suite_equivalence(ctx):
    sk = ctx.sk(n_max=1)
    f = est.Profile.power(ctx.cfg.walk_dimension)
    d_max = min(ctx.d_max, float(ctx.grids.get("equivalence_d_max", ctx.d_max)))
    pr = est.equivalence_probe_thm6(sk, ctx.phi, f, ctx.volume(), d_max, C_max=ctx.cfg.C_max)
    rep = pr["one_step"]
    out = {"scaling": pr["scaling"], "one_step": rep.to_dict(), "off_diagonal_zeros": pr["off_diagonal_zeros"],
           "consistent": pr["consistent"], "pass": bool(pr["consistent"])}
    return out, _scan_rows("equivalence", rep)


RUNNERS = {
    "weights": suite_weights, "tails": suite_tails, "potential": suite_potential,
    "dheat": suite_scan("dheat"), "thm1": suite_scan("thm1"), "thm2": suite_scan("thm2"),
    "green": suite_green, "exit": suite_exit, "harnack": suite_harnack, "cs_probe": suite_cs_probe,
    "equivalence": suite_equivalence,
}


# -- reporting -----------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return obj


def run_experiment(cfg: ExperimentConfig, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    ctx = Context(cfg)
    report = {"config": cfg.to_dict(), "backend": kernels.BACKEND, "suites": {}}
    all_ok = True
    for name in cfg.suites:
        try:
            res = RUNNERS[name](ctx)
        except (SubkernelError, ValueError, KeyError) as exc:
            res = ({"pass": False, "error": f"{type(exc).__name__}: {exc}"}, [])
        data, rows = res[0], res[1]
        if len(res) > 2:
            svg.write(os.path.join(out_dir, f"{name}.svg"), res[2])
        if rows:
            with open(os.path.join(out_dir, f"{name}.csv"), "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(CSV_COLUMNS)
                for row in rows:
                    wr.writerow([_fmt(v) for v in row])
        report["suites"][name] = data
        all_ok = all_ok and bool(data.get("pass", False))
    report["pass"] = all_ok
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(_clean(report), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return report


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


# -- entry point ---------------------------------------------------------------------


def _parse_bernstein_arg(text):
    if ":" in text and not text.lstrip().startswith("{"):
        kind, _, rest = text.partition(":")
        if kind == "stable":
            return {"kind": "stable", "alpha": float(rest)}
        raise ConfigError(f"cannot parse Bernstein shorthand {text!r}")
    return text


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="subkernel", description="Subordinate random walk verification harness.")
    subp = ap.add_subparsers(dest="cmd", required=True)
    r = subp.add_parser("run", help="run an experiment config (file path or preset name)")
    r.add_argument("config")
    r.add_argument("--out", default=None)
    r.add_argument("--threads", type=int, default=None)
    r.add_argument("--seed", type=int, default=None)
    subp.add_parser("list-presets", help="print the built-in presets")
    w = subp.add_parser("weights", help="print subordinator step weights c(1..K)")
    w.add_argument("--bernstein", required=True,
                   help='JSON spec, a kind name, or stable:ALPHA (e.g. \'{"kind":"stable","alpha":0.5}\')')
    w.add_argument("--k", type=int, required=True)
    args = ap.parse_args(argv)

    if args.cmd == "list-presets":
        for name in presets.names():
            print(name)
        return 0

    if args.cmd == "weights":
        try:
            phi = bern.BernsteinFunction.from_spec(_parse_bernstein_arg(args.bernstein))
            if args.k < 1:
                raise ConfigError("--k must be >= 1")
            wts = bern.weights(phi, args.k)
        except (ConfigError, ValueError, SubkernelError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        print("k,c")
        for k in range(1, wts.K + 1):
            print(f"{k},{float(wts.c[k])!r}")
        print(f"# tail_mass={float(wts.tail_mass)!r} method={wts.method}")
        return 0

    try:
        if os.path.isfile(args.config):
            with open(args.config) as fh:
                text = fh.read()
            cfg = parse_config(text, os.path.dirname(os.path.abspath(args.config)))
        elif args.config in presets.PRESETS:
            cfg = ExperimentConfig.from_dict(presets.get(args.config))
        else:
            raise ConfigError(f"no such config file or preset: {args.config}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    out_dir = args.out or cfg.output or f"out-{cfg.name}"
    try:
        if args.threads:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.threads):
                report = run_experiment(cfg, out_dir)
        else:
            report = run_experiment(cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for name, data in report["suites"].items():
        print(f"{name:12s} {'PASS' if data.get('pass') else 'FAIL'}" +
              (f"  ({data['error']})" if "error" in data else ""))
    print(f"report: {os.path.join(out_dir, 'report.json')}")
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
