"""Command line entry point: ``curvlab <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys

from . import generators as gen
from . import report
from .chain import ChainError, Tolerances, build_chain
from .curvature import NotLazyError, curvature_table
from .functional import OptConfig, alpha_logsob, alpha_mod, mixing_time
from .isoperimetry import N_MAX_ENUM, iso_profile
from .separation import (CutPartition, SepConfig, SeparationNotConverged,
                         dirichlet_from_separation)
from .spectral import alpha_spectral, dirichlet_eigenvalue, spectrum
from .verify import ALL_THEOREMS, Instance, VerifyConfig, default_battery, run_battery, verify


def _param(text: str):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    if val.startswith("@"):
        with open(val[1:], encoding="utf-8") as fh:
            return key, json.load(fh)
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def _tolerances(args) -> Tolerances:
    return Tolerances(rev=args.tol_rev, sum=args.tol_sum, lip=args.tol_lip)


def _load(args):
    with open(args.spec, encoding="utf-8") as fh:
        spec = json.load(fh)
    return spec, build_chain(spec, _tolerances(args))


def _opt(args) -> OptConfig:
    return OptConfig(restarts=args.restarts, max_iters=args.max_iters, tol=args.opt_tol, seed=args.seed)


def _header(args, spec=None, **extra):
    h = {"library": "curvlab", "version": report.__version__, "command": args.command,
         "tolerances": {"rev": args.tol_rev, "sum": args.tol_sum, "lip": args.tol_lip}}
    if spec is not None and "provenance" in spec:
        h["provenance"] = spec["provenance"]
    h.update(extra)
    return h


def _emit(args, records, header):
    text = report.render_records(records, args.format, header)
    _out(args, text)


def _out(args, text):
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)


def _vertices(chain, text):
    if not text:
        return []
    labels = [s.strip() for s in text.split(",") if s.strip()]
    index = {lab: i for i, lab in enumerate(chain.labels)}
    try:
        return [index[s] for s in labels]
    except KeyError as exc:
        raise SystemExit(f"unknown vertex {exc}") from None


# ----------------------------------------------------------------------
# subcommands


def cmd_gen(args):
    params = dict(args.params)
    spec = gen.generate(args.family, params, args.seed)
    _out(args, json.dumps(spec, indent=1) + "\n")
    return 0


def cmd_curvature(args):
    spec, chain = _load(args)
    sectional = None if not args.sectional else True
    try:
        table = curvature_table(chain, sectional)
    except NotLazyError as exc:
        raise SystemExit(str(exc)) from None
    lab = chain.labels
    rows = []
    for e in table:
        row = {"x": lab[e.edge[0]], "y": lab[e.edge[1]], "kappa": e.kappa}
        if e.kappa_inf is not None:
            row["kappa_inf"] = e.kappa_inf
            row["sectional_nonneg"] = e.sectional_nonneg
        rows.append(row)
    _emit(args, rows, _header(args, spec, lazy=chain.is_lazy))
    return 0


def cmd_spectral(args):
    spec, chain = _load(args)
    s = spectrum(chain)
    rows = [{"k": k, "eigenvalue": float(v)} for k, v in enumerate(s.eigenvalues)]
    extra = {"spectral_gap": s.lam}
    if args.dirichlet:
        W = _vertices(chain, args.dirichlet)
        extra["dirichlet_set"] = [chain.labels[i] for i in W]
        extra["dirichlet_eigenvalue"] = dirichlet_eigenvalue(chain, W, s)
    if chain.n <= N_MAX_ENUM and not args.no_alpha_spectral:
        val, X = alpha_spectral(chain)
        extra["alpha_spectral"] = val
        extra["alpha_spectral_X"] = [chain.labels[i] for i in X]
    rows.append({"k": "summary", **extra})
    _emit(args, rows, _header(args, spec))
    return 0


def cmd_logsob(args):
    spec, chain = _load(args)
    cfg = _opt(args)
    a = alpha_logsob(chain, cfg)
    am = alpha_mod(chain, cfg)
    tau, x = mixing_time(chain)
    rows = []
    for name, r in (("alpha", a), ("alpha_mod", am)):
        rows.append({"constant": name, "value": r.value, "limit": r.limit,
                     "converged": r.converged, "restarts": r.restarts_used,
                     "grid_value": r.grid_value, "witness": r.witness})
    rows.append({"constant": "tau_mix", "value": tau, "worst_vertex": chain.labels[x]})
    rows.append({"constant": "lambda", "value": spectrum(chain).lam})
    _emit(args, rows, _header(args, spec, optimizer=vars(cfg)))
    return 0


def cmd_isoperimetry(args):
    spec, chain = _load(args)
    eps = tuple(float(e) for e in args.eps.split(","))
    prof = iso_profile(chain, eps)
    lab = chain.labels
    rows = []
    for name, h in (("h", prof.h), ("h_log", prof.h_log), ("h_sqrtlog", prof.h_sqrtlog)):
        rows.append({"quantity": name, "value": h.value, "witness": [lab[i] for i in h.witness]})
    for e, d in prof.diam_obs.items():
        rows.append({"quantity": f"diam_obs[{e:g}]", "value": d.value,
                     "witness": [[lab[i] for i in d.A], [lab[i] for i in d.B]]})
    for r, (v, A) in prof.concentration.items():
        rows.append({"quantity": f"concentration[{r}]", "value": v, "witness": [lab[i] for i in A]})
    rows.append({"quantity": "rho", "value": prof.rho})
    _emit(args, rows, _header(args, spec))
    return 0


def cmd_separate(args):
    spec, chain = _load(args)
    if args.split:
        part = CutPartition.from_split(chain, _vertices(chain, args.split))
    else:
        part = CutPartition.of(chain, _vertices(chain, args.X), _vertices(chain, args.K),
                               _vertices(chain, args.Y))
    cfg = SepConfig(step=args.step, tol=args.sep_tol, max_iters=args.max_iters)
    try:
        b = dirichlet_from_separation(chain, part, cfg)
    except SeparationNotConverged as exc:
        sol = exc.solution
        rows = [{"vertex": chain.labels[i], "f": float(sol.f[i])} for i in range(chain.n)]
        rows.append({"vertex": "summary", "converged": False, "residual": sol.residual,
                     "iterations": sol.iterations})
        _emit(args, rows, _header(args, spec))
        return 1
    sol = b.solution
    side = ["X" if part.X[i] else "K" if part.K[i] else "Y" for i in range(chain.n)]
    rows = [{"vertex": chain.labels[i], "side": side[i], "f": float(sol.f[i])} for i in range(chain.n)]
    rows.append({"vertex": "summary", "C": sol.C, "residual": sol.residual,
                 "iterations": sol.iterations, "converged": sol.converged,
                 **{k: bool(v) for k, v in sol.checks.items()},
                 "bound_X": b.bound_X, "lambda_X": b.lambda_X, "bound_Y": b.bound_Y,
                 "lambda_Y": b.lambda_Y, "theta": b.theta, "theta_target": b.theta_target})
    _emit(args, rows, _header(args, spec))
    return 0 if all(sol.checks.values()) else 1


def cmd_verify(args):
    ids = None
    if args.theorems:
        ids = [t.strip() for t in args.theorems.split(",") if t.strip()]
        unknown = [t for t in ids if t not in ALL_THEOREMS]
        if unknown:
            raise SystemExit(f"unknown theorem ids: {', '.join(unknown)}")
    cfg = VerifyConfig(opt=_opt(args), check_tol=args.check_tol, samples=args.samples, seed=args.seed)
    if args.spec == "battery":
        instances = default_battery(args.seed)
        results = run_battery(instances, ids, cfg)
    else:
        spec, chain = _load(args)
        prov = spec.get("provenance", {"source": args.spec})
        instances = [Instance(args.spec, chain, prov)]
        results = verify(chain, ids, cfg, args.spec)
    header = report.provenance(args.seed, instances, cfg)
    fmt = args.format
    report.write(results, args.output, fmt, header, args.timings)
    return report.exit_code(results)


# ----------------------------------------------------------------------


def _common(p, opt=False, fmt=True):
    p.add_argument("--tol-rev", type=float, default=1e-10, help="reversibility tolerance")
    p.add_argument("--tol-sum", type=float, default=1e-10, help="mass tolerance")
    p.add_argument("--tol-lip", type=float, default=1e-9, help="Lipschitz tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None, help="output file (default stdout)")
    if fmt:
        p.add_argument("--format", choices=report.FORMATS, default="table")
    if opt:
        p.add_argument("--restarts", type=int, default=64)
        p.add_argument("--max-iters", type=int, default=500)
        p.add_argument("--opt-tol", type=float, default=1e-10)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="curvlab", description="Curvature and functional inequalities on finite Markov chains")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a graph description for a generator family")
    p.add_argument("family", choices=sorted(list(gen.FAMILIES) + ["lazify", "product"]))
    p.add_argument("params", nargs="*", type=_param, help="key=value (JSON values, @file for nested specs)")
    _common(p, fmt=False)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("curvature", help="Ollivier curvature per edge")
    p.add_argument("spec")
    p.add_argument("--sectional", action="store_true", help="also report W_inf curvature (lazy chains)")
    _common(p)
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("spectral", help="spectrum, Dirichlet eigenvalues, log-spectral constant")
    p.add_argument("spec")
    p.add_argument("--dirichlet", help="comma separated vertex labels")
    p.add_argument("--no-alpha-spectral", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("logsob", help="log-Sobolev constants and mixing time")
    p.add_argument("spec")
    _common(p, opt=True)
    p.set_defaults(func=cmd_logsob)

    p = sub.add_parser("isoperimetry", help="Cheeger constants, observable diameter, concentration")
    p.add_argument("spec")
    p.add_argument("--eps", default="0.125", help="comma separated eps values")
    _common(p)
    p.set_defaults(func=cmd_isoperimetry)

    p = sub.add_parser("separate", help="solve the Laplacian separation problem for a cut")
    p.add_argument("spec")
    p.add_argument("--X", default="")
    p.add_argument("--K", default="")
    p.add_argument("--Y", default="")
    p.add_argument("--split", help="derive X, K, Y from the cut A | A^c")
    p.add_argument("--step", choices=("euler", "semigroup"), default="semigroup")
    p.add_argument("--sep-tol", type=float, default=1e-9)
    p.add_argument("--max-iters", type=int, default=200_000)
    _common(p)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("verify", help="run theorem checks on a spec or the default battery")
    p.add_argument("spec", help="graph description file or 'battery'")
    p.add_argument("--theorems", help=f"comma separated ids from {','.join(ALL_THEOREMS)}")
    p.add_argument("--check-tol", type=float, default=1e-8)
    p.add_argument("--samples", type=int, default=100, help="random functions per gradient check")
    p.add_argument("--timings", action="store_true", help="include runtimes (breaks byte determinism)")
    _common(p, opt=True)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ChainError, ValueError, OSError) as exc:
        print(f"curvlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
