"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 numerical failure.
Results go to stdout (or ``--out``), diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys

from . import __version__
from .design import check_stability, design_reward_scheme, stability_lp
from .equilibrium import (
    solve_equilibrium,
    uniqueness_certificate_general,
    uniqueness_certificate_tree,
)
from .errors import EffortNetError, NumericalError, ValidationError
from .files import ParseError, load_efforts, load_network
from .model import EpProduct, EpQuadratic, Kind, balanced_shape
from .welfare import optimal_effort, poa, poa_bound_balanced

SWEEP_HEADER = ["beta", "so_eq", "so_opt", "poa", "bound", "unique"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def fmt(v) -> str:
    return f"{float(v):.12g}"


def _beta_range(text):
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo or lo < 0:
        raise argparse.ArgumentTypeError("need 0 <= lo <= hi and step > 0")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + k * step for k in range(count)]


def build_parser() -> argparse.ArgumentParser:
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--tol", type=float, default=1e-10)
    solver.add_argument("--max-iter", type=int, default=100_000)
    solver.add_argument("--starts", type=int, default=16)
    solver.add_argument("--seed", type=int, default=42)
    solver.add_argument("--method", choices=["tree", "fixed-point"], default=None,
                        help="equilibrium solver (default: tree for EP hierarchies)")
    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--grid", type=int, default=101)
    search.add_argument("--refine-rounds", type=int, default=3)

    p = _Parser(prog="effortnet", description="Effort games on influencer-influencee networks")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("eq", parents=[solver], help="Nash equilibrium and uniqueness certificate")
    s.add_argument("network")
    s.add_argument("--samples", type=int, default=1000)

    s = sub.add_parser("opt", parents=[search], help="socially optimal efforts")
    s.add_argument("network")

    s = sub.add_parser("poa", parents=[solver, search], help="price of anarchy for the file's scheme")
    s.add_argument("network")

    s = sub.add_parser("bound", help="balanced-hierarchy PoA bound")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--D", type=int, required=True)
    s.add_argument("--beta", type=float, required=True)

    s = sub.add_parser("stable", help="stability of an effort profile")
    s.add_argument("network")
    s.add_argument("--efforts", required=True)
    s.add_argument("--lp", action="store_true", help="use the per-node LP instead of the closed form")

    s = sub.add_parser("design", parents=[search], help="design a reward-sharing scheme")
    s.add_argument("network")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--candidates", type=int, default=500)

    s = sub.add_parser("check", help="uniqueness certificates")
    s.add_argument("network")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--seed", type=int, default=42)

    s = sub.add_parser("sweep", parents=[solver, search], help="PoA-vs-beta CSV")
    s.add_argument("network")
    s.add_argument("--beta-range", type=_beta_range, required=True)
    s.add_argument("--out")
    s.add_argument("--fixed-h", action="store_true", help="keep the file's scheme instead of designing one")
    s.add_argument("--candidates", type=int, default=500)
    return p


# --------------------------------------------------------------------------


def _solver_opts(args):
    opts = {"method": args.method}
    if args.method == "fixed-point":
        opts.update(tol=args.tol, max_iter=args.max_iter, starts=args.starts, seed=args.seed)
    return opts


def _is_ep_tree(bundle):
    return bundle.net.kind is Kind.HIERARCHY and isinstance(bundle.model, EpProduct)


def _certificate_lines(bundle, samples, seed):
    lines = []
    if _is_ep_tree(bundle):
        c = uniqueness_certificate_tree(bundle.net, bundle.params, bundle.H)
        lines.append(f"certificate tree-analytic: {c.verdict.value} "
                     f"(beta^2*h_max = {fmt(c.lhs)} vs 1+b = {fmt(c.rhs)}; h_max = {fmt(c.h_max)})")
    else:
        c = uniqueness_certificate_general(bundle.net, bundle.model, EpQuadratic(bundle.params.b), bundle.H,
                                           samples=samples, seed=seed)
        lines.append(f"certificate sampled-spectral (heuristic): {c.verdict.value} "
                     f"(max ||grad G|| = {fmt(c.observed)} over {c.samples} samples, seed {c.seed})")
    return lines


def cmd_eq(args, out):
    bundle = load_network(args.network)
    payoff_fn = EpQuadratic(bundle.params.b)
    res = solve_equilibrium(bundle.net, bundle.model, payoff_fn, bundle.H, **_solver_opts(args))
    print(f"method: {res.method.value}", file=out)
    print("node,x,y", file=out)
    for i, (x, y) in enumerate(zip(res.x_star, res.outputs)):
        print(f"{i + 1},{fmt(x)},{fmt(y)}", file=out)
    print(f"residual: {fmt(res.residual)}", file=out)
    print(f"social_output: {fmt(res.social_output)}", file=out)
    if res.method.value == "fixed-point-iteration":
        print(f"iterations: {res.iterations} (seed {res.seed}, unconverged starts {res.unconverged_starts})",
              file=out)
    if len(res.distinct_limits) > 1:
        print(f"multiple equilibria: {len(res.distinct_limits)} distinct limits across starts", file=out)
    for node, cands in sorted(res.multiplicity.items()):
        print(f"multiplicity: node {node + 1} candidates {', '.join(fmt(c) for c in cands)}", file=out)
    for line in _certificate_lines(bundle, args.samples, getattr(args, "seed", 42)):
        print(line, file=out)


def cmd_opt(args, out):
    bundle = load_network(args.network)
    opt = optimal_effort(bundle.net, bundle.model, grid=args.grid, refine_rounds=args.refine_rounds)
    print(f"method: {opt.method.value}", file=out)
    print("node,x", file=out)
    for i, x in enumerate(opt.x):
        print(f"{i + 1},{fmt(x)}", file=out)
    print(f"social_output: {fmt(opt.so)}", file=out)


def cmd_poa(args, out):
    bundle = load_network(args.network)
    rep = poa(bundle.net, bundle.model, EpQuadratic(bundle.params.b), bundle.H, solver=_solver_opts(args),
              grid=args.grid, refine_rounds=args.refine_rounds)
    print(f"poa = {fmt(rep.poa)}", file=out)
    print(f"so_equilibrium = {fmt(rep.so_equilibrium)}", file=out)
    print(f"so_optimal = {fmt(rep.so_optimal)}", file=out)
    print(f"x_star = {' '.join(fmt(v) for v in rep.x_star)}", file=out)
    print(f"x_opt = {' '.join(fmt(v) for v in rep.x_opt)}", file=out)
    print(f"optimal_method = {rep.optimal_method.value}", file=out)
    if rep.multiplicity_note:
        print("note: multiple equilibria; PoA depends on the selected one", file=out)


def cmd_bound(args, out):
    rep = poa_bound_balanced(args.d, args.D, args.beta)
    print(f"bound = {fmt(rep.bound)}", file=out)
    if rep.xi is not None:
        print(f"xi = {fmt(rep.xi)}", file=out)
        print(f"t = {' '.join(fmt(t) for t in rep.phi_sequence)}", file=out)
    if rep.clamped:
        print(f"note: raw bound {fmt(rep.raw_bound)} < 1 clamped to 1", file=out)


def cmd_stable(args, out):
    bundle = load_network(args.network)
    x = load_efforts(args.efforts, bundle.net.n)
    fn = stability_lp if args.lp else check_stability
    res = fn(bundle.net, bundle.params, x)
    if res.stable:
        print("STABLE", file=out)
        print("i,j,h", file=out)
        for i, j, h in res.H.triples():
            print(f"{i + 1},{j + 1},{fmt(h)}", file=out)
    else:
        print("INFEASIBLE", file=out)
    print("node,margin", file=out)
    for i, s in enumerate(res.binding_report):
        print(f"{i + 1},{fmt(s.margin)}", file=out)


def cmd_design(args, out):
    bundle = load_network(args.network)
    res = design_reward_scheme(bundle.net, bundle.params, candidates=args.candidates, seed=args.seed,
                               grid=args.grid, refine_rounds=args.refine_rounds)
    print(f"guarantee: {res.guarantee.value}", file=out)
    if res.bound is not None:
        print(f"bound: {fmt(res.bound)}", file=out)
    print(f"achieved_so: {fmt(res.achieved_so)}", file=out)
    print(f"optimal_so: {fmt(res.so_optimal)}", file=out)
    print(f"poa: {fmt(res.poa)}", file=out)
    print("i,j,h", file=out)
    for i, j, h in res.H.triples():
        print(f"{i + 1},{j + 1},{fmt(h)}", file=out)


def cmd_check(args, out):
    bundle = load_network(args.network)
    if _is_ep_tree(bundle):
        c = uniqueness_certificate_tree(bundle.net, bundle.params, bundle.H)
        print(f"tree-analytic: {c.verdict.value} (beta^2*h_max = {fmt(c.lhs)} vs 1+b = {fmt(c.rhs)})", file=out)
    else:
        print("tree-analytic: not applicable (needs an EP hierarchy)", file=out)
    c = uniqueness_certificate_general(bundle.net, bundle.model, EpQuadratic(bundle.params.b), bundle.H,
                                       samples=args.samples, seed=args.seed)
    print(f"sampled-spectral (heuristic): {c.verdict.value} "
          f"(max ||grad G|| = {fmt(c.observed)} over {c.samples} samples, seed {c.seed})", file=out)


def sweep_rows(bundle, betas, *, fixed_h=False, solver=None, grid=101, refine_rounds=3, candidates=500,
               seed=42):
    shape = balanced_shape(bundle.net)
    rows = []
    for beta in betas:
        b = bundle.with_beta(beta)
        payoff_fn = EpQuadratic(b.params.b)
        if fixed_h:
            rep = poa(b.net, b.model, payoff_fn, b.H, solver=solver, grid=grid, refine_rounds=refine_rounds)
            so_eq, so_opt, H = rep.so_equilibrium, rep.so_optimal, b.H
        else:
            if not _is_ep_tree(b):
                raise ValidationError("designing a scheme needs an EP hierarchy; use --fixed-h")
            d = design_reward_scheme(b.net, b.params, candidates=candidates, seed=seed, grid=grid,
                                     refine_rounds=refine_rounds)
            so_eq, so_opt, H = d.achieved_so, d.so_optimal, d.H
        if shape is not None and b.params.mu.kind == "one":
            bound = poa_bound_balanced(shape[0], shape[1], beta).bound
        else:
            bound = math.nan
        if _is_ep_tree(b):
            unique = uniqueness_certificate_tree(b.net, b.params, H).verdict.value == "unique"
        else:
            unique = uniqueness_certificate_general(b.net, b.model, payoff_fn, H, samples=200,
                                                    seed=seed).verdict.value == "unique"
        rows.append((beta, so_eq, so_opt, so_opt / so_eq, bound, unique))
    return rows


def cmd_sweep(args, out):
    bundle = load_network(args.network)
    rows = sweep_rows(bundle, args.beta_range, fixed_h=args.fixed_h, solver=_solver_opts(args),
                      grid=args.grid, refine_rounds=args.refine_rounds, candidates=args.candidates,
                      seed=args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for beta, so_eq, so_opt, p, bound, unique in rows:
        w.writerow([fmt(beta), fmt(so_eq), fmt(so_opt), fmt(p), fmt(bound), "true" if unique else "false"])
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
        print(f"wrote {len(rows)} rows to {args.out}", file=args.err)
    else:
        out.write(buf.getvalue())


COMMANDS = {
    "eq": cmd_eq,
    "opt": cmd_opt,
    "poa": cmd_poa,
    "bound": cmd_bound,
    "stable": cmd_stable,
    "design": cmd_design,
    "check": cmd_check,
    "sweep": cmd_sweep,
}


def run_command(argv, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=err)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    args.err = err
    try:
        COMMANDS[args.command](args, out)
    except (ValidationError, ParseError) as exc:
        print(f"error: {exc}", file=err)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=err)
        return 3
    except EffortNetError as exc:
        print(f"error: {exc}", file=err)
        return 3
    return 0


def main(argv=None):
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()

