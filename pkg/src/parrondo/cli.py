"""Command-line interface: ``parrondo <subcommand> [flags]``.

Exit status is 0 on success, 2 on usage errors and 1 when a computation
fails (for example a chain with several recurrent classes).  Text output is
rounded to six significant digits; JSON always carries full precision.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

from .chains import GameParams, build_full, normalize_game
from .lumpability import check_lumpable
from .montecarlo import SimConfig, simulate, simulate_reduced_li
from .region import ENGINES, WORKERS_ENV, fair_surface, scan
from .solver import DIHEDRAL_MAX_N, MultipleRecurrentClasses, NumericalFailure, mu_exact, mu_li
from .state_space import count_partition, dihedral_partition

TABLE_COLUMNS = ("mu_B", "mu_hat_B", "mu_C", "mu_Cprime", "mu_hat_Cprime")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _prob(text: str) -> Fraction:
    try:
        v = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"probability out of [0, 1]: {text}")
    return v


def _num(v: Fraction, exact: bool):
    return v if exact else float(v)


def _params(args, N: int | None = None) -> GameParams:
    exact = getattr(args, "exact", False)
    return GameParams(_num(args.p0, exact), _num(args.p1, exact), _num(args.p2, exact),
                      _num(args.gamma, exact), args.n if N is None else N)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    return f"{float(v):.6g}"


# -- subcommands -------------------------------------------------------------------------------

def cmd_mu(args) -> str:
    params = _params(args)
    game = normalize_game(args.game)
    if args.engine == "li":
        rep = mu_li(params, game)
    else:
        rep = mu_exact(params, game, method="full" if args.engine == "full" else "dihedral")
    d = rep.to_dict()
    if params.exact:
        d["mu_exact"] = str(rep.mu)
    if args.format == "json":
        return json.dumps(d) + "\n"
    if args.format == "csv":
        keys = list(d)
        return ",".join(keys) + "\n" + ",".join(str(d[k]) for k in keys) + "\n"
    extra = f" = {rep.mu}" if params.exact else ""
    return f"N={params.N} game={game} method={rep.method} mu={_fmt(rep.mu)}{extra}\n"


def table_row(p0, p1, p2, gamma, N: int) -> dict:
    """One row of a Table-1 style block; exact columns are omitted above the dihedral limit."""
    params = GameParams(p0, p1, p2, gamma, N)
    row = {"N": N}
    if N <= DIHEDRAL_MAX_N:
        row["mu_B"] = float(mu_exact(params, "B").mu)
        row["mu_C"] = float(mu_exact(params, "C").mu)
        row["mu_Cprime"] = float(mu_exact(params, "C'").mu)
    else:
        row["mu_B"] = row["mu_C"] = row["mu_Cprime"] = None
    row["mu_hat_B"] = float(mu_li(params, "B").mu)
    row["mu_hat_Cprime"] = float(mu_li(params, "C'").mu)
    return {k: row[k] for k in ("N",) + TABLE_COLUMNS}


def cmd_table(args) -> str:
    ns = list(range(args.nmin, args.nmax + 1))
    if args.extra:
        ns += [int(v) for v in args.extra.split(",") if v.strip()]
    for N in ns:
        if N < 3:
            raise UsageError(f"N must be at least 3, got {N}")
    p0, p1, p2, gamma = (float(v) for v in (args.p0, args.p1, args.p2, args.gamma))
    rows = [table_row(p0, p1, p2, gamma, N) for N in ns]
    if args.format == "json":
        return json.dumps({"p0": p0, "p1": p1, "p2": p2, "gamma": gamma, "rows": rows}) + "\n"
    if args.format == "csv":
        lines = [",".join(("N",) + TABLE_COLUMNS)]
        lines += [",".join([str(r["N"])] + ["" if r[c] is None else f"{r[c]:.17g}" for c in TABLE_COLUMNS]) for r in rows]
        return "\n".join(lines) + "\n"
    head = f"{'N':>5}" + "".join(f"{c:>15}" for c in TABLE_COLUMNS)
    lines = [head] + [f"{r['N']:>5}" + "".join(f"{_fmt(r[c]):>15}" for c in TABLE_COLUMNS) for r in rows]
    return "\n".join(lines) + "\n"


def cmd_check_lump(args) -> str:
    params = _params(args)
    if params.N > 14:
        raise UsageError("lumpability checks run on the full chain, N <= 14")
    P = build_full(params, normalize_game(args.game))
    part = dihedral_partition(params.N) if args.partition == "dihedral" else count_partition(params.N)
    rep = check_lumpable(P, part)
    if args.format == "json":
        d = rep.to_dict()
        d.update(N=params.N, game=P.game, partition=args.partition)
        return json.dumps(d) + "\n"
    return f"N={params.N} game={P.game} partition={args.partition}: {rep.describe()}\n"


def cmd_mc(args) -> str:
    params = _params(args)
    cfg = SimConfig(params, args.game, turns=args.turns, burn_in=args.burn_in, seed=args.seed,
                    stream=args.stream, initial_state=args.initial_state)
    res = simulate_reduced_li(cfg) if args.reduced else simulate(cfg)
    if args.format == "json":
        d = res.to_dict()
        d.update(N=params.N, game=cfg.game, reduced=args.reduced)
        return json.dumps(d) + "\n"
    return (f"N={params.N} game={cfg.game} mean={_fmt(res.mean_profit)} "
            f"se={_fmt(res.std_error)} turns={res.total_turns} seed={res.seed}\n")


def cmd_scan(args) -> str:
    if args.resolution < 1:
        raise UsageError("--resolution must be at least 1")
    res = scan(args.n, float(args.gamma), args.resolution, args.engine, workers=args.workers)
    if args.format == "json":
        return json.dumps(res.to_dict()) + "\n"
    if args.format == "csv":
        return res.to_csv()
    counts = {c: 0 for c in ("parrondo", "anti_parrondo", "neither", "error")}
    for pt in res.points:
        counts[pt.classification] += 1
    return " ".join(f"{k}={v}" for k, v in counts.items()) + "\n"


def cmd_surface(args) -> str:
    if args.resolution < 1:
        raise UsageError("--resolution must be at least 1")
    mesh = fair_surface(args.n, float(args.gamma), args.game, args.engine, args.resolution,
                        tol=args.tol, workers=args.workers)
    if args.format == "json":
        return mesh.to_json() + "\n"
    if args.format == "csv":
        lines = ["p0,p2,p1"] + [f"{p.p0:.17g},{p.p2:.17g},{p.p1:.17g}" for p in mesh.points]
        return "\n".join(lines) + "\n"
    return f"{len(mesh.points)} fair points, {len(mesh.skipped)} skipped columns\n"


# -- parser ------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--n", type=int, default=4, help="number of players (>= 3)")
    common.add_argument("--p0", type=_prob, default=Fraction(1))
    common.add_argument("--p1", type=_prob, default=Fraction(4, 25))
    common.add_argument("--p2", type=_prob, default=Fraction(7, 10))
    common.add_argument("--gamma", type=_prob, default=Fraction(1, 2))
    common.add_argument("--game", default="B", help="A, A', B, C or C'")
    common.add_argument("--engine", default="exact", choices=("exact", "full", "li"))
    common.add_argument("--format", default="text", choices=("json", "csv", "text"))
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="write output to this file (UTF-8)")

    parser = _Parser(prog="parrondo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mu", parents=[common], help="equilibrium mean profit")
    p.add_argument("--exact", action="store_true", help="rational arithmetic")
    p.set_defaults(func=cmd_mu)

    p = sub.add_parser("table", parents=[common], help="table of mean profits over a range of N")
    p.add_argument("--nmin", type=int, default=3)
    p.add_argument("--nmax", type=int, default=12)
    p.add_argument("--extra", default="", help="comma-separated additional N values")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("check-lump", parents=[common], help="lumpability of the full chain")
    p.add_argument("--partition", default="dihedral", choices=("dihedral", "count"))
    p.add_argument("--exact", action="store_true")
    p.set_defaults(func=cmd_check_lump)

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo estimate of the mean profit")
    p.add_argument("--turns", type=int, default=10 ** 6)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--initial-state", type=int, default=0)
    p.add_argument("--reduced", action="store_true", help="simulate the count-averaged chain")
    p.set_defaults(func=cmd_mc)

    for name, func, helptext in (("scan", cmd_scan, "classify the parameter cube"),
                                 ("surface", cmd_surface, "fair surface mesh")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--resolution", type=int, default=10)
        p.add_argument("--workers", type=int, default=None, help=f"worker processes (default ${WORKERS_ENV} or 1)")
        if name == "surface":
            p.add_argument("--tol", type=float, default=1e-10)
        p.set_defaults(func=func)
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command in ("scan", "surface") and args.engine == "full":
            args.engine = "exact"
        if args.command in ("scan", "surface") and args.engine not in ENGINES:
            raise UsageError(f"--engine must be one of {ENGINES}")
        if args.n < 3:
            raise UsageError(f"--n must be at least 3, got {args.n}")
        normalize_game(args.game)
    except UsageError as exc:
        print(f"parrondo: error: {exc}", file=stderr)
        return 2
    except ValueError as exc:
        print(f"parrondo: error: {exc}", file=stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        text = args.func(args)
    except UsageError as exc:
        print(f"parrondo: error: {exc}", file=stderr)
        return 2
    except (MultipleRecurrentClasses, NumericalFailure, ZeroDivisionError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=stderr)
        return 1
    except ValueError as exc:
        print(f"parrondo: error: {exc}", file=stderr)
        return 2
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
