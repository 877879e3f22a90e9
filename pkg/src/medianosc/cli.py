"""Command-line front end: ``medianosc <subcommand> ...``.

Exit codes: 0 success, 1 invalid input, 2 a violated invariant or an internal
error.  Errors are reported as a single ``kind: detail`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import random
import sys
from fractions import Fraction
from pathlib import Path

from . import examples, porosity, sparse, weights
from .core import (
    Cube,
    DyadicCube,
    InvariantViolation,
    MedianOscError,
    Radical,
    ValidationError,
    cell_partition,
    format_rational,
    load_step_function,
    random_step_function,
    restrict_distribution,
    to_rational,
)
from .median import (
    MedianParams,
    all_dyadic,
    local_mean_oscillation_of,
    median_invariant_failures,
    upper_median,
)

SCHEMA = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


# ---------------------------------------------------------------- encoding


def encode(v):
    """JSON-ready form: rationals as "p/q" strings, radicals as exact strings."""
    if isinstance(v, bool) or v is None or isinstance(v, (int, str)):
        return v
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, Radical):
        return {"exact": str(v), "approx": float(v)}
    if isinstance(v, float):
        return v if math.isfinite(v) else str(v)
    if isinstance(v, Cube):
        return {"corner": [format_rational(c) for c in v.corner], "side": format_rational(v.side)}
    if isinstance(v, DyadicCube):
        return encode(v.cube)
    if isinstance(v, dict):
        return {str(k): encode(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [encode(x) for x in v]
    return str(v)


def flat(v) -> str:
    if isinstance(v, Radical):
        return repr(float(v))
    if isinstance(v, Fraction):
        return format_rational(v)
    if v is None:
        return ""
    return str(v)


def emit(payload: dict, out) -> None:
    out.write(json.dumps(encode({"schema": SCHEMA, **payload}), indent=2) + "\n")


def emit_csv(header: list, rows: list, out) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([flat(x) for x in r])
    out.write(buf.getvalue())


# ---------------------------------------------------------------- parsing


def parse_rational_list(text: str) -> list[Fraction]:
    try:
        return [to_rational(tok) for tok in text.split(",") if tok.strip()]
    except ValidationError as exc:
        raise ValidationError(f"bad number list {text!r}: {exc}")


def parse_cube(text: str) -> Cube:
    """``c1,...,cn,side``."""
    vals = parse_rational_list(text)
    if len(vals) < 2:
        raise ValidationError(f"cube needs a corner and a side: {text!r}")
    return Cube(tuple(vals[:-1]), vals[-1])


def parse_scales(text: str) -> list[int]:
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if lo > hi:
            raise ValidationError("empty scale range")
        return list(range(lo, hi + 1))
    return [int(x) for x in text.split(",")]


def parse_family(text: str | None, path: str | None, dim: int) -> list[Cube]:
    if path:
        cubes = []
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                cubes.append(parse_cube(",".join(line.replace(",", " ").split())))
        if not cubes:
            raise ValidationError("family file is empty")
        return cubes
    if not text:
        raise ValidationError("a --family or --family-file is required")
    try:
        kind, a, b = text.split(":")
    except ValueError:
        raise ValidationError(f"family argument must be kind:arg:arg, got {text!r}")
    if kind == "dyadic":
        root = parse_cube(a)
        return [dc.cube for dc in all_dyadic(root, int(b))]
    if kind == "centered":
        pt = parse_rational_list(a)
        out = []
        for k in parse_scales(b):
            side = Fraction(2) ** k
            out.append(Cube(tuple(c - side / 2 for c in pt), side))
        return out
    raise ValidationError(f"unknown family kind {kind!r}")


def parse_set(args) -> porosity.PointSet:
    if args.points:
        return porosity.read_point_file(Path(args.points).read_text())
    text = args.set
    if not text:
        raise ValidationError("a --set or --points is required")
    kind, _, rest = text.partition(":")
    if kind == "lattice":
        return porosity.PointSet.lattice(args.dim)
    if kind == "single":
        pt = parse_rational_list(rest) if rest else [Fraction(0)] * args.dim
        return porosity.PointSet.single(tuple(pt))
    if kind == "subspace":
        return porosity.PointSet.subspace(args.dim, int(rest))
    if kind == "gamma":
        g, _, bound = rest.partition(":")
        return examples.gamma_set(to_rational(g), int(bound or 10**4))
    raise ValidationError(f"unknown set kind {kind!r}")


def params(args) -> MedianParams:
    return MedianParams(to_rational(args.s), to_rational(args.t))


def load_function(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}")
    return load_step_function(text)


# ---------------------------------------------------------------- commands


def cmd_median(args, out) -> int:
    f = load_function(args.function)
    Q = parse_cube(args.cube) if args.cube else f.root
    p = params(args)
    dist = restrict_distribution(f, Q)
    ms, mt = upper_median(dist, p.s), upper_median(dist, p.t)
    result = {"cube": Q, "s": p.s, "t": p.t, "M_s": ms, "M_t": mt, "d": mt - ms}
    if args.omega:
        a = to_rational(args.omega)
        result["omega"] = local_mean_oscillation_of(dist, a)
        result["omega_level"] = a
    if args.format == "csv":
        values = [v for k, v in result.items() if k != "cube"]
        header = [f"x{i}" for i in range(Q.dim)] + ["side"] + [k for k in result if k != "cube"]
        emit_csv(header, [[*Q.corner, Q.side, *values]], out)
    else:
        emit({"command": "median", **result}, out)
    return 0


def _check_family(fam, report, p: MedianParams, name: str):
    if not report.holds:
        raise InvariantViolation(f"{name} pointwise bound", f"fails at cell {report.worst_cell}")
    for rec in fam.packing:
        if not rec.holds:
            raise InvariantViolation("packing bound", f"at {rec.node.cube}")


def cmd_sparse(args, out) -> int:
    f = load_function(args.function)
    p = params(args)
    Q0 = parse_cube(args.cube) if args.cube else None
    fam, rep = sparse.build_dyadic_decomposition(f, Q0, p)
    _check_family(fam, rep, p, "dyadic")
    floor = (p.t - p.s) / (p.t - p.s + 1)
    if fam.eta_witness < floor:
        raise InvariantViolation("witness sparseness", f"{fam.eta_witness} < {floor}")
    result = {
        "kind": "dyadic",
        "members": len(fam),
        "eta_witness": fam.eta_witness,
        "carleson_sup": fam.carleson_sup,
        "constant": rep.constant_used,
        "holds": rep.holds,
        "worst_cell": rep.worst_cell,
        "cubes": fam.cubes(),
    }
    if args.general:
        gfam, grep = sparse.build_general_decomposition(f, Q0, p)
        if not grep.holds:
            raise InvariantViolation("general pointwise bound", f"fails at cell {grep.worst_cell}")
        result["general"] = {
            "members": len(gfam),
            "constant": grep.constant_used,
            "eta_witness": gfam.eta_witness,
            "carleson_sup": gfam.carleson_sup,
            "holds": grep.holds,
        }
    if args.format == "csv":
        rows = [[*m.cube.corner, m.cube.side, m.kind] for m in fam.members]
        emit_csv([f"x{i}" for i in range(f.dim)] + ["side", "kind"], rows, out)
    else:
        emit({"command": "sparse", "s": p.s, "t": p.t, **result}, out)
    return 0


def cmd_porosity(args, out) -> int:
    E = parse_set(args)
    fam = parse_family(args.family, args.family_file, E.dim)
    p = params(args)
    rep = porosity.porosity_report(E, fam, p, args.depth, args.delta_inv, sandwich=not args.no_sandwich, jobs=args.jobs)
    for row in rep.rows:
        if row.sandwich is not None and not row.sandwich.lower_ok:
            raise InvariantViolation("median/volume lower bound", f"fails on {row.cube}")
    if args.format == "csv":
        rows = []
        for r in rep.rows:
            v = lambda x: x.value if x is not None else None  # noqa: E731
            rows.append(
                [*r.cube.corner, r.cube.side, r.meets, v(r.V_s), v(r.V_t), v(r.V_1), r.median_ratio, r.weak_ratio]
            )
        header = [f"x{i}" for i in range(E.dim)] + ["side", "meets", "V_s", "V_t", "V_1", "V_t/V_s", "V_1/V_s"]
        emit_csv(header, rows, out)
        return 0
    rows = []
    for r in rep.rows:
        item = {"cube": r.cube, "meets": r.meets}
        if r.meets:
            item.update(
                V_s=r.V_s.value, V_t=r.V_t.value, V_1=r.V_1.value, L_s=r.V_s.side,
                median_ratio=r.median_ratio, weak_ratio=r.weak_ratio, porous_ratio=r.porous_ratio,
            )
            if r.sandwich is not None:
                sw = r.sandwich
                item["sandwich"] = {
                    "depth": sw.depth, "M_s_pow": sw.m_s_pow, "M_t_pow": sw.m_t_pow,
                    "lower_ok": sw.lower_ok, "upper_ok": sw.upper_ok,
                }
        rows.append(item)
    emit(
        {
            "command": "porosity",
            "set": E.describe(),
            "s": p.s,
            "t": p.t,
            "depth": args.depth,
            "delta_inverse": rep.delta_inverse,
            "above_resolution": rep.above_resolution,
            "porous": rep.porous,
            "weakly_porous": rep.weakly_porous,
            "median_porous": rep.median_porous,
            "worst_median_ratio": rep.worst_median_ratio,
            "worst_weak_ratio": rep.worst_weak_ratio,
            "rows": rows,
        },
        out,
    )
    return 0


def cmd_weights(args, out) -> int:
    E = parse_set(args)
    fam = parse_family(args.family, args.family_file, E.dim)
    w = weights.WeightParams(to_rational(args.alpha), args.p)
    rows, diverged = [], None
    for Q in fam:
        try:
            r = weights.ap_product(E, w, Q, args.mesh)
            rows.append([*Q.corner, Q.side, r.average, r.companion, r.product, "ok"])
        except weights.Divergence as exc:
            diverged = diverged or exc
            rows.append([*Q.corner, Q.side, None, None, None, "divergent"])
    if args.format == "csv":
        header = [f"x{i}" for i in range(E.dim)] + ["side", "average", "companion", "product", "flag"]
        emit_csv(header, rows, out)
        return 0
    finite = [r for r in rows if r[-1] == "ok"]
    # prefer an exact value among numerically tied maxima
    best = max(finite, key=lambda r: (round(porosity.fast_float(r[-2]), 12), isinstance(r[-2], Fraction))) if finite else None
    emit(
        {
            "command": "weights",
            "set": E.describe(),
            "alpha": w.alpha,
            "p": "inf" if w.p == math.inf else w.p,
            "value": best[-2] if best else None,
            "divergent": diverged is not None,
            "divergent_cube": diverged.cube if diverged else None,
            "rows": [{"cube": Cube(tuple(r[:-5]), r[-5]), "average": r[-4], "companion": r[-3],
                      "product": r[-2], "flag": r[-1]} for r in rows],
        },
        out,
    )
    return 0


def cmd_mu(args, out) -> int:
    E = parse_set(args)
    cfg = weights.MuConfig(s=to_rational(args.s), min_scale=args.min_scale, max_scale=args.max_scale)
    est = weights.mu_exponent_estimate(E, args.p, cfg)
    emit(
        {
            "command": "mu",
            "set": E.describe(),
            "p": "inf" if est.p == math.inf else est.p,
            "lower": est.lower,
            "upper": est.upper,
            "s_used": est.s_used,
            "cube_sample": est.cube_sample,
            "r_sample": est.r_sample,
            "degenerate": est.degenerate,
            "warnings": est.warnings,
        },
        out,
    )
    return 0


def cmd_counterexample(args, out) -> int:
    narrow = MedianParams(to_rational(args.s), to_rational(args.t))
    wide = MedianParams(to_rational(args.s_wide), to_rational(args.t_wide))
    rep = examples.counterexample_checks(args.K, narrow, wide)
    in_range = Fraction(1, 4) < narrow.s and narrow.t < Fraction(1, 2)
    if in_range and rep.seminorm != 0:
        raise InvariantViolation("dyadic median differences vanish", f"seminorm {rep.seminorm}")
    if wide.s < Fraction(1, 4) and wide.t > Fraction(3, 4):
        for m, d, e in rep.pair_differences:
            if d != e:
                raise InvariantViolation("pair differences grow linearly", f"m={m}: {d} != {e}")
    if args.format == "csv":
        emit_csv(["m", "d", "expected"], rep.pair_differences, out)
        return 0
    emit(
        {
            "command": "counterexample",
            "K": args.K,
            "s": narrow.s,
            "t": narrow.t,
            "seminorm": rep.seminorm,
            "dyadic_cubes": rep.cubes_checked,
            "s_wide": wide.s,
            "t_wide": wide.t,
            "pair_differences": [{"m": m, "d": d} for m, d, _ in rep.pair_differences],
            "pair_averages_zero": rep.pair_averages_zero,
        },
        out,
    )
    return 0


def cmd_gamma(args, out) -> int:
    g = to_rational(args.gamma)
    if args.demo == "scan":
        rep = examples.good_interval_scan(g, to_rational(args.s), args.count, args.bound)
        if args.format == "csv" or args.plot_data:
            emit_csv(
                ["n0", "n1", "left", "right", "scale", "predicted", "ratio"],
                [[r.n0, r.n1, r.left, r.right, r.scale, r.predicted, r.ratio] for r in rep.intervals],
                out,
            )
            return 0
        emit(
            {
                "command": "gamma",
                "demo": "scan",
                "gamma": g,
                "s": rep.s,
                "bound": rep.bound,
                "min_ratio": rep.min_ratio,
                "max_ratio": rep.max_ratio,
                "excluded_near_edge": rep.excluded,
                "intervals": [
                    {"n0": r.n0, "n1": r.n1, "left": r.left, "right": r.right, "scale": r.scale, "ratio": r.ratio}
                    for r in rep.intervals
                ],
            },
            out,
        )
        return 0
    cfg = examples.GammaDemoConfig(bound=args.bound, samples=args.samples, seed=args.seed)
    rep = examples.gamma_porosity_demo(g, cfg)
    if args.plot_data:
        emit_csv(["m", "ratio"], [[r.m, r.ratio] for r in rep.weak_rows], out)
        return 0
    emit(
        {
            "command": "gamma",
            "demo": "porosity",
            "gamma": g,
            "bound": args.bound,
            "seed": args.seed,
            "median_porosity": {
                "samples": cfg.samples,
                "sup_ratio": rep.sup_ratio,
                "sup_ratio_doubled": rep.sup_ratio_doubled,
                "relative_change": rep.relative_change,
                "excluded_near_edge": rep.excluded,
            },
            "weak_porosity": {
                "rows": [{"m": r.m, "longest": r.longest, "scale": r.scale, "ratio": r.ratio} for r in rep.weak_rows],
                "strictly_increasing": rep.weak_strictly_increasing,
                "slope": rep.weak_slope,
                "predicted_slope": rep.predicted_slope,
            },
            "few_points": {"intervals": len(rep.small_rows), "within_band": rep.small_within_band},
        },
        out,
    )
    return 0


# ---------------------------------------------------------------- selftest


def _tally(name: str, cases: int, failures: list) -> dict:
    return {"name": name, "cases": cases, "failures": len(failures), "first_failure": failures[0] if failures else None}


def run_selftest(seed: int) -> list[dict]:
    rng = random.Random(seed)
    checks = []

    fails, cases = [], 0
    for i in range(60):
        n = rng.choice((1, 2))
        f = random_step_function(rng, n, rng.randint(0, 3 if n == 2 else 5))
        s = Fraction(rng.randint(0, 6), 8)
        t = Fraction(rng.randint(s.numerator * 8 // s.denominator + 1, 7), 8)
        p = MedianParams(s, t)
        corner = tuple(Fraction(rng.randint(0, 7), 16) for _ in range(n))
        for Q in (DyadicCube.top(f.root), Cube(corner, Fraction(rng.randint(1, 8), 16))):
            cases += 1
            bad = median_invariant_failures(f, Q, p)
            if bad:
                fails.append(f"case {i}: {', '.join(bad)}")
    checks.append(_tally("median order properties", cases, fails))

    fails = []
    for i in range(12):
        n = rng.choice((1, 2))
        f = random_step_function(rng, n, rng.randint(1, 3))
        p = MedianParams(Fraction(3, 10), Fraction(9, 20)) if i % 2 else MedianParams(Fraction(1, 4), Fraction(1, 2))
        fam, rep = sparse.build_dyadic_decomposition(f, None, p)
        if not rep.holds:
            fails.append(f"case {i}: dyadic bound")
        if any(not r.holds for r in fam.packing):
            fails.append(f"case {i}: packing")
        if fam.eta_witness < (p.t - p.s) / (p.t - p.s + 1):
            fails.append(f"case {i}: witness sparseness")
        try:
            _, grep = sparse.build_general_decomposition(f, None, p)
            if not grep.holds:
                fails.append(f"case {i}: general bound")
        except InvariantViolation as exc:
            fails.append(f"case {i}: {exc.invariant}")
    checks.append(_tally("sparse decompositions", 12, fails))

    fails = []
    for i in range(15):
        n = rng.choice((1, 2))
        J = rng.randint(1, 3)
        Q0 = Cube(tuple(Fraction(0) for _ in range(n)), Fraction(1))
        pts = [tuple(Fraction(rng.randint(0, 15), 16) for _ in range(n)) for _ in range(rng.randint(1, 4))]
        E = porosity.PointSet.finite(pts)
        inv = porosity.free_cube_inventory(E, Q0, J)
        for s in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1)):
            if porosity.vs_volume(inv, s) != porosity.brute_force_vs(E, Q0, J, s):
                fails.append(f"case {i}: s={s}")
    checks.append(_tally("volume scale oracle", 15, fails))

    rep = examples.counterexample_checks(4)
    checks.append(_tally("dyadic counterexample", 1, [] if rep.ok else ["dichotomy"]))

    z = porosity.PointSet.single(0)
    val = weights.muckenhoupt_constant(z, weights.WeightParams(Fraction(1, 2), 2), [Cube.of((-1,), 2)]).value
    checks.append(_tally("closed form A_2 constant", 1, [] if val == Fraction(4, 3) else [str(val)]))

    plan = sparse.chain_plan(1, MedianParams(Fraction(1, 4), Fraction(1, 2)))
    chain = sparse.build_chain(Cube.of((0,), 1), Cube.of((0,), 2), MedianParams(Fraction(1, 4), Fraction(1, 2)))
    sides = [c.side for c in chain]
    checks.append(_tally("chain geometry", 1, [] if plan.steps >= 1 and sides[-1] == 2 else [str(sides)]))
    return checks


def cmd_selftest(args, out) -> int:
    checks = run_selftest(args.seed)
    ok = all(c["failures"] == 0 for c in checks)
    emit({"command": "selftest", "seed": args.seed, "ok": ok, "checks": checks}, out)
    if not ok:
        bad = next(c for c in checks if c["failures"])
        raise InvariantViolation(bad["name"], bad["first_failure"] or "")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="medianosc", description="Exact median oscillation and distance-set tools.")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for per-cube work")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, st=True):
        p.add_argument("--jobs", type=int, default=argparse.SUPPRESS)
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        p.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS)
        if st:
            p.add_argument("--s", default="1/4")
            p.add_argument("--t", default="3/4")

    def set_args(p):
        p.add_argument("--set", help="lattice | single[:x,..] | subspace:d | gamma:g[:bound]")
        p.add_argument("--points", help="file with one point per line")
        p.add_argument("--dim", type=int, default=1)
        p.add_argument("--family", help="dyadic:<corner,..,side>:<depth> or centered:<point>:<k0..k1>")
        p.add_argument("--family-file")

    p = sub.add_parser("median", help="medians and median differences on a cube")
    common(p)
    p.add_argument("--function", required=True)
    p.add_argument("--cube")
    p.add_argument("--omega", help="also report the local mean oscillation at this level")

    p = sub.add_parser("sparse", help="sparse decompositions with certified pointwise bounds")
    common(p)
    p.add_argument("--function", required=True)
    p.add_argument("--cube")
    p.add_argument("--general", action="store_true")

    p = sub.add_parser("porosity", help="volume scales and porosity flags")
    common(p)
    set_args(p)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--delta-inv", default="64")
    p.add_argument("--no-sandwich", action="store_true")

    p = sub.add_parser("weights", help="A_p products of dist^-alpha over a family")
    common(p, st=False)
    set_args(p)
    p.add_argument("--alpha", required=True)
    p.add_argument("--p", default="2")
    p.add_argument("--mesh", type=int, default=6)

    p = sub.add_parser("mu", help="bracket the Muckenhoupt exponent")
    common(p, st=False)
    set_args(p)
    p.add_argument("--p", default="inf")
    p.add_argument("--s", default="1/2")
    p.add_argument("--min-scale", type=int, default=-10)
    p.add_argument("--max-scale", type=int, default=10)

    p = sub.add_parser("counterexample", help="dyadic Haar counterexample checks")
    common(p, st=False)
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--s", default="3/10")
    p.add_argument("--t", default="9/20")
    p.add_argument("--s-wide", default="1/8")
    p.add_argument("--t-wide", default="7/8")

    p = sub.add_parser("gamma", help="E_gamma scans and porosity demonstration")
    common(p, st=False)
    p.add_argument("--gamma", default="1/2")
    p.add_argument("--demo", choices=("porosity", "scan"), default="porosity")
    p.add_argument("--bound", type=int, default=10**4)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--s", default="1/2")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--plot-data", action="store_true")

    p = sub.add_parser("selftest", help="run the invariant suite")
    common(p, st=False)
    return ap


COMMANDS = {
    "median": cmd_median,
    "sparse": cmd_sparse,
    "porosity": cmd_porosity,
    "weights": cmd_weights,
    "mu": cmd_mu,
    "counterexample": cmd_counterexample,
    "gamma": cmd_gamma,
    "selftest": cmd_selftest,
}


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.jobs < 1:
            raise ValidationError("--jobs must be at least 1")
        return COMMANDS[args.command](args, out)
    except InvariantViolation as exc:
        err.write(f"invariant: {exc}".replace("\n", " ") + "\n")
        return 2
    except (MedianOscError, ValueError, OSError) as exc:
        kind = "validation" if isinstance(exc, (ValidationError, ValueError, OSError)) else type(exc).__name__
        err.write(f"error: {kind}: {exc}".replace("\n", " ") + "\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort reporting for the exit-code contract
        err.write(f"internal: {type(exc).__name__}: {exc}".replace("\n", " ") + "\n")
        return 2


def main() -> None:
    sys.exit(run())
