"""Command-line front end.

Thin wrappers over the library: every subcommand builds fields from catalog
names or DSL sources, runs one check, and emits a JSON (or CSV) report,
either to --out or to stdout.
"""

from __future__ import annotations

import argparse
from fractions import Fraction
import json
import os
import sys

import numpy as np

from . import catalog, reports
from .bracket import (
    check_bracket_realizes_classical,
    check_commutation,
    check_straightening,
    classical_bracket,
    lie_bracket,
    straighten,
)
from .charts import Box
from .errors import ConfigError, DispflowError
from .fields import check_equivalence, d1_sweep, d2_sweep, estimate_constants
from .flow import flow_trajectory, standard_flow
from .order import Scale, SweepPlan, as_rational
from .scenarios import (
    PendulumParams,
    load_scenario,
    pendulum_report_to_dict,
    run_pendulum,
    run_scenario,
)

_EXIT_CODES = """exit codes:
  0  success; every verdict matched its expectation
  1  a verdict or fixture did not match the declared expectation
  2  configuration or usage error
  3  computation error (domain exit, diverging inverse, ...)
"""


def _parse_point(text: str) -> np.ndarray:
    return np.array([float(c) for c in text.split(",")])


def _parse_region(text: str) -> Box:
    lo, hi = text.split(":")
    return Box(_parse_point(lo), _parse_point(hi))


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        k, _, v = item.partition("=")
        if not _:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        out[k] = float(v)
    return out


def _field_kind(name_or_src: str, kind: str | None) -> str:
    if kind:
        return kind
    if name_or_src in catalog.CLASSICAL:
        return "classical"
    if name_or_src in catalog.DISPLACEMENT:
        return "displacement"
    return "classical"


def _family_from_args(name_or_src, kind, region, params):
    return catalog.field_family(_field_kind(name_or_src, kind), name_or_src, region, **params)


def _plan(args) -> SweepPlan:
    return SweepPlan(base_scale=Scale(args.scale), num_points=args.sweep)


def _emit(args, payload: dict, csv_blocks=None, stem: str = "report") -> None:
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{stem}.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write(reports.render_json(payload))
        print(path)
        if args.format == "csv":
            for name, (header, rows) in (csv_blocks or {}).items():
                path = os.path.join(args.out, f"{stem}__{name}.csv")
                with open(path, "w", encoding="utf-8") as f:
                    f.write(reports.render_csv(header, rows))
                print(path)
    else:
        sys.stdout.write(reports.render_json(payload))


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--scale", type=int, default=64, metavar="N", help="base scale 1/N")
    p.add_argument("--sweep", type=int, default=5, metavar="M", help="sweep points")
    p.add_argument("--seed", type=int, default=0, metavar="K")
    p.add_argument("--out", default=None, metavar="DIR")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--region", default="-1,-1:1,1", metavar="LO:HI")


def _add_field_pair(p: argparse.ArgumentParser):
    p.add_argument("--field-a", required=True, help="catalog name or DSL source")
    p.add_argument("--field-b", required=True)
    p.add_argument("--kind-a", choices=("classical", "displacement"), default=None)
    p.add_argument("--kind-b", choices=("classical", "displacement"), default=None)
    p.add_argument("--param-a", action="append", metavar="K=V")
    p.add_argument("--param-b", action="append", metavar="K=V")


def _cmd_regularity(args) -> int:
    region = _parse_region(args.region)
    fam = _family_from_args(args.field, args.kind, region, _parse_params(args.param))
    plan = _plan(args)
    est = estimate_constants(
        fam(Scale(args.scale)), region, num_samples=args.num_samples,
        seed=args.seed, want_d2=args.d2,
    )
    v1 = d1_sweep(fam, region, plan, seed=args.seed)
    payload = {
        "field": args.field,
        "estimate": reports.regularity_to_dict(est),
        "d1_verdict": reports.verdict_to_dict(v1, plan),
    }
    csvs = {"d1": reports.verdict_to_csv_rows(v1)}
    if args.d2:
        v2 = d2_sweep(fam, region, plan, seed=args.seed)
        payload["d2_verdict"] = reports.verdict_to_dict(v2, plan)
        csvs["d2"] = reports.verdict_to_csv_rows(v2)
    _emit(args, payload, csvs, stem=f"regularity_{_safe(args.field)}")
    return 0


def _cmd_flow(args) -> int:
    region = _parse_region(args.region)
    fam = _family_from_args(args.field, args.kind, region, _parse_params(args.param))
    t = as_rational(args.time)
    steps = args.grid
    times = sorted(t * Fraction(k, steps) for k in range(steps + 1))
    traj = flow_trajectory(fam(Scale(args.scale)), _parse_point(args.start), times)
    payload = {"field": args.field, "trajectory": reports.trajectory_to_dict(traj)}
    if args.shadow:
        plan = _plan(args)
        limit = standard_flow(fam, _parse_point(args.start), t, plan)
        payload["shadow"] = reports._jsonable(limit)
    _emit(args, payload, {"trajectory": reports.trajectory_to_csv_rows(traj)},
          stem=f"flow_{_safe(args.field)}")
    return 0


def _cmd_equiv(args) -> int:
    region = _parse_region(args.region)
    fam_a = _family_from_args(args.field_a, args.kind_a, region, _parse_params(args.param_a))
    fam_b = _family_from_args(args.field_b, args.kind_b, region, _parse_params(args.param_b))
    plan = _plan(args)
    v = check_equivalence(fam_a, fam_b, region, plan, seed=args.seed)
    payload = {"verdict": reports.verdict_to_dict(v, plan), "equivalent": v.is_infinitesimal}
    _emit(args, payload, {"sweep": reports.verdict_to_csv_rows(v)}, stem="equiv")
    return 0


def _cmd_bracket(args) -> int:
    region = _parse_region(args.region)
    params_a, params_b = _parse_params(args.param_a), _parse_params(args.param_b)
    fam_a = _family_from_args(args.field_a, args.kind_a, region, params_a)
    fam_b = _family_from_args(args.field_b, args.kind_b, region, params_b)
    s = Scale(args.scale)
    pts = [_parse_point(p) for p in args.points.split(";")]
    B = lie_bracket(fam_a(s), fam_b(s))
    payload = {
        "scale_n": s.n_inverse,
        "points": [p.tolist() for p in pts],
        "bracket_values": [B(p).tolist() for p in pts],
    }
    csvs = {}
    if args.classical:
        X = catalog.classical_field(args.field_a, region, **params_a)
        Y = catalog.classical_field(args.field_b, region, **params_b)
        plan = _plan(args)
        rep = check_bracket_realizes_classical(fam_a, fam_b, X, Y, pts, plan)
        payload["classical_comparison"] = reports.bracket_report_to_dict(rep)
        csvs["sweep"] = reports.verdict_to_csv_rows(rep.verdicts["realizes_classical"])
    _emit(args, payload, csvs, stem="bracket")
    return 0


def _cmd_commute(args) -> int:
    region = _parse_region(args.region)
    fam_a = _family_from_args(args.field_a, args.kind_a, region, _parse_params(args.param_a))
    fam_b = _family_from_args(args.field_b, args.kind_b, region, _parse_params(args.param_b))
    plan = _plan(args)
    start = _parse_region(args.start_region) if args.start_region else region
    rep = check_commutation(fam_a, fam_b, start, as_rational(args.horizon), plan, seed=args.seed)
    payload = {
        "flow_verdict": reports.verdict_to_dict(rep.flow_verdict, plan),
        "bracket_verdict": reports.verdict_to_dict(rep.bracket_verdict, plan),
        "commute": rep.commute_by_flows,
        "agree": rep.agree,
    }
    _emit(args, payload, {"flow": reports.verdict_to_csv_rows(rep.flow_verdict)}, stem="commute")
    return 0 if rep.agree else 1


def _cmd_straighten(args) -> int:
    region = _parse_region(args.region)
    fields = []
    for spec in args.field:
        if spec in catalog.CLASSICAL:
            fields.append(catalog.classical_field(spec, region))
        else:
            fields.append(_classical_from_source(spec, region))
    plan = _plan(args)
    p = _parse_point(args.point)
    straighten(fields, p, plan, seed=args.seed)
    v = check_straightening(fields, p, plan, seed=args.seed)
    payload = {
        "point": p.tolist(),
        "residual_verdict": reports.verdict_to_dict(v, plan),
        "straightened": v.is_infinitesimal,
    }
    _emit(args, payload, {"residual": reports.verdict_to_csv_rows(v)}, stem="straighten")
    return 0 if v.is_infinitesimal else 1


def _classical_from_source(src: str, region: Box):
    from . import dsl
    from .fields import ClassicalField

    fdef = dsl.parse(src, dimension=region.dim, kind=dsl.CLASSICAL_FIELD)
    probe = Scale(2)
    return ClassicalField(func=lambda a: dsl.evaluate(fdef, a, probe), domain=region, name=src)


def _cmd_pendulum(args) -> int:
    params = PendulumParams(
        omega=args.omega,
        amplitude=as_rational(args.amplitude),
        horizon=as_rational(args.horizon),
        scale=Scale(args.scale),
    )
    amplitudes = None
    if args.amplitudes:
        amplitudes = [as_rational(a) for a in args.amplitudes.split(",")]
    rep = run_pendulum(params, amplitudes=amplitudes, time_steps=args.grid)
    payload = pendulum_report_to_dict(rep)
    csvs = {
        "deviations": (
            ["amplitude", "sup_deviation"],
            [[str(a), repr(d)] for a, d in rep.deviations],
        )
    }
    _emit(args, payload, csvs, stem="pendulum")
    return 0


def _cmd_scenario(args) -> int:
    if args.action != "run":
        raise ConfigError("usage: scenario run <file-or-name>")
    cfg = load_scenario(args.target)
    bundle = run_scenario(cfg, out_dir=args.out, fmt=args.format)
    if not args.out:
        sys.stdout.write(
            reports.render_json(
                {
                    "scenario": bundle.name,
                    "ok": bundle.ok,
                    "mismatches": bundle.mismatches,
                    "results": bundle.results,
                }
            )
        )
    else:
        for f in bundle.files:
            print(f)
    return 0 if bundle.ok else 1


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)[:40]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dispflow",
        description="Displacement-map calculus: flows, brackets, regularity, sweeps.",
        epilog=_EXIT_CODES,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("regularity", help="sampled constants + regularity sweeps")
    _add_common(p)
    p.add_argument("--field", required=True)
    p.add_argument("--kind", choices=("classical", "displacement"), default=None)
    p.add_argument("--param", action="append", metavar="K=V")
    p.add_argument("--num-samples", type=int, default=48)
    p.add_argument("--d2", action="store_true")
    p.set_defaults(func=_cmd_regularity)

    p = sub.add_parser("flow", help="iterate a field, emit the trajectory")
    _add_common(p)
    p.add_argument("--field", required=True)
    p.add_argument("--kind", choices=("classical", "displacement"), default=None)
    p.add_argument("--param", action="append", metavar="K=V")
    p.add_argument("--start", required=True, metavar="X1,X2,...")
    p.add_argument("--time", required=True, help="rational, e.g. 1 or 355/452 or 0.5")
    p.add_argument("--grid", type=int, default=50, help="trajectory sample count")
    p.add_argument("--shadow", action="store_true", help="extrapolate over the sweep")
    p.set_defaults(func=_cmd_flow)

    p = sub.add_parser("equiv", help="equivalence sweep for two fields")
    _add_common(p)
    _add_field_pair(p)
    p.set_defaults(func=_cmd_equiv)

    p = sub.add_parser("bracket", help="iterated bracket at points")
    _add_common(p)
    _add_field_pair(p)
    p.add_argument("--points", required=True, metavar="P;Q;...")
    p.add_argument("--classical", action="store_true",
                   help="also sweep against the classical bracket oracle")
    p.set_defaults(func=_cmd_bracket)

    p = sub.add_parser("commute", help="flow-commutation and bracket-triviality sweeps")
    _add_common(p)
    _add_field_pair(p)
    p.add_argument("--horizon", default="1")
    p.add_argument("--start-region", default=None, metavar="LO:HI")
    p.set_defaults(func=_cmd_commute)

    p = sub.add_parser("straighten", help="chart straightening commuting fields")
    _add_common(p)
    p.add_argument("--field", action="append", required=True,
                   help="repeatable; catalog name or DSL source")
    p.add_argument("--point", required=True)
    p.set_defaults(func=_cmd_straighten)

    p = sub.add_parser("pendulum", help="rescaled pendulum vs harmonic motion")
    _add_common(p)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--amplitude", default="1/1000")
    p.add_argument("--amplitudes", default=None, metavar="A1,A2,...")
    p.add_argument("--horizon", default="5")
    p.add_argument("--grid", type=int, default=100)
    p.set_defaults(func=_cmd_pendulum)

    p = sub.add_parser("scenario", help="run a scenario config with expectations")
    _add_common(p)
    p.add_argument("action", choices=("run",))
    p.add_argument("target", help="bundled scenario name or path to a JSON file")
    p.set_defaults(func=_cmd_scenario)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DispflowError as e:
        print(f"computation error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
