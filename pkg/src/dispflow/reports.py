"""Serialization of verdicts, trajectories, and bound reports.

JSON output is byte-stable for identical inputs: keys are sorted, floats go
through repr, and the only volatile field is a top-level timestamp that
golden comparisons strip (``stable_view``).  Sweep CSVs carry the columns
(lambda, magnitude, tested_exponent, ratio).
"""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from .flow import BoundReport, FlowTrajectory
from .order import OrderFit, OrderVerdict, SweepPlan

SCHEMA_VERSION = 1

TOLERANCE_NOTE = (
    "slope thresholds and the zero floor are engineering choices; "
    "the relations they decide are asymptotic"
)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    return x


def plan_to_dict(plan: SweepPlan) -> dict:
    return {
        "base_n": plan.base_scale.n_inverse,
        "num_points": plan.num_points,
        "ratio": plan.ratio,
        "tolerances": {
            "slope_tolerance": plan.slope_tolerance,
            "strict_margin": plan.strict_margin,
            "zero_floor": plan.zero_floor,
            "note": TOLERANCE_NOTE,
        },
    }


def verdict_to_dict(v: OrderVerdict, plan: SweepPlan | None = None) -> dict:
    out = {
        "relation": v.relation,
        "tested_exponent": v.tested_exponent,
        "slope": _jsonable(v.fit.slope),
        "points": [[lam, mag] for lam, mag in v.fit.points],
        "max_ratio": _jsonable(v.fit.max_ratio),
        "min_ratio": _jsonable(v.fit.min_ratio),
        "zero_floor": v.fit.zero_floor,
    }
    if plan is not None:
        out["plan"] = plan_to_dict(plan)
    else:
        out["tolerance_note"] = TOLERANCE_NOTE
    return out


def verdict_to_csv_rows(v: OrderVerdict):
    p = v.tested_exponent
    rows = []
    for lam, mag in v.fit.points:
        ratio = mag / lam ** p if mag > v.fit.zero_floor else 0.0
        rows.append([repr(lam), repr(mag), repr(float(p)), repr(ratio)])
    return ["lambda", "magnitude", "tested_exponent", "ratio"], rows


def trajectory_to_csv_rows(traj: FlowTrajectory):
    dim = len(traj.states[0]) if traj.states else 0
    header = ["t"] + [f"x{i + 1}" for i in range(dim)] + ["iteration"]
    rows = []
    for t, state, it in zip(traj.times, traj.states, traj.iterations):
        rows.append([str(t)] + [repr(float(c)) for c in state] + [str(it)])
    return header, rows


def trajectory_to_dict(traj: FlowTrajectory) -> dict:
    return {
        "scale_n": traj.scale.n_inverse,
        "times": [str(t) for t in traj.times],
        "states": [_jsonable(s) for s in traj.states],
        "iterations": list(traj.iterations),
        "exit": None if traj.exit is None else {"time": str(traj.exit[0]), "reason": traj.exit[1]},
    }


def bound_report_to_dict(r: BoundReport) -> dict:
    return {
        "k_used": _jsonable(r.k_used),
        "rows": [
            {
                "time": str(t),
                "lhs": _jsonable(l),
                "rhs": _jsonable(rh),
                "satisfied": bool(s),
                "label": lab,
            }
            for t, l, rh, s, lab in zip(r.times, r.lhs, r.rhs, r.satisfied, r.labels)
        ],
        "all_satisfied": r.all_satisfied,
    }


def bracket_report_to_dict(rep) -> dict:
    return {
        "points": [_jsonable(p) for p in rep.points],
        "iterated": [_jsonable(v) for v in rep.iterated],
        "scaled": [_jsonable(v) for v in rep.scaled],
        "classical": None if rep.classical is None else [_jsonable(v) for v in rep.classical],
        "verdicts": {k: verdict_to_dict(v) for k, v in rep.verdicts.items()},
    }


def regularity_to_dict(est) -> dict:
    return {
        "c_hat": _jsonable(est.c_hat),
        "k_hat": _jsonable(est.k_hat),
        "k2_hat": _jsonable(est.k2_hat),
        "region": {"lo": _jsonable(est.region.lo), "hi": _jsonable(est.region.hi)},
        "num_samples": est.num_samples,
        "seed": est.seed,
    }


def render_json(payload: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION, "timestamp": _timestamp(), **payload}
    return json.dumps(_jsonable(body), sort_keys=True, indent=2) + "\n"


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def stable_view(rendered_json: str) -> dict:
    """Parsed JSON with the volatile timestamp removed, for golden comparison."""
    data = json.loads(rendered_json)
    data.pop("timestamp", None)
    return data
