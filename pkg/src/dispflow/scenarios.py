"""Scenario configs: declarative check suites with expected verdicts.

A scenario file names fields (catalog entries or DSL sources), a scale, a
sweep plan, a region, and a list of checks; each check can declare the
verdict it expects, so counterexamples are first-class: a scenario passes
when every check matches its expectation, including expected failures.

The pendulum runner is the one bespoke scenario: it flows the rescaled
oscillator from (1, 0), measures the worst deviation of the x-component
from the cosine over a time grid, and reports how that deviation shrinks
with amplitude and with the scale, together with the two equivalence
verdicts that justify the harmonic comparison.
"""

from __future__ import annotations

import importlib.resources as resources
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import jsonschema
import numpy as np

from . import catalog, reports
from .bracket import (
    check_bracket_realizes_classical,
    check_commutation,
    check_straightening,
    lie_bracket,
    straighten,
)
from .charts import Box, as_point
from .errors import ConfigError, NotCommuting, NotIndependent
from .fields import (
    check_equivalence,
    estimate_constants,
    d1_sweep,
    d2_sweep,
    prevector_sweep,
    realize_classical,
)
from .flow import flow, flow_trajectory, verify_contraction_bounds, compare_flows
from .order import Scale, SweepPlan, as_rational, sweep_verdict

SCENARIO_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["name", "dimension", "scale", "region", "fields", "checks"],
    "properties": {
        "name": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "scale": {
            "type": "object",
            "required": ["n"],
            "properties": {"n": {"type": "integer", "minimum": 2}},
        },
        "sweep": {
            "type": "object",
            "properties": {
                "points": {"type": "integer", "minimum": 4},
                "ratio": {"type": "integer", "minimum": 2},
                "slope_tolerance": {"type": "number"},
                "strict_margin": {"type": "number"},
                "zero_floor": {"type": "number"},
            },
        },
        "region": {
            "type": "object",
            "required": ["lo", "hi"],
            "properties": {
                "lo": {"type": "array", "items": {"type": "number"}},
                "hi": {"type": "array", "items": {"type": "number"}},
            },
        },
        "domain": {
            "type": "object",
            "required": ["lo", "hi"],
            "properties": {
                "lo": {"type": "array", "items": {"type": "number"}},
                "hi": {"type": "array", "items": {"type": "number"}},
            },
        },
        "seed": {"type": "integer"},
        "fields": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {
                    "kind": {"enum": ["classical", "displacement", "bracket"]},
                    "name": {"type": "string"},
                    "source": {"type": "string"},
                    "params": {"type": "object"},
                    "of": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "checks": {"type": "array", "items": {"type": "object", "required": ["type"]}},
    },
}


@dataclass
class ScenarioConfig:
    name: str
    dimension: int
    scale: Scale
    plan: SweepPlan
    region: Box
    domain: Box
    seed: int
    field_specs: dict
    checks: list
    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        try:
            jsonschema.validate(data, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as e:
            raise ConfigError(f"invalid scenario config: {e.message}") from e
        scale = Scale(data["scale"]["n"])
        sweep = data.get("sweep", {})
        plan = SweepPlan(
            base_scale=scale,
            num_points=sweep.get("points", 5),
            ratio=sweep.get("ratio", 2),
            slope_tolerance=sweep.get("slope_tolerance", 0.15),
            strict_margin=sweep.get("strict_margin", 0.5),
            zero_floor=sweep.get("zero_floor", 1e-11),
        )
        region = Box(data["region"]["lo"], data["region"]["hi"])
        if region.dim != data["dimension"]:
            raise ConfigError("region dimension does not match the declared dimension")
        # fields live on the (larger) domain box; checks sample the region,
        # so composite orbits such as bracket iterates have room to travel
        domain = Box(data["domain"]["lo"], data["domain"]["hi"]) if "domain" in data else region
        if domain.dim != region.dim:
            raise ConfigError("domain dimension does not match the region")
        return cls(
            name=data["name"],
            dimension=data["dimension"],
            scale=scale,
            plan=plan,
            region=region,
            domain=domain,
            seed=data.get("seed", 0),
            field_specs=data["fields"],
            checks=data["checks"],
            raw=data,
        )

    @classmethod
    def from_file(cls, path: str) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def bundled_scenario_names() -> list:
    root = resources.files("dispflow") / "data"
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(name_or_path: str) -> ScenarioConfig:
    """A bundled scenario by name, or any path to a config file."""
    if os.path.exists(name_or_path):
        return ScenarioConfig.from_file(name_or_path)
    root = resources.files("dispflow") / "data"
    candidate = root / f"{name_or_path}.json"
    try:
        data = json.loads(candidate.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(
            f"no scenario file {name_or_path!r}; bundled: {', '.join(bundled_scenario_names())}"
        ) from None
    return ScenarioConfig.from_dict(data)


def _family(cfg: ScenarioConfig, key: str):
    try:
        spec = cfg.field_specs[key]
    except KeyError:
        raise ConfigError(f"check references unknown field {key!r}") from None
    kind = spec.get("kind", "classical")
    if kind == "bracket":
        of = spec.get("of", [])
        if len(of) != 2:
            raise ConfigError("bracket field needs exactly two operands in 'of'")
        fam_f, fam_g = _family(cfg, of[0]), _family(cfg, of[1])
        return lambda s: lie_bracket(fam_f(s), fam_g(s))
    source_or_name = spec.get("name") or spec.get("source")
    if not source_or_name:
        raise ConfigError(f"field {key!r} needs a catalog 'name' or DSL 'source'")
    return catalog.field_family(
        kind, source_or_name, cfg.domain, **spec.get("params", {})
    )


def _classical(cfg: ScenarioConfig, key: str):
    spec = cfg.field_specs[key]
    if spec.get("kind", "classical") != "classical":
        raise ConfigError(f"field {key!r} must be classical for this check")
    name_or_source = spec.get("name") or spec.get("source")
    if name_or_source in catalog.CLASSICAL:
        return catalog.classical_field(name_or_source, cfg.domain, **spec.get("params", {}))
    from . import dsl

    fdef = dsl.parse(name_or_source, dimension=cfg.dimension, kind=dsl.CLASSICAL_FIELD)
    probe = Scale(2)
    from .fields import ClassicalField

    return ClassicalField(
        func=lambda a: dsl.evaluate(fdef, a, probe), domain=cfg.domain, name=key
    )


def _value(v, scale: Scale) -> float:
    """Numbers pass through; the strings "lambda"/"-lambda" resolve to the scale."""
    if isinstance(v, str):
        if v == "lambda":
            return scale.lam_float
        if v == "-lambda":
            return -scale.lam_float
        return float(Fraction(v))
    return float(v)


def _point(p, scale: Scale) -> np.ndarray:
    return np.array([_value(c, scale) for c in p])


@dataclass
class ReportBundle:
    name: str
    results: list
    mismatches: list
    files: list

    @property
    def ok(self) -> bool:
        return not self.mismatches


def _check_expectations(result: dict, check: dict, mismatches: list):
    for key, got in list(result.items()):
        if key.startswith("got_"):
            want = check.get("expect_" + key[4:])
            if want is not None and got != want:
                mismatches.append(
                    f"{check['type']}: expected {key[4:]}={want!r}, got {got!r}"
                )
        elif key in ("values_match", "all_satisfied", "agree"):
            # these must hold unless the config opts out explicitly
            want = check.get("expect_" + key, True)
            if bool(got) != bool(want):
                mismatches.append(
                    f"{check['type']}: expected {key}={want!r}, got {got!r}"
                )


def run_scenario(cfg: ScenarioConfig, out_dir: str | None = None, fmt: str = "json") -> ReportBundle:
    """Execute every check; a bundle is ok iff all expectations matched."""
    results, mismatches, files, csv_blocks = [], [], [], []
    for check in cfg.checks:
        ctype = check.get("type")
        runner = _CHECK_RUNNERS.get(ctype)
        if runner is None:
            raise ConfigError(f"unknown check type {ctype!r}")
        result = runner(cfg, check)
        csv_blocks.append(result.pop("_csv", None))
        result["type"] = ctype
        _check_expectations(result, check, mismatches)
        results.append(result)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        payload = {
            "scenario": cfg.name,
            "ok": not mismatches,
            "mismatches": mismatches,
            "results": results,
        }
        path = os.path.join(out_dir, f"{cfg.name}.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write(reports.render_json(payload))
        files.append(path)
        if fmt == "csv":
            for idx, (r, rows) in enumerate(zip(results, csv_blocks)):
                if rows:
                    path = os.path.join(out_dir, f"{cfg.name}__{idx}_{r['type']}.csv")
                    with open(path, "w", encoding="utf-8") as f:
                        f.write(reports.render_csv(*rows))
                    files.append(path)
    return ReportBundle(name=cfg.name, results=results, mismatches=mismatches, files=files)


# --- check runners ---------------------------------------------------------


def _check_bracket_fixture(cfg, check):
    fam_f = _family(cfg, check["f"])
    fam_g = _family(cfg, check["g"])
    B = lie_bracket(fam_f(cfg.scale), fam_g(cfg.scale))
    tol = check.get("tolerance", 1e-12)
    pts = [_point(p, cfg.scale) for p in check["points"]]
    expected = [_point(v, cfg.scale) for v in check.get("expected_values", [])]
    values = [B(p) for p in pts]
    ok = True
    errs = []
    for v, e in zip(values, expected):
        err = float(np.max(np.abs(v - e)))
        errs.append(err)
        ok = ok and err <= tol
    return {
        "points": [p.tolist() for p in pts],
        "values": [v.tolist() for v in values],
        "expected": [e.tolist() for e in expected],
        "errors": errs,
        "tolerance": tol,
        "values_match": ok,
    }


def _check_region(cfg, check) -> Box:
    if "region" in check:
        return Box(check["region"]["lo"], check["region"]["hi"])
    return cfg.region


def _check_prevector_sweep(cfg, check):
    fam = _family(cfg, check["field"])
    v = prevector_sweep(
        fam, _check_region(cfg, check), cfg.plan,
        num_samples=check.get("num_samples", 32), seed=cfg.seed,
    )
    return {
        "verdict": reports.verdict_to_dict(v, cfg.plan),
        "got_relation": v.relation,
        "_csv": reports.verdict_to_csv_rows(v),
    }


def _check_equivalence(cfg, check):
    fam_f = _family(cfg, check["f"])
    fam_g = _family(cfg, check["g"])
    v = check_equivalence(
        fam_f, fam_g, _check_region(cfg, check), cfg.plan,
        num_samples=check.get("num_samples", 48), seed=cfg.seed,
    )
    return {
        "verdict": reports.verdict_to_dict(v, cfg.plan),
        "got_relation": v.relation,
        "_csv": reports.verdict_to_csv_rows(v),
    }


def _check_bracket_d1_witness(cfg, check):
    """First-difference quotient of the bracket between two named points,
    swept across scales; a bracket that is not first-difference regular
    shows a growing quotient (relation fails at p=0)."""
    fam_f = _family(cfg, check["f"])
    fam_g = _family(cfg, check["g"])
    samples = []
    for s in cfg.plan.scales():
        B = lie_bracket(fam_f(s), fam_g(s))
        a = _point(check["pair"][0], s)
        b = _point(check["pair"][1], s)
        lam = s.lam_float
        q = float(
            np.linalg.norm((B(a) - a) - (B(b) - b))
        ) / (lam * float(np.linalg.norm(a - b)))
        samples.append((s, q))
    v = sweep_verdict(samples, 0.0, cfg.plan)
    return {
        "verdict": reports.verdict_to_dict(v, cfg.plan),
        "got_relation": v.relation,
        "_csv": reports.verdict_to_csv_rows(v),
    }


def _check_commutation(cfg, check):
    fam_f = _family(cfg, check["f"])
    fam_g = _family(cfg, check["g"])
    rep = check_commutation(
        fam_f,
        fam_g,
        _check_region(cfg, check),
        as_rational(check.get("horizon", "1")),
        cfg.plan,
        seed=cfg.seed,
    )
    return {
        "flow_verdict": reports.verdict_to_dict(rep.flow_verdict, cfg.plan),
        "bracket_verdict": reports.verdict_to_dict(rep.bracket_verdict, cfg.plan),
        "agree": rep.agree,
        "got_commute": rep.commute_by_flows,
        "_csv": reports.verdict_to_csv_rows(rep.flow_verdict),
    }


def _check_bracket_classical(cfg, check):
    fam_f = _family(cfg, check["f"])
    fam_g = _family(cfg, check["g"])
    X = _classical(cfg, check["f"])
    Y = _classical(cfg, check["g"])
    pts = [_point(p, cfg.scale) for p in check["points"]]
    rep = check_bracket_realizes_classical(fam_f, fam_g, X, Y, pts, cfg.plan)
    v = rep.verdicts["realizes_classical"]
    return {
        "report": reports.bracket_report_to_dict(rep),
        "got_relation": v.relation,
        "_csv": reports.verdict_to_csv_rows(v),
    }


def _check_regularity(cfg, check):
    fam = _family(cfg, check["field"])
    region = _check_region(cfg, check)
    est = estimate_constants(
        fam(cfg.scale), region, num_samples=check.get("num_samples", 48),
        seed=cfg.seed, want_d2=check.get("d2", False),
    )
    out = {"estimate": reports.regularity_to_dict(est)}
    v1 = d1_sweep(fam, region, cfg.plan, seed=cfg.seed)
    out["d1_verdict"] = reports.verdict_to_dict(v1, cfg.plan)
    out["got_d1"] = v1.relation
    if check.get("d2", False):
        v2 = d2_sweep(fam, region, cfg.plan, seed=cfg.seed)
        out["d2_verdict"] = reports.verdict_to_dict(v2, cfg.plan)
        out["got_d2"] = v2.relation
    out["_csv"] = reports.verdict_to_csv_rows(v1)
    return out


def _check_flow_bounds(cfg, check):
    fam = _family(cfg, check["field"])
    a = _point(check["a"], cfg.scale)
    b = _point(check["b"], cfg.scale)
    horizon = as_rational(check.get("horizon", "1"))
    all_ok = True
    per_scale = []
    for s in cfg.plan.scales():
        F = fam(s)
        est = estimate_constants(F, cfg.region, seed=cfg.seed)
        F.cached_estimate = est
        rep = verify_contraction_bounds(F, a, b, horizon, steps=check.get("steps", 8))
        per_scale.append(
            {"n": s.n_inverse, "report": reports.bound_report_to_dict(rep)}
        )
        all_ok = all_ok and rep.all_satisfied
    return {"per_scale": per_scale, "all_satisfied": all_ok}


def _check_conjugation_equivalence(cfg, check):
    """The field conjugated through a transition, against the one-step
    realization of its pushforward; equivalent when the transition is a
    legitimate change of coordinates."""
    from .charts import conjugate_prevector_field, image_box, pushforward_field

    X = _classical(cfg, check["field"])
    T = catalog.transition_from_sources(
        check["transition"]["forward"], check["transition"]["inverse"], cfg.region
    )
    W = _check_region(cfg, check) if "region" in check else image_box(T)
    Y = pushforward_field(T, X, box=image_box(T, shrink_fraction=0.0).expand(0.5), scale=cfg.scale)
    fam_conj = lambda s: conjugate_prevector_field(
        T, realize_classical(X, s, domain=cfg.domain), W
    )
    fam_push = lambda s: realize_classical(Y, s, domain=W)
    v = check_equivalence(
        fam_conj, fam_push, W, cfg.plan, num_samples=check.get("num_samples", 32),
        seed=cfg.seed,
    )
    return {
        "verdict": reports.verdict_to_dict(v, cfg.plan),
        "got_relation": v.relation,
        "_csv": reports.verdict_to_csv_rows(v),
    }


def _check_straighten(cfg, check):
    fields = [_classical(cfg, key) for key in check["fields"]]
    p = _point(check["point"], cfg.scale)
    try:
        straighten(fields, p, cfg.plan, seed=cfg.seed)
    except NotCommuting as e:
        return {"got_outcome": "not_commuting", "detail": str(e)}
    except NotIndependent as e:
        return {"got_outcome": "not_independent", "detail": str(e)}
    v = check_straightening(fields, p, cfg.plan, seed=cfg.seed)
    return {
        "residual_verdict": reports.verdict_to_dict(v, cfg.plan),
        "got_outcome": "ok" if v.is_infinitesimal else "residual_not_vanishing",
        "_csv": reports.verdict_to_csv_rows(v),
    }


_CHECK_RUNNERS = {
    "bracket_fixture": _check_bracket_fixture,
    "prevector_sweep": _check_prevector_sweep,
    "equivalence": _check_equivalence,
    "bracket_d1_witness": _check_bracket_d1_witness,
    "commutation": _check_commutation,
    "bracket_classical": _check_bracket_classical,
    "conjugation_equivalence": _check_conjugation_equivalence,
    "regularity": _check_regularity,
    "flow_bounds": _check_flow_bounds,
    "straighten": _check_straighten,
}


# ---------------------------------------------------------------------------
# Pendulum


@dataclass
class PendulumParams:
    """Rescaled pendulum run: angular frequency, release amplitude, horizon."""

    omega: float = 1.0
    amplitude: Fraction = Fraction(1, 1000)
    horizon: Fraction = Fraction(5)
    scale: Scale = Scale(2 ** 14)

    def __post_init__(self):
        self.amplitude = as_rational(self.amplitude)
        self.horizon = as_rational(self.horizon)
        if self.amplitude <= 0 or self.omega <= 0:
            raise ValueError("amplitude and omega must be positive")


@dataclass
class PendulumReport:
    omega: float
    horizon: Fraction
    scale: Scale
    deviations: list          # (amplitude, sup_t |x(t) - cos(omega t)|)
    decreasing: bool
    linearized_deviation: float
    lambda_points: list       # (lambda, deviation) at the smallest amplitude
    verdict_g_equiv_e: object
    verdict_e_equiv_h: object


_PENDULUM_BOX = Box([-1.7, -1.7], [1.7, 1.7])


def _pendulum_deviation(source_kind: str, omega, amplitude, scale, horizon, time_steps=100, **params):
    """sup over the time grid of |x-component - cos(omega t)| from (1, 0)."""
    if source_kind == "rescaled":
        F = catalog.displacement_field(
            "euler_pendulum_rescaled", _PENDULUM_BOX, scale,
            omega=omega, amplitude=float(amplitude),
        )
    else:
        F = catalog.displacement_field(
            "euler_rotation_step", _PENDULUM_BOX, scale, omega=omega
        )
    times = [horizon * Fraction(j, time_steps) for j in range(time_steps + 1)]
    traj = flow_trajectory(F, np.array([1.0, 0.0]), times)
    if traj.exit is not None:
        raise RuntimeError(f"pendulum orbit left the box at t={traj.exit[0]}")
    return max(
        abs(float(state[0]) - math.cos(omega * float(t)))
        for t, state in zip(traj.times, traj.states)
    )


def run_pendulum(
    params: PendulumParams,
    plan: SweepPlan | None = None,
    amplitudes=None,
    time_steps: int = 100,
) -> PendulumReport:
    """Deviation-from-cosine across shrinking amplitude and shrinking scale,
    plus the two equivalence verdicts backing the harmonic comparison
    (oscillator vs its linearization, Euler step vs exact rotation step)."""
    if amplitudes is None:
        amplitudes = [params.amplitude * Fraction(10) ** k for k in range(2, -1, -1)]
    amplitudes = sorted((as_rational(a) for a in amplitudes), reverse=True)
    devs = [
        (
            a,
            _pendulum_deviation(
                "rescaled", params.omega, a, params.scale, params.horizon, time_steps
            ),
        )
        for a in amplitudes
    ]
    decreasing = all(d1 > d2 for (_, d1), (_, d2) in zip(devs, devs[1:]))
    lin_dev = _pendulum_deviation(
        "linear", params.omega, None, params.scale, params.horizon, time_steps
    )

    coarse = []
    n = params.scale.n_inverse
    for k in reversed(range(5)):
        m = n // (2 ** k)
        if m >= 2 and (not coarse or coarse[-1].n_inverse != m):
            coarse.append(Scale(m))
    lambda_points = [
        (
            s.lam_float,
            _pendulum_deviation(
                "rescaled", params.omega, amplitudes[-1], s, params.horizon, time_steps
            ),
        )
        for s in coarse
    ]

    inner_plan = SweepPlan(base_scale=Scale(256), num_points=5, ratio=2)
    amp_plan = plan or SweepPlan(base_scale=params.scale, num_points=max(4, len(amplitudes)))
    # oscillator vs linearization: amplitude sweep of the lambda-normalized gap
    rng = np.random.default_rng(0)
    pts = _PENDULUM_BOX.shrink(0.2).sample(rng, 48)
    lam = params.scale.lam_float
    E = catalog.displacement_field(
        "euler_rotation_step", _PENDULUM_BOX, params.scale, omega=params.omega
    )
    amp_samples = []
    a0 = amplitudes[-1]
    for k in range(amp_plan.num_points):
        a_k = a0 / amp_plan.ratio ** k
        G = catalog.displacement_field(
            "euler_pendulum_rescaled", _PENDULUM_BOX, params.scale,
            omega=params.omega, amplitude=float(a_k),
        )
        mag = max(float(np.linalg.norm(G(p) - E(p))) for p in pts) / lam
        amp_samples.append((float(a_k), mag))
    verdict_g_e = sweep_verdict(amp_samples, 0.0, amp_plan)

    fam_e = lambda s: catalog.displacement_field(
        "euler_rotation_step", _PENDULUM_BOX, s, omega=params.omega
    )
    fam_h = lambda s: catalog.displacement_field(
        "rotation_step", _PENDULUM_BOX, s, omega=params.omega
    )
    verdict_e_h = check_equivalence(fam_e, fam_h, _PENDULUM_BOX.shrink(0.2), inner_plan)

    return PendulumReport(
        omega=params.omega,
        horizon=params.horizon,
        scale=params.scale,
        deviations=devs,
        decreasing=decreasing,
        linearized_deviation=lin_dev,
        lambda_points=lambda_points,
        verdict_g_equiv_e=verdict_g_e,
        verdict_e_equiv_h=verdict_e_h,
    )


def pendulum_report_to_dict(rep: PendulumReport) -> dict:
    return {
        "omega": rep.omega,
        "horizon": str(rep.horizon),
        "scale_n": rep.scale.n_inverse,
        "deviations": [[str(a), d] for a, d in rep.deviations],
        "decreasing": rep.decreasing,
        "linearized_deviation": rep.linearized_deviation,
        "lambda_points": [[lam, d] for lam, d in rep.lambda_points],
        "oscillator_vs_linearization": reports.verdict_to_dict(rep.verdict_g_equiv_e),
        "euler_vs_rotation_step": reports.verdict_to_dict(rep.verdict_e_equiv_h),
    }
