"""Brackets of displacement maps by iterated commutators.

The bracket of two invertible displacement maps is their group commutator
G^-1 o F^-1 o G o F iterated 1/lambda times: the commutator's own
displacement is O(lambda^2), and the iteration rescales it back to a
displacement map.  A cheaper surrogate adds the commutator displacement
scaled by 1/lambda in one shot; the two agree below scale for
second-difference-regular pairs.

The classical coordinate bracket (DY)X - (DX)Y computed by central
differences is the independent oracle here, itself cross-checkable against
the flow-composition limit (1/t^2)(psi_t(a) - a).  Commutation of flows is
tested directly on a time grid and compared against triviality of the
bracket; the two verdicts must agree.

Straightening: k independent, pairwise-commuting classical fields become
the first k coordinate directions of the chart built by composing their
flows from a complementary coordinate plane.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .charts import Box, Transition, as_point
from .errors import DomainExit, InverseDiverged, NotCommuting, NotIndependent
from .fields import (
    ClassicalField,
    FieldFamily,
    PrevectorField,
    invert,
    realize_classical,
)
from .flow import _iterate, _time_grid
from .order import OrderVerdict, Scale, SweepPlan, as_rational, sweep_verdict


def _commutator_tol(scale: Scale) -> float:
    # lambda^3 per inverse: the 1/lambda iterations then accumulate at most
    # ~lambda^2, which both sits below the p=1 detection threshold and keeps
    # shrinking with the scale, so sweep slopes stay clean.  A flat tolerance
    # would dominate the fine scales and masquerade as a failed sweep.
    lam = scale.lam_float
    return max(lam ** 3, 1e-14)


def commutator(F: PrevectorField, G: PrevectorField, inv_tol: float | None = None) -> PrevectorField:
    """The one-shot commutator H = G^-1 o F^-1 o G o F."""
    if F.scale != G.scale:
        raise ValueError("bracket operands must share a scale")
    tol = _commutator_tol(F.scale) if inv_tol is None else inv_tol
    F_inv = invert(F, tol=tol)
    G_inv = invert(G, tol=tol)

    def H(a):
        return G_inv(F_inv(G(F(a))))

    return PrevectorField(
        func=H,
        domain=F.domain,
        range_box=F.range_box,
        scale=F.scale,
        name=f"comm({F.name or 'F'},{G.name or 'G'})",
    )


def lie_bracket(F: PrevectorField, G: PrevectorField, inv_tol: float | None = None) -> PrevectorField:
    """The commutator iterated exactly 1/lambda times."""
    H = commutator(F, G, inv_tol=inv_tol)
    n = F.scale.n_inverse

    def iterated(a):
        y = np.array(a, copy=True)
        for i in range(n):
            try:
                y = H.func(y)
            except DomainExit as e:
                raise DomainExit(
                    f"bracket orbit left the box at commutator iterate {i}",
                    point=y,
                    iteration=i,
                ) from e
        return y

    return PrevectorField(
        func=iterated,
        domain=F.domain,
        range_box=F.range_box,
        scale=F.scale,
        name=f"[{F.name or 'F'},{G.name or 'G'}]",
    )


def bracket_via_scaling(F: PrevectorField, G: PrevectorField, inv_tol: float | None = None) -> PrevectorField:
    """Shortcut bracket: a + (1/lambda)(H(a) - a) for the one-shot commutator H."""
    H = commutator(F, G, inv_tol=inv_tol)
    n = F.scale.n_inverse

    def scaled(a):
        return a + n * (H.func(a) - a)

    return PrevectorField(
        func=scaled,
        domain=F.domain,
        range_box=F.range_box,
        scale=F.scale,
        name=f"scaled[{F.name or 'F'},{G.name or 'G'}]",
    )


def _jacobian_cd(Z: ClassicalField, a: np.ndarray, h: float) -> np.ndarray:
    n = a.size
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        cols.append((Z(a + e) - Z(a - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def classical_bracket(X: ClassicalField, Y: ClassicalField, a, h: float) -> np.ndarray:
    """Coordinate formula (DY)X - (DX)Y with central-difference Jacobians."""
    a = as_point(a)
    for Z in (X, Y):
        if not Z.domain.contains(a, slack=h):
            raise DomainExit(f"point {a} too close to the edge for step {h}", point=a)
    return _jacobian_cd(Y, a, h) @ X(a) - _jacobian_cd(X, a, h) @ Y(a)


def _rk4_flow(Z: ClassicalField, a: np.ndarray, t: float, substeps: int) -> np.ndarray:
    y = np.array(a, dtype=float)
    dt = t / substeps
    for _ in range(substeps):
        k1 = Z(y)
        k2 = Z(y + 0.5 * dt * k1)
        k3 = Z(y + 0.5 * dt * k2)
        k4 = Z(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def flow_limit_bracket(
    X: ClassicalField, Y: ClassicalField, a, t: float = 1e-3, substeps: int = 32
) -> np.ndarray:
    """Independent characterization of the classical bracket through flows:
    (1/t^2) (flow_{-Y} o flow_{-X} o flow_Y o flow_X (a) - a), with the
    classical flows integrated by Runge-Kutta.  Agrees with the coordinate
    formula to O(t); used to cross-check the oracle."""
    a = as_point(a)
    y = _rk4_flow(X, a, t, substeps)
    y = _rk4_flow(Y, y, t, substeps)
    minus_x = ClassicalField(lambda p: -X(p), X.domain, X.smoothness)
    minus_y = ClassicalField(lambda p: -Y(p), Y.domain, Y.smoothness)
    y = _rk4_flow(minus_x, y, t, substeps)
    y = _rk4_flow(minus_y, y, t, substeps)
    return (y - a) / (t * t)


@dataclass
class BracketReport:
    """Per-point bracket artifacts at the base scale, plus sweep verdicts."""

    points: list
    iterated: list
    scaled: list
    classical: Optional[list]
    verdicts: dict


def check_bracket_realizes_classical(
    family_f: FieldFamily,
    family_g: FieldFamily,
    X: ClassicalField,
    Y: ClassicalField,
    points,
    plan: SweepPlan,
) -> BracketReport:
    """Does the iterated bracket shrink onto the classical bracket?

    Sweeps max over points of || (1/lambda)([F,G](a) - a) - [X,Y]_cl(a) ||
    at p=0; the classical value comes from the finite-difference oracle,
    evaluated once per point.
    """
    pts = [as_point(p) for p in points]
    h = plan.base_scale.lam_float
    classical = [classical_bracket(X, Y, a, h) for a in pts]
    samples = []
    base_iterated = base_scaled = None
    for s in plan.scales():
        F, G = family_f(s), family_g(s)
        B = lie_bracket(F, G)
        A = bracket_via_scaling(F, G)
        n = s.n_inverse
        worst = 0.0
        iterated, scaled = [], []
        for a, cl in zip(pts, classical):
            ba = B(a)
            iterated.append(ba - a)
            scaled.append(A(a) - a)
            worst = max(worst, float(np.linalg.norm(n * (ba - a) - cl)))
        if base_iterated is None:
            base_iterated, base_scaled = iterated, scaled
        samples.append((s, worst))
    verdict = sweep_verdict(samples, 0.0, plan)
    return BracketReport(
        points=pts,
        iterated=base_iterated,
        scaled=base_scaled,
        classical=classical,
        verdicts={"realizes_classical": verdict},
    )


@dataclass
class CommutationReport:
    """The two faces of commutation: flow interchange and bracket triviality."""

    flow_verdict: OrderVerdict
    bracket_verdict: OrderVerdict

    @property
    def commute_by_flows(self) -> bool:
        return self.flow_verdict.is_infinitesimal

    @property
    def commute_by_bracket(self) -> bool:
        return self.bracket_verdict.is_infinitesimal

    @property
    def agree(self) -> bool:
        return self.commute_by_flows == self.commute_by_bracket


def check_commutation(
    family_f: FieldFamily,
    family_g: FieldFamily,
    region: Box,
    T,
    plan: SweepPlan,
    grid: int = 8,
    num_points: int = 4,
    seed: int = 0,
) -> CommutationReport:
    """Sweep both: max ||F_t(G_s(a)) - G_s(F_t(a))|| over a (t,s) grid at p=0,
    and max ||[F,G](a) - a|| at p=1.  prec_prec on both means the flows
    commute and the bracket is trivial; the verdicts must agree either way."""
    rng = np.random.default_rng(seed)
    pts = region.shrink(np.minimum(0.1 * region.width, 0.2)).sample(rng, num_points)
    times = _time_grid(T, grid)
    flow_samples, bracket_samples = [], []
    for s in plan.scales():
        F, G = family_f(s), family_g(s)
        counts = [s.iterations(t) for t in times]
        worst_flow = 0.0
        for a in pts:
            _, g_states, _ = _iterate(G, as_point(a), counts[-1], record_at=counts)
            _, f_states, _ = _iterate(F, as_point(a), counts[-1], record_at=counts)
            # both application orders, assembled from recorded intermediates
            fg_grid = [
                _iterate(F, gs, counts[-1], record_at=counts)[1] for gs in g_states
            ]
            gf_grid = [
                _iterate(G, fs, counts[-1], record_at=counts)[1] for fs in f_states
            ]
            for i_s in range(len(counts)):
                for i_t in range(len(counts)):
                    d = float(np.linalg.norm(fg_grid[i_s][i_t] - gf_grid[i_t][i_s]))
                    worst_flow = max(worst_flow, d)
        flow_samples.append((s, worst_flow))
        B = lie_bracket(F, G)
        worst_bracket = max(float(np.linalg.norm(B(a) - a)) for a in pts)
        bracket_samples.append((s, worst_bracket))
    return CommutationReport(
        flow_verdict=sweep_verdict(flow_samples, 0.0, plan),
        bracket_verdict=sweep_verdict(bracket_samples, 1.0, plan),
    )


# ---------------------------------------------------------------------------
# Straightening commuting fields


def _flow_interp(F: PrevectorField, a, t) -> np.ndarray:
    """Iterated flow with the final fractional step linearly interpolated.

    The chart map must be continuous in its time parameters for Newton
    inversion and finite differencing; between grid times the orbit advances
    by the matching fraction of one displacement.  Full steps keep the exact
    iteration semantics.
    """
    t = as_rational(t)
    lam = F.scale.lam
    ratio = abs(t) / lam
    n = int(ratio)
    r = float(ratio - n)
    if t >= 0:
        G = F
    else:
        G = invert(F, tol=F.scale.lam_float * 1e-13)
    y, _, _ = _iterate(G, as_point(a), n)
    if r:
        y = y + r * (G(y) - y)
    return y


def _complement_axes(values: np.ndarray, k: int, n: int):
    """Coordinate axes completing the field values to the best-conditioned basis."""
    best, best_det = None, -1.0
    for axes in itertools.combinations(range(n), n - k):
        M = np.concatenate(
            [values] + [np.eye(n)[:, [j]] for j in axes], axis=1
        )
        d = abs(float(np.linalg.det(M)))
        if d > best_det:
            best, best_det = axes, d
    return best


def straighten(
    fields,
    p,
    plan: SweepPlan,
    param_halfwidth: float = 0.25,
    commute_tol: float = 1e-6,
    seed: int = 0,
) -> Transition:
    """Chart in which k commuting fields become the first k coordinate
    directions.

    Forward map: psi(t_1..t_k, s) = flow_1(t_1) o ... o flow_k(t_k) applied
    to the affine complement plane through p; flows run at the finest sweep
    scale.  The inverse is a Newton solve.  Raises NotIndependent when the
    field values at p are degenerate and NotCommuting when a pairwise
    classical bracket residual exceeds ``commute_tol`` on the region.
    """
    fields = list(fields)
    p = as_point(p)
    n = p.size
    k = len(fields)
    if not 1 <= k <= n:
        raise ValueError("need between 1 and n fields")
    values = np.stack([Z(p) for Z in fields], axis=1)
    gram = values.T @ values
    if abs(float(np.linalg.det(gram))) < 1e-8:
        raise NotIndependent(f"Gram determinant {np.linalg.det(gram):.3e} below 1e-8 at {p}")

    scale = plan.scales()[-1]
    h = scale.lam_float
    rng = np.random.default_rng(seed)
    probe_box = Box(p - param_halfwidth, p + param_halfwidth)
    probes = np.concatenate([probe_box.sample(rng, 8), [p]], axis=0)
    for i, j in itertools.combinations(range(k), 2):
        for q in probes:
            resid = classical_bracket(fields[i], fields[j], q, h)
            if float(np.max(np.abs(resid))) > commute_tol:
                raise NotCommuting(
                    f"bracket of fields {i} and {j} has residual "
                    f"{float(np.max(np.abs(resid))):.3e} at {q}"
                )

    axes = _complement_axes(values, k, n)
    basis = np.concatenate([values] + [np.eye(n)[:, [j]] for j in axes], axis=1)
    flows = [realize_classical(Z, scale) for Z in fields]

    def forward(u):
        u = as_point(u)
        y = p.copy()
        for m, j in enumerate(axes):
            e = np.zeros(n)
            e[j] = 1.0
            y = y + u[k + m] * e
        for i in reversed(range(k)):
            y = _flow_interp(flows[i], y, float(u[i]))
        return y

    def inverse(b):
        b = as_point(b)
        u = np.linalg.solve(basis, b - p)
        step = 1e-6
        for _ in range(50):
            r = forward(u) - b
            if float(np.linalg.norm(r)) <= 1e-12 * max(1.0, float(np.linalg.norm(b))):
                return u
            J = np.zeros((n, n))
            for j in range(n):
                e = np.zeros(n)
                e[j] = step
                J[:, j] = (forward(u + e) - forward(u - e)) / (2 * step)
            try:
                u = u - np.linalg.solve(J, r)
            except np.linalg.LinAlgError as exc:
                raise InverseDiverged(f"singular Newton step at {b}") from exc
        raise InverseDiverged(f"chart inversion did not converge at {b}")

    param_box = Box(-param_halfwidth * np.ones(n), param_halfwidth * np.ones(n))
    return Transition(
        forward=forward,
        inverse=inverse,
        domain=param_box,
        jacobian=None,
        name="straightened",
    )


def check_straightening(
    fields,
    p,
    plan: SweepPlan,
    param_halfwidth: float = 0.25,
    num_samples: int = 6,
    seed: int = 0,
) -> OrderVerdict:
    """Residual sweep for the straightened chart: along each field direction
    the chart's one-iteration central derivative must match the field at the
    image point.  Judged at p=0; the residual shrinks like the scale."""
    fields = list(fields)
    p = as_point(p)
    n = p.size
    k = len(fields)
    rng = np.random.default_rng(seed)
    param_box = Box(-param_halfwidth * np.ones(n), param_halfwidth * np.ones(n))
    us = param_box.sample(rng, num_samples)
    samples = []
    for s in plan.scales():
        lam = s.lam_float
        flows = [realize_classical(Z, s) for Z in fields]
        values = np.stack([Z(p) for Z in fields], axis=1)
        axes = _complement_axes(values, k, n)

        def forward(u, flows=flows, axes=axes):
            y = p.copy()
            for m, j in enumerate(axes):
                e = np.zeros(n)
                e[j] = 1.0
                y = y + u[k + m] * e
            for i in reversed(range(k)):
                y = _flow_interp(flows[i], y, float(u[i]))
            return y

        worst = 0.0
        for u in us:
            y0 = forward(u)
            for i in range(k):
                e = np.zeros(n)
                e[i] = lam
                deriv = (forward(u + e) - forward(u - e)) / (2 * lam)
                worst = max(worst, float(np.linalg.norm(deriv - fields[i](y0))))
        samples.append((s, worst))
    return sweep_verdict(samples, 0.0, plan)
