"""Flows by literal map iteration.

The flow of a displacement map F at time t is F applied floor(t/lambda)
times, nothing more: no interpolation, no adaptivity, and the iteration
count is exact because 1/lambda is an integer and t is rational.  Negative
times iterate the contraction inverse.  The classical flow is recovered as
the scale-zero shadow of the iterated flow over a sweep, and a canonical
representative of a map's equivalence class is its own flow run for one
step of duration lambda at a finer internal step.

Quantitative growth/comparison bounds use the sampled regularity constants:
the two-point spread is controlled by exp(+-K' t) with K' = K/(1-K*lambda)^2,
two flows diverge no faster than (beta/K)(exp(Kt) - 1), and the defect of
one-step linearization is bounded by K*C*n^2*lambda^2.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .charts import Box, Prevector, as_point
from .errors import BoundViolation, Diverging, DomainExit
from .fields import FieldFamily, PrevectorField, invert
from .order import OrderVerdict, Scale, SweepPlan, as_rational, shadow, sweep_verdict

_PROGRESS_EVERY = 10 ** 6
_PROGRESS_THRESHOLD = 10 ** 7


@dataclass
class FlowTrajectory:
    """States of the iterated map at requested times.

    ``iterations[j]`` is the exact iteration count floor(t_j / lambda);
    consecutive states differ by exactly the difference of those counts.
    When the orbit leaves the domain box, ``exit`` records (time, reason)
    and no further states are recorded.
    """

    times: tuple
    states: list
    iterations: tuple
    scale: Scale
    exit: Optional[tuple] = None


def _iterate(F: PrevectorField, a, n: int, record_at=None, on_exit="raise"):
    """Apply F exactly n times; optionally record states at given counts.

    ``record_at`` is a sorted iterable of iteration counts.  Exits are
    checked against the domain box before each application.
    """
    y = np.array(a, copy=True)
    lo, hi = F.domain.lo, F.domain.hi
    recorded = []
    targets = list(record_at) if record_at is not None else []
    ti = 0
    while ti < len(targets) and targets[ti] == 0:
        recorded.append(np.array(y, copy=True))
        ti += 1
    func = F.func
    progress = n >= _PROGRESS_THRESHOLD
    for i in range(n):
        inside = bool(np.all(y >= lo) and np.all(y <= hi))
        if not inside:
            if on_exit == "raise":
                raise DomainExit(
                    f"orbit left the domain box at iteration {i}", point=y, iteration=i
                )
            return y, recorded, i
        y = func(y)
        if progress and (i + 1) % _PROGRESS_EVERY == 0:
            print(f"flow: {i + 1}/{n} iterations", file=sys.stderr)
        while ti < len(targets) and targets[ti] == i + 1:
            recorded.append(np.array(y, copy=True))
            ti += 1
    return y, recorded, None


def _negative_inverse(F: PrevectorField, n: int) -> PrevectorField:
    # backward error accumulates linearly in the step count, so the
    # per-step tolerance shrinks with the run length
    tol = F.scale.lam_float * 1e-12 / max(1, n)
    return invert(F, tol=tol)


def flow(F: PrevectorField, a, t):
    """F iterated floor(|t|/lambda) times; negative t runs the inverse map."""
    t = as_rational(t)
    n = F.scale.iterations(abs(t))
    G = F if t >= 0 else _negative_inverse(F, n)
    y, _, _ = _iterate(G, as_point(a), n, on_exit="raise")
    return y


def flow_trajectory(F: PrevectorField, a, times) -> FlowTrajectory:
    """Record the orbit at several times (sorted, all of one sign)."""
    ts = [as_rational(t) for t in times]
    if any(t1 > t2 for t1, t2 in zip(ts, ts[1:])):
        raise ValueError("times must be nondecreasing")
    if ts and ts[0] < 0 < ts[-1]:
        raise ValueError("times must not mix signs; run two trajectories")
    backward = bool(ts) and ts[-1] <= 0 and ts[0] < 0
    counts = [F.scale.iterations(abs(t)) for t in ts]
    if backward:
        ts = list(reversed(ts))
        counts = list(reversed(counts))
    n = counts[-1] if counts else 0
    G = F if not backward else _negative_inverse(F, n)
    y, recorded, exit_at = _iterate(G, as_point(a), n, record_at=counts, on_exit="record")
    exit_info = None
    if exit_at is not None:
        exit_time = Fraction(exit_at, F.scale.n_inverse)
        exit_info = (exit_time if not backward else -exit_time, "left domain box")
        kept = [(t, c) for t, c in zip(ts, counts) if c <= exit_at][: len(recorded)]
        ts = [t for t, _ in kept]
        counts = [c for _, c in kept]
    return FlowTrajectory(
        times=tuple(ts),
        states=recorded,
        iterations=tuple(counts),
        scale=F.scale,
        exit=exit_info,
    )


def flow_prevector(F: PrevectorField, v: Prevector, t) -> Prevector:
    """Carry a prevector with the flow: both endpoints iterate.

    For v = (a, F(a)) the result is (b, F(b)) with b the flowed base, as an
    exact identity of iterates: both sides are the same composition of maps.
    """
    return Prevector(flow(F, v.base, t), flow(F, v.tip, t))


def standard_flow(family: FieldFamily, a, t, plan: SweepPlan):
    """Scale-zero limit of the iterated flow, by Richardson extrapolation."""
    samples = []
    for s in plan.scales():
        samples.append((s, flow(family(s), a, t)))
    return shadow(samples)


def canonical_representative(F: PrevectorField, fine_divisor: int = 256) -> PrevectorField:
    """Flow F's own displacement field for one duration-lambda step taken as
    ``fine_divisor`` substeps.  Picks the same representative from the
    equivalence class of F no matter which member was supplied."""
    if fine_divisor < 1:
        raise ValueError("fine_divisor must be positive")
    div = float(fine_divisor)

    def rep(a):
        y = np.array(a, copy=True)
        for _ in range(fine_divisor):
            y = y + (F(y) - y) / div
        return y

    return PrevectorField(
        func=rep,
        domain=F.domain,
        range_box=F.range_box,
        scale=F.scale,
        name=f"canonical({F.name or 'F'})",
    )


def canonical_family(family: FieldFamily, fine_divisor: int = 256) -> FieldFamily:
    return lambda s: canonical_representative(family(s), fine_divisor)


# ---------------------------------------------------------------------------
# Quantitative bound reports


@dataclass
class BoundReport:
    """Measured quantities against their bounds, row by row.

    Row j is satisfied iff lhs[j] <= rhs[j] * (1 + 1e-12).
    """

    k_used: float
    times: list
    lhs: list
    rhs: list
    satisfied: list
    labels: list = field(default_factory=list)

    @property
    def all_satisfied(self) -> bool:
        return all(self.satisfied)


def _row(report: BoundReport, t, lhs: float, rhs: float, label: str):
    report.times.append(t)
    report.lhs.append(lhs)
    report.rhs.append(rhs)
    report.satisfied.append(lhs <= rhs * (1 + 1e-12))
    report.labels.append(label)


def _time_grid(T, steps: int):
    T = as_rational(T)
    return [T * Fraction(j, steps) for j in range(1, steps + 1)]


def _require_k(F: PrevectorField, k_hat):
    if k_hat is not None:
        return float(k_hat)
    if F.cached_estimate is None:
        raise ValueError(
            "no regularity estimate available; run estimate_constants first or pass k_hat"
        )
    return F.cached_estimate.k_hat


def verify_contraction_bounds(
    F: PrevectorField, a, b, T, steps: int = 8, k_hat: float | None = None
) -> BoundReport:
    """Two-point spread against exp(+-K' t) with K' = K/(1 - K*lambda)^2.

    Each sampled time contributes an upper row (measured spread vs upper
    bound) and a lower row (lower bound vs measured spread).
    """
    k = _require_k(F, k_hat)
    lam = F.scale.lam_float
    kp = k / (1 - k * lam) ** 2
    report = BoundReport(k_used=kp, times=[], lhs=[], rhs=[], satisfied=[], labels=[])
    d0 = float(np.linalg.norm(as_point(a) - as_point(b)))
    times = _time_grid(T, steps)
    counts = [F.scale.iterations(t) for t in times]
    _, traj_a, _ = _iterate(F, as_point(a), counts[-1], record_at=counts)
    _, traj_b, _ = _iterate(F, as_point(b), counts[-1], record_at=counts)
    for t, ya, yb in zip(times, traj_a, traj_b):
        d = float(np.linalg.norm(ya - yb))
        tf = float(t)
        _row(report, t, d, float(np.exp(kp * tf)) * d0, "upper")
        _row(report, t, float(np.exp(-kp * tf)) * d0, d, "lower")
    return report


def sampled_field_distance(F: PrevectorField, G: PrevectorField, region: Box,
                           num_samples: int = 64, seed: int = 0) -> float:
    """max ||F(a) - G(a)|| / lambda over a seeded sample of the region."""
    pts = region.sample(np.random.default_rng(seed), num_samples)
    lam = F.scale.lam_float
    return max(float(np.linalg.norm(F(p) - G(p))) for p in pts) / lam


def compare_flows(
    F: PrevectorField,
    G: PrevectorField,
    a,
    T,
    steps: int = 8,
    beta_hat: float | None = None,
    k_hat: float | None = None,
    region: Box | None = None,
) -> BoundReport:
    """Flow separation against (beta/K)(exp(Kt) - 1) <= beta*t*exp(Kt).

    beta is the lambda-normalized field distance; when absent it is sampled
    on ``region`` (default F's domain).
    """
    k = _require_k(F, k_hat)
    if beta_hat is None:
        beta_hat = sampled_field_distance(F, G, region or F.domain)
    report = BoundReport(k_used=k, times=[], lhs=[], rhs=[], satisfied=[], labels=[])
    times = _time_grid(T, steps)
    counts = [F.scale.iterations(t) for t in times]
    _, traj_f, _ = _iterate(F, as_point(a), counts[-1], record_at=counts)
    _, traj_g, _ = _iterate(G, as_point(a), counts[-1], record_at=counts)
    for t, yf, yg in zip(times, traj_f, traj_g):
        d = float(np.linalg.norm(yf - yg))
        tf = float(t)
        if k > 0:
            bound = (beta_hat / k) * (np.exp(k * tf) - 1.0)
        else:
            bound = beta_hat * tf
        _row(report, t, d, float(bound), "separation")
    return report


def check_linearization(F: PrevectorField, a, n: int) -> float:
    """Defect of replacing n steps by n times one step, against K*C*n^2*lambda^2.

    Returns the measured deviation ||F^n(a) - a - n(F(a) - a)||; raises
    BoundViolation if it exceeds the sampled-constant bound (with a 1e-9
    relative allowance).
    """
    if F.cached_estimate is None:
        raise ValueError("run estimate_constants first; the bound needs K and C")
    est = F.cached_estimate
    lam = F.scale.lam_float
    a = as_point(a)
    y, _, _ = _iterate(F, a, n)
    deviation = float(np.linalg.norm(y - a - n * (F(a) - a)))
    bound = est.k_hat * est.c_hat * n * n * lam * lam * (1 + 1e-9)
    if deviation > bound:
        raise BoundViolation(
            f"linearization defect {deviation:.3e} exceeds K*C*n^2*lambda^2 = {bound:.3e}"
        )
    return deviation


def rescaled_compare(
    F: PrevectorField,
    G: PrevectorField,
    p,
    amplitude,
    t,
    plan: SweepPlan,
    x0=None,
    time_steps: int = 16,
) -> OrderVerdict:
    """Compare two flows near a common fixed point, rescaled by amplitude.

    The sweep shrinks the starting amplitude (not lambda): at each a_k the
    magnitude is max over the time grid of ||F_s(x_k) - G_s(x_k)|| / a_k.
    prec_prec at p=0 means the deviation is below the oscillation scale
    itself.  Domain exit is an error here: the comparison is only claimed
    while both orbits stay in the box.
    """
    p = as_point(p)
    amplitude = as_rational(amplitude)
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    for name, H in (("F", F), ("G", G)):
        fixed = float(np.linalg.norm(H(p) - p))
        if fixed > 1e-12:
            raise ValueError(f"{name} does not fix the base point: residual {fixed:.3e}")
    if x0 is None:
        u = np.zeros(p.size)
        u[0] = 1.0
    else:
        u = (as_point(x0) - p) / float(amplitude)
        if float(np.linalg.norm(u)) > 1 + 1e-9:
            raise ValueError("x0 must lie within the amplitude ball around p")
    times = _time_grid(t, time_steps)
    counts = [F.scale.iterations(s) for s in times]
    samples = []
    for k in range(plan.num_points):
        a_k = amplitude / plan.ratio ** k
        x_k = p + float(a_k) * u
        _, traj_f, _ = _iterate(F, x_k, counts[-1], record_at=counts)
        _, traj_g, _ = _iterate(G, x_k, counts[-1], record_at=counts)
        worst = max(
            float(np.linalg.norm(yf - yg)) for yf, yg in zip(traj_f, traj_g)
        )
        samples.append((float(a_k), worst / float(a_k)))
    return sweep_verdict(samples, 0.0, plan)
