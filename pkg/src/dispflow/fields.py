"""Displacement maps at a fixed scale and their finite-difference regularity.

A ``PrevectorField`` is a near-identity map F on a box: ||F(a) - a|| stays
O(lambda).  A classical vector field X turns into one by a single Euler step,
F(a) = a + lambda * X(a).  Regularity is measured combinatorially, through
alternating finite differences: the first difference of F - I against
lambda*||v|| (a Lipschitz-type condition), the second difference of F against
lambda*||v||*||w||.  The constants realizing those conditions on a region are
estimated by seeded sampling and are the raw material for every quantitative
flow bound downstream.

Scale-quantified claims (equivalence of two maps, realization of a classical
field, membership in a regularity class) are decided on *families*: callables
Scale -> PrevectorField that rebuild the map at each sweep scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .charts import Box, as_point
from .errors import DomainExit, InverseDiverged, RangeOverflow
from .order import OrderVerdict, Scale, SweepPlan, sweep_verdict

SMOOTHNESS_TAGS = ("lipschitz", "c1", "c2", "ck")

#: A displacement map rebuilt per sweep scale.
FieldFamily = Callable[[Scale], "PrevectorField"]


@dataclass
class ClassicalField:
    """A classical vector field on a box; the smoothness tag is caller metadata."""

    func: Callable
    domain: Box
    smoothness: str = "ck"
    name: str = ""

    def __post_init__(self):
        if self.smoothness not in SMOOTHNESS_TAGS:
            raise ValueError(f"unknown smoothness tag {self.smoothness!r}")

    def __call__(self, a):
        return as_point(self.func(as_point(a)))


@dataclass
class RegularityEstimate:
    """Sampled constants: displacement bound, first- and second-difference constants.

    All three are maxima over the seeded sample set, so re-running with the
    same seed reproduces them bit-for-bit.
    """

    c_hat: float
    k_hat: float
    k2_hat: Optional[float]
    region: Box
    num_samples: int
    seed: int


@dataclass
class PrevectorField:
    """A displacement map F on ``domain`` with images allowed in ``range_box``.

    The range box is the slightly larger region needed because a map cannot
    leave its own domain invariant near the boundary.  ``__call__`` guards
    evaluation against the range box; iteration loops guard against the
    domain box and record exits.
    """

    func: Callable
    domain: Box
    range_box: Box
    scale: Scale
    name: str = ""
    cached_estimate: Optional[RegularityEstimate] = None

    def __call__(self, a):
        a = as_point(a)
        if not self.range_box.contains(a, slack=1e-12):
            raise DomainExit(f"point {a} outside range box of {self.name or 'field'}", point=a)
        return as_point(self.func(a))

    def displacement(self, a):
        a = as_point(a)
        return self(a) - a

    def estimate(self, region=None, num_samples=64, seed=0, want_d2=False) -> RegularityEstimate:
        """Estimate (and cache) the regularity constants on a region."""
        est = estimate_constants(
            self, region or self.domain, num_samples=num_samples, seed=seed, want_d2=want_d2
        )
        self.cached_estimate = est
        return est


def _coarse_displacement_bound(func, domain: Box, per_axis: int = 5) -> float:
    pts = domain.grid(per_axis) if domain.dim <= 3 else domain.sample(
        np.random.default_rng(0), 64
    )
    worst = 0.0
    for p in pts:
        worst = max(worst, float(np.linalg.norm(as_point(func(p)) - p)))
    return worst


def _default_range_box(func, domain: Box, scale: Scale) -> Box:
    margin = 1.5 * _coarse_displacement_bound(func, domain) + 4 * scale.lam_float + 1e-9
    return domain.expand(margin)


def realize_classical(
    X: ClassicalField,
    s: Scale,
    domain: Box | None = None,
    range_box: Box | None = None,
    exact: bool = False,
) -> PrevectorField:
    """One Euler step of a classical field: F(a) = a + lambda * X(a).

    With ``exact=True`` lambda enters as an exact rational, so feeding points
    with Fraction coordinates keeps the whole computation in exact
    arithmetic.  Raises RangeOverflow at evaluation time if the image
    escapes the declared range box.
    """
    domain = domain or X.domain
    lam = s.lam if exact else s.lam_float

    def step(a):
        return a + lam * X(a)

    if range_box is None:
        float_step = lambda a: a + s.lam_float * X(a)
        range_box = _default_range_box(float_step, domain, s)

    def guarded(a):
        img = step(a)
        if not range_box.contains(img, slack=1e-12):
            raise RangeOverflow(f"image {img} of {a} escapes the range box")
        return img

    return PrevectorField(
        func=guarded,
        domain=domain,
        range_box=range_box,
        scale=s,
        name=f"euler({X.name or 'X'})",
    )


def realized_family(X: ClassicalField, domain: Box | None = None) -> FieldFamily:
    return lambda s: realize_classical(X, s, domain=domain)


def identity_field(domain: Box, s: Scale) -> PrevectorField:
    return PrevectorField(
        func=lambda a: np.array(a, copy=True),
        domain=domain,
        range_box=domain,
        scale=s,
        name="identity",
    )


def compose(F: PrevectorField, G: PrevectorField) -> PrevectorField:
    """(F o G)(a) = F(G(a)); realizes the sum of the displacements."""
    if F.scale != G.scale:
        raise ValueError("composed fields must share a scale")
    return PrevectorField(
        func=lambda a: F(G(a)),
        domain=G.domain,
        range_box=F.range_box,
        scale=F.scale,
        name=f"({F.name or 'F'} o {G.name or 'G'})",
    )


def invert(F: PrevectorField, tol: float | None = None, max_iter: int = 100) -> PrevectorField:
    """Inverse by contraction: iterate y <- a - (F(y) - y) from y0 = a.

    Converges when the first-difference constant satisfies K*lambda < 1;
    on return, ||F(G(a)) - a|| <= tol for every evaluated a.  Default
    tol = lambda * 1e-10.
    """
    lam = F.scale.lam_float
    tol = lam * 1e-10 if tol is None else float(tol)

    def inv(a):
        y = np.array(a, copy=True)
        for _ in range(max_iter):
            try:
                r = F(y) - a
            except DomainExit as exc:
                # escaping the working box before reaching tolerance is the
                # same signal as running out of iterations
                raise InverseDiverged(
                    f"inversion escaped the range box at {a}"
                ) from exc
            if float(np.linalg.norm(r)) <= tol:
                return y
            y = y - r
        raise InverseDiverged(
            f"inversion did not reach tol={tol:g} within {max_iter} steps at {a}"
        )

    return PrevectorField(
        func=inv,
        domain=F.domain,
        range_box=F.range_box,
        scale=F.scale,
        name=f"inv({F.name or 'F'})",
    )


def finite_difference(F, a, vs) -> np.ndarray:
    """The k-th alternating difference over the 2^k corners spanned by vs.

    Sign convention: the corner with no offsets enters with +, so the first
    difference is F(a) - F(a+v).  A zero direction vector short-circuits to
    the exact zero vector.  Corner coordinates and the alternating total are
    accumulated with exact rounding (math.fsum), so the result is invariant
    under permuting the direction vectors.
    """
    a = as_point(a)
    vs = [as_point(v) for v in vs]
    if not vs:
        raise ValueError("need at least one direction vector")
    exact_objects = a.dtype == object or any(v.dtype == object for v in vs)
    if not exact_objects and any(float(np.linalg.norm(v)) == 0.0 for v in vs):
        return np.zeros_like(a)

    k = len(vs)
    terms = [[] for _ in range(a.size)]
    for es in itertools.product((0, 1), repeat=k):
        sign = -1.0 if sum(es) % 2 else 1.0
        if exact_objects:
            pt = a + sum((v for e, v in zip(es, vs) if e), np.zeros_like(a))
        else:
            pt = np.array(
                [
                    math.fsum([a[j]] + [v[j] for e, v in zip(es, vs) if e])
                    for j in range(a.size)
                ]
            )
        val = F(pt)
        for j in range(a.size):
            terms[j].append(sign * val[j])
    if exact_objects:
        return np.array([sum(t) for t in terms], dtype=object)
    return np.array([math.fsum(t) for t in terms])


def _noise_floor(a: np.ndarray) -> float:
    # rounding noise of a short alternating sum of values the size of a;
    # finite differences measured below this are indistinguishable from zero
    return 64 * np.finfo(float).eps * (1.0 + float(np.max(np.abs(a))))


def _unit_ball(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        v = np.zeros(dim)
        v[0] = 1.0
        n = 1.0
    r = rng.uniform() ** (1.0 / dim)
    return (r / n) * v


def pair_directions(rng: np.random.Generator, dim: int, lam: float, n_random: int = 3):
    """Offsets b - a used for first-difference sampling: axes at length lambda
    plus random unit-ball draws scaled to lambda."""
    dirs = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = lam
        dirs.append(e)
        dirs.append(-e)
    for _ in range(n_random):
        dirs.append(lam * _unit_ball(rng, dim))
    return dirs


def estimate_constants(
    F: PrevectorField,
    region: Box,
    num_samples: int = 64,
    seed: int = 0,
    want_d2: bool = False,
) -> RegularityEstimate:
    """Sample the constants bounding displacement and finite differences.

    c_hat bounds ||F(a)-a||/lambda; k_hat bounds the first-difference
    quotient ||D1_{b-a}(F-I)(a)|| / (lambda*||a-b||) over pairs with
    ||a-b|| <= lambda; k2_hat (optional) bounds the second-difference
    quotient with both directions of norm <= lambda.  Estimates of fields
    outside the class are simply large; the sweep verdict is the arbiter.
    """
    if num_samples < 2:
        raise ValueError("need at least 2 samples")
    lam = F.scale.lam_float
    rng = np.random.default_rng(seed)
    margin = (2.5 if want_d2 else 1.5) * lam
    inner = region.shrink(np.minimum(margin, 0.4 * region.width))
    pts = inner.sample(rng, num_samples)

    c_hat = 0.0
    for a in pts:
        c_hat = max(c_hat, float(np.linalg.norm(F(a) - a)) / lam)

    k_hat = 0.0
    for a in pts:
        floor = _noise_floor(a)
        for d in pair_directions(rng, region.dim, lam):
            nd = float(np.linalg.norm(d))
            if nd == 0.0:
                continue
            diff = float(np.linalg.norm(finite_difference(lambda p: F(p) - p, a, [d])))
            if diff <= floor:
                continue
            k_hat = max(k_hat, diff / (lam * nd))

    k2_hat = None
    if want_d2:
        k2_hat = 0.0
        axes = [lam * e for e in np.eye(region.dim)]
        for a in pts:
            floor = _noise_floor(a)
            pairs = [(v, w) for v in axes for w in axes]
            pairs += [
                (lam * _unit_ball(rng, region.dim), lam * _unit_ball(rng, region.dim))
                for _ in range(3)
            ]
            for v, w in pairs:
                nv, nw = float(np.linalg.norm(v)), float(np.linalg.norm(w))
                if nv == 0.0 or nw == 0.0:
                    continue
                diff = float(np.linalg.norm(finite_difference(F, a, [v, w])))
                if diff <= floor:
                    continue
                k2_hat = max(k2_hat, diff / (lam * nv * nw))

    return RegularityEstimate(
        c_hat=c_hat,
        k_hat=k_hat,
        k2_hat=k2_hat,
        region=region,
        num_samples=num_samples,
        seed=seed,
    )


def sampled_pairs(region: Box, scale: Scale, num_samples: int = 64, seed: int = 0):
    """The (a, b) pairs estimate_constants draws; exposed for property checks."""
    lam = scale.lam_float
    rng = np.random.default_rng(seed)
    inner = region.shrink(np.minimum(1.5 * lam, 0.4 * region.width))
    pts = inner.sample(rng, num_samples)
    out = []
    for a in pts:
        for d in pair_directions(rng, region.dim, lam):
            out.append((a, a + d))
    return out


# ---------------------------------------------------------------------------
# Sweep-level verdicts


def _sample_once(region: Box, num_samples: int, seed: int) -> np.ndarray:
    return region.sample(np.random.default_rng(seed), num_samples)


def prevector_sweep(
    family: FieldFamily, region: Box, plan: SweepPlan, num_samples: int = 48, seed: int = 0
) -> OrderVerdict:
    """Is the displacement O(lambda)?  max ||F(a) - a|| judged against p=1."""
    pts = _sample_once(region, num_samples, seed)
    samples = []
    for s in plan.scales():
        F = family(s)
        mag = max(float(np.linalg.norm(F(a) - a)) for a in pts)
        samples.append((s, mag))
    return sweep_verdict(samples, 1.0, plan)


def d1_sweep(
    family: FieldFamily, region: Box, plan: SweepPlan, num_samples: int = 32, seed: int = 0
) -> OrderVerdict:
    """First-difference regularity: the sampled constant must stay bounded
    across scales (judged at p=0); a shrinking-slope failure means the
    quotient blows up like a negative power of lambda."""
    samples = []
    for s in plan.scales():
        est = estimate_constants(family(s), region, num_samples=num_samples, seed=seed)
        samples.append((s, est.k_hat))
    return sweep_verdict(samples, 0.0, plan)


def d2_sweep(
    family: FieldFamily, region: Box, plan: SweepPlan, num_samples: int = 16, seed: int = 0
) -> OrderVerdict:
    """Second-difference regularity; sampled constant judged at p=0."""
    samples = []
    for s in plan.scales():
        est = estimate_constants(
            family(s), region, num_samples=num_samples, seed=seed, want_d2=True
        )
        samples.append((s, est.k2_hat))
    return sweep_verdict(samples, 0.0, plan)


def check_equivalence(
    family_f: FieldFamily,
    family_g: FieldFamily,
    region: Box,
    plan: SweepPlan,
    num_samples: int = 48,
    seed: int = 0,
) -> OrderVerdict:
    """Two families agree below scale: max ||F(a) - G(a)|| judged against p=1;
    prec_prec means equivalent."""
    pts = _sample_once(region, num_samples, seed)
    samples = []
    for s in plan.scales():
        F, G = family_f(s), family_g(s)
        mag = max(float(np.linalg.norm(F(a) - G(a))) for a in pts)
        samples.append((s, mag))
    return sweep_verdict(samples, 1.0, plan)


def directional_derivative(X: ClassicalField, h, a, step: float = 1e-4) -> float:
    """Oracle for the classical action of X on a scalar function: grad h . X,
    with the gradient by central differences at a fixed scale-independent step."""
    a = as_point(a)
    grad = np.zeros(a.size)
    for j in range(a.size):
        e = np.zeros(a.size)
        e[j] = step
        grad[j] = (h(a + e) - h(a - e)) / (2 * step)
    return float(grad @ X(a))


def check_realization(
    family: FieldFamily,
    X: ClassicalField,
    probe_functions,
    points,
    plan: SweepPlan,
    grad_step: float = 1e-4,
) -> OrderVerdict:
    """Does the family realize X?  For each probe h and point a the normalized
    increment (h(F(a)) - h(a))/lambda must converge to the classical
    directional derivative; the worst residual is judged against p=0."""
    from .charts import _scalar_fn

    pts = [as_point(p) for p in points]
    samples = []
    for s in plan.scales():
        F = family(s)
        lam = s.lam_float
        worst = 0.0
        for f in probe_functions:
            fn = _scalar_fn(f, s)
            for a in pts:
                target = directional_derivative(X, fn, a, step=grad_step)
                got = (fn(F(a)) - fn(a)) / lam
                worst = max(worst, abs(got - target))
        samples.append((s, worst))
    return sweep_verdict(samples, 0.0, plan)
