"""Asymptotic size comparison by scale sweeps.

A claim of the shape "this quantity is of order lambda^p, or smaller" cannot
be decided from a single evaluation.  Here it is decided from a geometric
sweep of scales lambda_k = lambda_0 / ratio^k: the measured magnitudes are
fitted in log-log coordinates and the fitted slope is compared against the
tested exponent p with declared tolerances.

Verdict vocabulary (``OrderVerdict.relation``):

* ``prec_prec``  -- decisively smaller than lambda^p (slope >= p + strict_margin)
* ``prec``       -- of order lambda^p, bounded ratios (slope >= p - slope_tolerance)
* ``fails``      -- decisively larger (slope <= p - strict_margin)
* ``inconclusive`` -- in the grey zone between the two margins
* ``approx``     -- alias for prec_prec at p = 0 (difference vanishes outright)

The slope thresholds are engineering choices and are embedded in every
serialized report; see ``reports.verdict_to_dict``.

The same machinery extracts limits ("shadows"): ``shadow`` performs
first-order Richardson extrapolation of sweep values to scale zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from numbers import Rational

import numpy as np

from .errors import AllZero, Diverging, TooFewPoints

PREC = "prec"
PREC_PREC = "prec_prec"
APPROX = "approx"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"

#: Ranking used by the monotonicity property: raising the tested exponent
#: may only move a verdict down this list.
RELATION_RANK = {PREC_PREC: 3, APPROX: 3, PREC: 2, INCONCLUSIVE: 1, FAILS: 0}


def as_rational(t) -> Fraction:
    """Coerce a time/amplitude to an exact rational.

    Ints and Fractions pass through; strings are parsed exactly
    ("0.1" -> 1/10, "355/452" -> 355/452); floats convert via their exact
    binary value.
    """
    if isinstance(t, Fraction):
        return t
    if isinstance(t, int):
        return Fraction(t)
    if isinstance(t, str):
        return Fraction(t)
    if isinstance(t, float):
        return Fraction(*t.as_integer_ratio())
    if isinstance(t, Rational):
        return Fraction(t.numerator, t.denominator)
    raise TypeError(f"cannot interpret {t!r} as a rational")


@dataclass(frozen=True)
class Scale:
    """The working scale lambda = 1/N for an integer N >= 2.

    Keeping 1/lambda an integer makes iteration counts floor(t/lambda)
    exact for rational t, so iterated maps never lose or gain a step to
    rounding.
    """

    n_inverse: int

    def __post_init__(self):
        if not isinstance(self.n_inverse, int) or isinstance(self.n_inverse, bool):
            raise TypeError("n_inverse must be an integer")
        if self.n_inverse < 2:
            raise ValueError("n_inverse must be at least 2")

    @property
    def lam(self) -> Fraction:
        """lambda as an exact rational 1/N."""
        return Fraction(1, self.n_inverse)

    @property
    def lam_float(self) -> float:
        return 1.0 / self.n_inverse

    def iterations(self, t) -> int:
        """floor(t / lambda) = floor(t * N), computed exactly; t >= 0."""
        t = as_rational(t)
        if t < 0:
            raise ValueError("iterations() expects a nonnegative time")
        return int(math.floor(t * self.n_inverse))

    @classmethod
    def pow2(cls, k: int) -> "Scale":
        return cls(2 ** k)

    def __repr__(self):
        return f"Scale(1/{self.n_inverse})"


@dataclass(frozen=True)
class SweepPlan:
    """A geometric scale sweep plus the decision tolerances.

    ``zero_floor`` declares the magnitude below which a measurement is
    treated as an exact zero; it absorbs float cancellation noise in
    comparisons whose true value is 0.
    """

    base_scale: Scale = Scale(64)
    num_points: int = 5
    ratio: int = 2
    slope_tolerance: float = 0.15
    strict_margin: float = 0.5
    zero_floor: float = 1e-11

    def __post_init__(self):
        if self.num_points < 4:
            raise ValueError("a sweep needs at least 4 points")
        if self.ratio < 2:
            raise ValueError("ratio must be at least 2")

    def scales(self) -> list[Scale]:
        n0 = self.base_scale.n_inverse
        return [Scale(n0 * self.ratio ** k) for k in range(self.num_points)]


@dataclass(frozen=True)
class OrderFit:
    """Least-squares log-log fit of (scale, magnitude) sweep data.

    Magnitudes at or below ``zero_floor`` are recorded but excluded from the
    fit.  ``slope`` is +inf for an all-zero sweep (the trivial strongest
    verdict).  ``max_ratio``/``min_ratio`` are filled in by ``judge`` for the
    exponent actually tested.
    """

    points: tuple
    slope: float
    zero_floor: float = 1e-11
    max_ratio: float | None = None
    min_ratio: float | None = None

    @property
    def all_zero(self) -> bool:
        return all(m <= self.zero_floor for _, m in self.points)

    def ratios(self, p: float) -> list[float]:
        """magnitude_k / lambda_k^p over the nonzero points."""
        return [m / lam ** p for lam, m in self.points if m > self.zero_floor]


@dataclass(frozen=True)
class OrderVerdict:
    relation: str
    tested_exponent: float
    fit: OrderFit

    @property
    def is_infinitesimal(self) -> bool:
        """Decisively below the tested order (prec_prec, or approx at p=0)."""
        return self.relation in (PREC_PREC, APPROX)

    @property
    def passes_prec(self) -> bool:
        return self.relation in (PREC_PREC, APPROX, PREC)


def _scale_value(s) -> float:
    if isinstance(s, Scale):
        return s.lam_float
    return float(s)


def fit_order(samples, zero_floor: float = 1e-11) -> OrderFit:
    """Fit the log-log slope of sweep samples ``(scale, magnitude)``.

    Scales may be ``Scale`` objects or plain positive floats (the latter is
    used for amplitude sweeps).  Raises ``AllZero`` when every magnitude is
    at or below the zero floor, ``TooFewPoints`` when fewer than two distinct
    scales carry a usable magnitude.
    """
    pts = []
    for s, m in samples:
        lam = _scale_value(s)
        m = float(m)
        if not math.isfinite(lam) or lam <= 0:
            raise ValueError(f"scale {lam!r} is not a positive finite number")
        if not math.isfinite(m) or m < 0:
            raise ValueError(f"magnitude {m!r} is not finite and nonnegative")
        pts.append((lam, m))
    if len({lam for lam, _ in pts}) < 2:
        raise TooFewPoints("need samples at two or more distinct scales")
    live = [(lam, m) for lam, m in pts if m > zero_floor]
    if not live:
        raise AllZero("every magnitude is zero at the declared floor")
    if len({lam for lam, _ in live}) < 2:
        raise TooFewPoints("fewer than two nonzero magnitudes at distinct scales")
    logs = np.log([lam for lam, _ in live])
    logm = np.log([m for _, m in live])
    slope = float(np.polyfit(logs, logm, 1)[0])
    return OrderFit(points=tuple(pts), slope=slope, zero_floor=zero_floor)


def _trivial_zero_fit(samples, zero_floor: float) -> OrderFit:
    pts = tuple((_scale_value(s), float(m)) for s, m in samples)
    return OrderFit(points=pts, slope=math.inf, zero_floor=zero_floor)


def judge(fit: OrderFit, p: float, plan: SweepPlan) -> OrderVerdict:
    """Classify a fitted sweep against the tested exponent ``p``."""
    if fit.all_zero:
        return OrderVerdict(PREC_PREC, p, fit)
    slope = fit.slope
    ratios = fit.ratios(p)
    finite = all(math.isfinite(r) for r in ratios) and bool(ratios)
    fit = replace(
        fit,
        max_ratio=max(ratios) if ratios else None,
        min_ratio=min(ratios) if ratios else None,
    )
    if slope >= p + plan.strict_margin:
        relation = PREC_PREC
    elif slope >= p - plan.slope_tolerance and finite:
        relation = PREC
    elif slope <= p - plan.strict_margin:
        relation = FAILS
    else:
        relation = INCONCLUSIVE
    return OrderVerdict(relation, p, fit)


def judge_approx(fit: OrderFit, plan: SweepPlan) -> OrderVerdict:
    """Test a difference for vanishing outright: prec_prec at p = 0."""
    v = judge(fit, 0.0, plan)
    if v.relation == PREC_PREC:
        return OrderVerdict(APPROX, 0.0, v.fit)
    return v


def sweep_verdict(samples, p: float, plan: SweepPlan) -> OrderVerdict:
    """fit_order + judge, with the all-zero sweep mapped to trivial prec_prec.

    Zero is strictly below every positive order, so a sweep whose magnitudes
    all vanish passes the strongest relation without a fit.
    """
    try:
        fit = fit_order(samples, zero_floor=plan.zero_floor)
    except AllZero:
        return OrderVerdict(PREC_PREC, p, _trivial_zero_fit(samples, plan.zero_floor))
    return judge(fit, p, plan)


def shadow(samples):
    """Extrapolate sweep values to scale zero (first-order Richardson).

    ``samples`` is a list of ``(scale, value)`` with vector or scalar values;
    at least two entries.  Assuming a first-order error model
    v(lambda) = v0 + c*lambda, the two finest scales determine v0.  When the
    extrapolation is no more stable than the raw data (residual against the
    previous pair exceeds the observed spread) the finest raw value is
    returned instead.  Raises ``Diverging`` when the values spread apart as
    the scale shrinks.
    """
    pts = sorted(((_scale_value(s), np.asarray(v, dtype=float)) for s, v in samples),
                 key=lambda sv: -sv[0])
    if len(pts) < 2:
        raise TooFewPoints("shadow needs samples at two or more scales")
    for _, v in pts:
        if not np.all(np.isfinite(v)):
            raise ValueError("shadow values must be finite")
    diffs = [float(np.max(np.abs(pts[k + 1][1] - pts[k][1]))) for k in range(len(pts) - 1)]
    if len(diffs) >= 2 and diffs[-1] > diffs[0] and diffs[-1] > diffs[-2]:
        raise Diverging("componentwise spread grows as the scale shrinks")

    def extrapolate(coarse, fine):
        (l0, v0), (l1, v1) = coarse, fine
        return v1 + (v1 - v0) * (l1 / (l0 - l1))

    ext = extrapolate(pts[-2], pts[-1])
    if len(pts) >= 3:
        prev = extrapolate(pts[-3], pts[-2])
        residual = float(np.max(np.abs(ext - prev)))
        spread = float(np.max(np.abs(pts[-1][1] - pts[-2][1])))
        if residual > spread and spread > 0:
            ext = pts[-1][1]
    if ext.ndim == 0:
        return float(ext)
    return ext
