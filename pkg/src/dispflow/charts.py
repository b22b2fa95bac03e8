"""Coordinate boxes, prevectors, and chart transitions.

Everything is computed in coordinates on explicit compact boxes.  A box is
the computable stand-in for "a neighborhood together with all points
infinitely close to it": membership is decidable, and every asymptotic
statement about nearness is delegated to scale sweeps (see ``order``).

A prevector is an ordered pair of nearby points (base, tip).  It acts on a
scalar function f through the normalized increment (f(tip) - f(base))/lambda,
and a smooth map h carries it to (h(base), h(tip)) -- no linearization
anywhere, which is what makes the chain rule an exact pointwise identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dsl import SCALAR_PROBE, FieldDef, evaluate, evaluate_scalar
from .errors import DomainExit, SingularJacobian
from .order import Scale


def as_point(p) -> np.ndarray:
    """1-D point array; float64 unless the input carries exact objects."""
    a = np.asarray(p)
    if a.dtype != object:
        a = a.astype(float, copy=False)
    return np.atleast_1d(a)


class Box:
    """A compact axis-aligned box, lo < hi componentwise."""

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("lo and hi must be 1-D of equal length")
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise ValueError("box bounds must be finite")
        if not np.all(self.lo < self.hi):
            raise ValueError("need lo < hi componentwise")

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, p, slack: float = 0.0) -> bool:
        p = np.atleast_1d(np.asarray(p))
        if p.size != self.dim:
            return False
        return bool(np.all(p >= self.lo - slack) and np.all(p <= self.hi + slack))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n uniform points, shape (n, dim); deterministic given the rng state."""
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    def shrink(self, margin) -> "Box":
        margin = np.broadcast_to(np.asarray(margin, dtype=float), (self.dim,))
        if np.any(2 * margin >= self.width):
            raise ValueError("margin swallows the box")
        return Box(self.lo + margin, self.hi - margin)

    def expand(self, margin) -> "Box":
        margin = np.broadcast_to(np.asarray(margin, dtype=float), (self.dim,))
        return Box(self.lo - margin, self.hi + margin)

    def grid(self, per_axis: int) -> np.ndarray:
        axes = [np.linspace(l, h, per_axis) for l, h in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def __repr__(self):
        return f"Box({self.lo.tolist()}, {self.hi.tolist()})"

    def __eq__(self, other):
        return (
            isinstance(other, Box)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )


@dataclass(frozen=True)
class Prevector:
    """An ordered pair of nearby points; tip - base is O(lambda) by intent."""

    base: np.ndarray
    tip: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", as_point(self.base))
        object.__setattr__(self, "tip", as_point(self.tip))
        if self.base.shape != self.tip.shape:
            raise ValueError("base and tip must share a dimension")


def _scalar_fn(f, scale: Scale):
    if isinstance(f, FieldDef):
        if f.kind != SCALAR_PROBE:
            raise ValueError("scalar function FieldDef must have kind scalar_probe")
        return lambda p: evaluate_scalar(f, p, scale)
    return lambda p: float(f(p))


def act_on_function(v: Prevector, f, s: Scale, domain: Box | None = None) -> float:
    """The normalized increment (f(tip) - f(base)) / lambda, exactly as written."""
    if domain is not None:
        for p, which in ((v.base, "base"), (v.tip, "tip")):
            if not domain.contains(p):
                raise DomainExit(f"{which} point {p} outside the function's box", point=p)
    fn = _scalar_fn(f, s)
    return (fn(v.tip) - fn(v.base)) / s.lam_float


def _map_fn(h):
    if isinstance(h, Transition):
        return h.forward
    if isinstance(h, FieldDef):
        raise TypeError("pass a callable or Transition; FieldDef maps need a scale")
    return h


def differential(h, v: Prevector, domain: Box | None = None) -> Prevector:
    """Carry a prevector through a map: (base, tip) -> (h(base), h(tip)).

    Verbatim image of both endpoints, no linearization; the chain rule
    differential(g o h, v) == differential(g, differential(h, v)) holds as an
    exact pointwise identity.
    """
    if domain is not None:
        for p, which in ((v.base, "base"), (v.tip, "tip")):
            if not domain.contains(p):
                raise DomainExit(f"{which} point {p} outside the map's box", point=p)
    fn = _map_fn(h)
    return Prevector(as_point(fn(v.base)), as_point(fn(v.tip)))


@dataclass
class Transition:
    """A change of coordinates: forward U -> W with an explicit inverse.

    When no closed-form Jacobian is supplied it is computed by central
    differences with step lambda^2 of the ambient scale.
    """

    forward: Callable
    inverse: Callable
    domain: Box
    jacobian: Callable | None = None
    name: str = ""

    def __post_init__(self):
        self._validate_roundtrip()

    def _validate_roundtrip(self, n: int = 8, tol: float = 1e-10):
        rng = np.random.default_rng(0)
        for u in self.domain.sample(rng, n):
            w = as_point(self.forward(u))
            back = as_point(self.forward(as_point(self.inverse(w))))
            err = float(np.linalg.norm(back - w))
            if err > tol * max(1.0, float(np.linalg.norm(w))):
                raise ValueError(
                    f"transition round-trip error {err:.3e} at {w} exceeds {tol}"
                )

    def jacobian_at(self, a, scale: Scale) -> np.ndarray:
        a = as_point(a)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(a), dtype=float)
        h = scale.lam_float ** 2
        n = a.size
        cols = []
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            cols.append((as_point(self.forward(a + e)) - as_point(self.forward(a - e))) / (2 * h))
        return np.stack(cols, axis=-1)


def identity_transition(domain: Box) -> Transition:
    eye = np.eye(domain.dim)
    return Transition(
        forward=lambda p: np.array(p, dtype=float),
        inverse=lambda p: np.array(p, dtype=float),
        domain=domain,
        jacobian=lambda p: eye,
        name="identity",
    )


def image_box(T: Transition, per_axis: int = 9, shrink_fraction: float = 0.02) -> Box:
    """Conservative box inside the image of T.domain, from a forward grid.

    The hull of forward(grid) is shrunk slightly so that inverse evaluations
    stay inside the true image for mildly nonlinear transitions; pass an
    explicit box when this heuristic is too blunt.
    """
    pts = np.array([as_point(T.forward(p)) for p in T.domain.grid(per_axis)])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    margin = shrink_fraction * (hi - lo)
    return Box(lo + margin, hi - margin)


def pushforward_field(T: Transition, X, box: Box | None = None, scale: Scale | None = None):
    """Carry a classical field across a transition: Y(phi(a)) = J_a X(a).

    ``box`` is Y's domain (defaults to a conservative image box);
    ``scale`` feeds the finite-difference Jacobian step when T has no
    closed form.  Raises SingularJacobian when |det J| < 1e-12 at an
    evaluation point.
    """
    from .fields import ClassicalField

    if box is None:
        box = image_box(T)
    jac_scale = scale if scale is not None else Scale(1024)

    def Y(b):
        a = as_point(T.inverse(b))
        if not X.domain.contains(a, slack=1e-9):
            raise DomainExit(f"pulled-back point {a} outside the field's box", point=a)
        J = T.jacobian_at(a, jac_scale)
        det = float(np.linalg.det(J))
        if abs(det) < 1e-12:
            raise SingularJacobian(f"|det J| = {abs(det):.3e} at {a}")
        return J @ as_point(X(a))

    return ClassicalField(
        func=Y, domain=box, smoothness=X.smoothness, name=f"pushforward({X.name or 'X'})"
    )


def conjugate_prevector_field(T: Transition, F, box: Box):
    """Conjugate a displacement map across a transition: b -> phi(F(phi^{-1}(b)))."""
    from .fields import PrevectorField, _default_range_box

    def G(b):
        a = as_point(T.inverse(b))
        return as_point(T.forward(F(a)))

    range_box = _default_range_box(G, box, F.scale)
    return PrevectorField(
        func=G,
        domain=box,
        range_box=range_box,
        scale=F.scale,
        name=f"conj({F.name or 'F'})",
    )
