"""Named field definitions, addressable from configs and the CLI.

Each entry is a source string in the expression DSL; classical entries are
realized per scale by one Euler step, displacement entries are evaluated
directly as maps (their sources may mention ``lambda``, which re-resolves at
every sweep scale).  Parameters are substituted into the source text, so the
DSL stays the single definition channel.
"""

from __future__ import annotations

from typing import Callable

from . import dsl
from .charts import Box, as_point
from .errors import ConfigError
from .fields import ClassicalField, FieldFamily, PrevectorField, _default_range_box, realize_classical
from .order import Scale


def _fmt(x) -> str:
    return repr(float(x))


#: name -> (dimension, smoothness tag, source builder)
CLASSICAL = {
    "translation": (2, "ck", lambda ux=1.0, uy=0.0: f"( {_fmt(ux)}, {_fmt(uy)} )"),
    "rotation": (2, "ck", lambda omega=1.0: f"( -({_fmt(omega)})*y, ({_fmt(omega)})*x )"),
    "scaling": (2, "ck", lambda rate=1.0: f"( ({_fmt(rate)})*x, ({_fmt(rate)})*y )"),
    "growth1d": (1, "ck", lambda rate=1.0: f"( ({_fmt(rate)})*x )"),
    "pendulum": (2, "ck", lambda omega=1.0: f"( ({_fmt(omega)})*y, -({_fmt(omega)})*sin(x) )"),
    "pendulum_rescaled": (
        2,
        "ck",
        lambda omega=1.0, amplitude=0.1:
            f"( ({_fmt(omega)})*y, -({_fmt(omega)})*sin(({_fmt(amplitude)})*x)/({_fmt(amplitude)}) )",
    ),
    "pendulum_linear": (2, "ck", lambda omega=1.0: f"( ({_fmt(omega)})*y, -({_fmt(omega)})*x )"),
}

#: displacement maps; the oscillators deliberately put lambda inside the formula
DISPLACEMENT = {
    "shift_x": (2, lambda: "( x + lambda, y )"),
    "osc_e2": (2, lambda: "( x, y + lambda*sin(pi*x/(2*lambda)) )"),
    "osc_e3": (2, lambda: "( x, y + lambda^2*sin(pi*x/(2*lambda)) )"),
    "osc_e4": (2, lambda: "( x, y + lambda^2*sin(pi*x/(2*lambda)) )"),
    "identity2d": (2, lambda: "( x, y )"),
    "rotation_step": (
        2,
        lambda omega=1.0:
            f"( x*cos(lambda*({_fmt(omega)})) + y*sin(lambda*({_fmt(omega)})), "
            f"-x*sin(lambda*({_fmt(omega)})) + y*cos(lambda*({_fmt(omega)})) )",
    ),
    "euler_rotation_step": (
        2,
        lambda omega=1.0:
            f"( x + lambda*({_fmt(omega)})*y, y - lambda*({_fmt(omega)})*x )",
    ),
    "euler_pendulum_rescaled": (
        2,
        lambda omega=1.0, amplitude=0.1:
            f"( x + lambda*({_fmt(omega)})*y, "
            f"y - lambda*({_fmt(omega)})*sin(({_fmt(amplitude)})*x)/({_fmt(amplitude)}) )",
    ),
}


def catalog_names() -> dict:
    return {"classical": sorted(CLASSICAL), "displacement": sorted(DISPLACEMENT)}


def classical_source(name: str, **params) -> str:
    if name not in CLASSICAL:
        raise ConfigError(f"unknown classical field {name!r}")
    return CLASSICAL[name][2](**params)


def displacement_source(name: str, **params) -> str:
    if name not in DISPLACEMENT:
        raise ConfigError(f"unknown displacement map {name!r}")
    return DISPLACEMENT[name][1](**params)


def classical_field(name: str, domain: Box, **params) -> ClassicalField:
    dim, smooth, build = CLASSICAL.get(name, (None, None, None))
    if build is None:
        raise ConfigError(f"unknown classical field {name!r}")
    if domain.dim != dim:
        raise ConfigError(f"{name!r} is {dim}-dimensional, box is {domain.dim}-dimensional")
    fdef = dsl.parse(build(**params), dimension=dim, kind=dsl.CLASSICAL_FIELD)
    probe = Scale(2)  # classical sources must not mention lambda
    return ClassicalField(
        func=lambda a, fdef=fdef: dsl.evaluate(fdef, a, probe),
        domain=domain,
        smoothness=smooth,
        name=name,
    )


def displacement_field(source_or_name: str, domain: Box, s: Scale, **params) -> PrevectorField:
    """A displacement map from catalog name or raw DSL source, at one scale."""
    if source_or_name in DISPLACEMENT:
        src = displacement_source(source_or_name, **params)
        name = source_or_name
    else:
        src = source_or_name
        name = "displacement"
    fdef = dsl.parse(src, dimension=domain.dim, kind=dsl.DISPLACEMENT_MAP)

    def func(a, fdef=fdef, s=s):
        return dsl.evaluate(fdef, a, s)

    return PrevectorField(
        func=func,
        domain=domain,
        range_box=_default_range_box(func, domain, s),
        scale=s,
        name=name,
    )


def transition_from_sources(forward_src: str, inverse_src: str, domain: Box, name: str = ""):
    """A coordinate transition from two DSL sources (forward and inverse).

    Transition sources must not mention ``lambda``; the Jacobian comes from
    central differences unless set afterwards.
    """
    from .charts import Transition

    fwd = dsl.parse(forward_src, dimension=domain.dim, kind=dsl.TRANSITION)
    inv = dsl.parse(inverse_src, dimension=domain.dim, kind=dsl.TRANSITION)
    probe = Scale(2)
    return Transition(
        forward=lambda p: dsl.evaluate(fwd, p, probe),
        inverse=lambda p: dsl.evaluate(inv, p, probe),
        domain=domain,
        name=name or "transition",
    )


def field_family(kind: str, source_or_name: str, domain: Box, **params) -> FieldFamily:
    """A Scale -> PrevectorField family from a catalog name or DSL source.

    ``kind`` is "classical" (realized by one Euler step per scale) or
    "displacement" (the source itself is the map)."""
    if kind == "classical":
        if source_or_name in CLASSICAL:
            X = None  # built per call below so the domain can differ

            def family(s: Scale, name=source_or_name) -> PrevectorField:
                return realize_classical(classical_field(name, domain, **params), s)

            return family
        fdef = dsl.parse(source_or_name, dimension=domain.dim, kind=dsl.CLASSICAL_FIELD)
        probe = Scale(2)
        X = ClassicalField(
            func=lambda a: dsl.evaluate(fdef, a, probe),
            domain=domain,
            smoothness="ck",
            name="classical",
        )
        return lambda s: realize_classical(X, s)
    if kind == "displacement":
        return lambda s: displacement_field(source_or_name, domain, s, **params)
    raise ConfigError(f"unknown field kind {kind!r}; use 'classical' or 'displacement'")
