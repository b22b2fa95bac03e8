import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dispflow import (
    Box,
    ClassicalField,
    InverseDiverged,
    PrevectorField,
    Scale,
    SweepPlan,
    check_equivalence,
    check_realization,
    compose,
    d1_sweep,
    d2_sweep,
    estimate_constants,
    finite_difference,
    identity_field,
    invert,
    prevector_sweep,
    realize_classical,
)
from dispflow.catalog import classical_field, displacement_field, field_family
from dispflow.fields import sampled_pairs
from dispflow.order import FAILS, PREC, PREC_PREC

S64 = Scale(64)
PLAN = SweepPlan(base_scale=Scale(64), num_points=5)
BOX = Box([-2, -2], [2, 2])
BIG = Box([-4, -4], [4, 4])


def dyadic(*cs):
    return np.array(cs, dtype=float)


class TestRealize:
    def test_zero_field_realizes_as_identity(self):
        X = ClassicalField(lambda a: np.zeros_like(a), BOX)
        F = realize_classical(X, S64)
        for p in [(0.3, 0.4), (-1.1, 0.9)]:
            p = np.array(p)
            assert np.array_equal(F(p), p)

    def test_constant_field_exact_step(self):
        X = ClassicalField(lambda a: np.array([1.0, 0.0]), Box([0, 0], [1, 1]))
        F = realize_classical(X, S64)
        a = dyadic(0.25, 0.5)
        assert np.array_equal(F(a), a + np.array([1 / 64, 0.0]))

    def test_smooth_field_passes_second_difference_sweep(self):
        fam = field_family("classical", "rotation", BOX)
        v = d2_sweep(fam, Box([-1, -1], [1, 1]), PLAN, num_samples=10)
        assert v.passes_prec

    def test_oscillator_with_unit_amplitude_fails_first_difference_sweep(self):
        fam = lambda s: displacement_field("osc_e2", BOX, s)
        v = d1_sweep(fam, Box([-1, -1], [1, 1]), PLAN, num_samples=10)
        assert v.relation == FAILS

    def test_oscillator_with_squared_amplitude_passes_first_difference_sweep(self):
        fam = lambda s: displacement_field("osc_e3", BOX, s)
        v = d1_sweep(fam, Box([-1, -1], [1, 1]), PLAN, num_samples=10)
        assert v.passes_prec

    def test_second_implies_first_at_the_verdict_level(self):
        inner = Box([-1, -1], [1, 1])
        for name in ("rotation", "scaling", "pendulum"):
            fam = field_family("classical", name, BOX)
            if d2_sweep(fam, inner, PLAN, num_samples=8).passes_prec:
                assert d1_sweep(fam, inner, PLAN, num_samples=8).passes_prec

    def test_realized_family_is_a_prevector_family(self):
        fam = field_family("classical", "pendulum", BOX)
        v = prevector_sweep(fam, Box([-1, -1], [1, 1]), PLAN, num_samples=16)
        assert v.passes_prec


class TestIdentity:
    def test_identity_values(self):
        I = identity_field(BOX, S64)
        rng = np.random.default_rng(0)
        for p in rng.uniform(-1, 1, (3, 2)):
            assert np.array_equal(I(p), p)

    def test_second_difference_of_identity_vanishes_exactly(self):
        I = identity_field(BOX, S64)
        lam = S64.lam_float
        a = dyadic(0.25, 0.5)
        d = finite_difference(I, a, [dyadic(lam, 0), dyadic(0, lam)])
        assert np.array_equal(d, np.zeros(2))


class TestCompose:
    def test_identity_is_neutral(self):
        F = realize_classical(classical_field("rotation", BOX), S64)
        I = identity_field(BOX, S64)
        a = np.array([0.3, -0.4])
        assert np.array_equal(compose(F, I)(a), F(a))
        assert np.array_equal(compose(I, F)(a), F(a))

    def test_translations_compose_to_diagonal_translation(self):
        lam = S64.lam_float
        F = realize_classical(
            ClassicalField(lambda a: np.array([1.0, 0.0]), BOX), S64
        )
        G = realize_classical(
            ClassicalField(lambda a: np.array([0.0, 1.0]), BOX), S64
        )
        a = dyadic(0.25, -0.5)
        assert np.array_equal(compose(F, G)(a), a + np.array([lam, lam]))

    def test_composition_realizes_displacement_addition_below_scale(self):
        # the defect of (FoG)(a) - a against the summed displacements is a
        # first difference of F - I over the step G takes, hence one more
        # power of the scale
        X = classical_field("rotation", BIG)
        Y = classical_field("pendulum", BIG)
        samples = []
        rng = np.random.default_rng(1)
        pts = Box([-1, -1], [1, 1]).sample(rng, 24)
        for k in range(5):
            s = Scale(64 * 2 ** k)
            F, G = realize_classical(X, s), realize_classical(Y, s)
            FG = compose(F, G)
            worst = max(
                float(np.linalg.norm(FG(a) - a - (F(a) - a) - (G(a) - a)))
                for a in pts
            )
            samples.append((s, worst))
        from dispflow import sweep_verdict

        assert sweep_verdict(samples, 1.0, PLAN).relation == PREC_PREC


class TestInvert:
    def test_identity_inverts_to_itself(self):
        I = identity_field(BOX, S64)
        a = np.array([0.7, -0.3])
        assert np.array_equal(invert(I)(a), a)

    def test_translation_inverts_exactly(self):
        lam = S64.lam_float
        F = realize_classical(ClassicalField(lambda a: np.array([1.0, 0.0]), BOX), S64)
        a = dyadic(0.5, 0.25)
        assert np.array_equal(invert(F)(a), a - np.array([lam, 0.0]))

    def test_vertical_shear_has_closed_form_inverse(self):
        G = displacement_field("osc_e2", BOX, S64)
        lam = S64.lam_float
        a = np.array([0.3, 0.7])
        expected = np.array([0.3, 0.7 - lam * math.sin(math.pi * 0.3 / (2 * lam))])
        assert np.allclose(invert(G)(a), expected, atol=lam * 1e-10)

    def test_two_sided_within_tolerance(self):
        X = classical_field("pendulum", BIG)
        F = realize_classical(X, S64, domain=BOX)
        tol = S64.lam_float * 1e-10
        est = estimate_constants(F, Box([-1, -1], [1, 1]), num_samples=16, seed=0)
        Finv = invert(F)
        rng = np.random.default_rng(2)
        for a in Box([-1, -1], [1, 1]).sample(rng, 8):
            assert np.linalg.norm(F(Finv(a)) - a) <= tol
            back = 2 * tol / (1 - est.k_hat * S64.lam_float)
            assert np.linalg.norm(Finv(F(a)) - a) <= back

    def test_expanding_map_diverges(self):
        F = PrevectorField(
            func=lambda a: 2.5 * a, domain=BOX, range_box=Box([-1e6, -1e6], [1e6, 1e6]),
            scale=S64,
        )
        with pytest.raises(InverseDiverged):
            invert(F)(np.array([0.5, 0.5]))


class TestFiniteDifference:
    def test_first_difference_sign_convention(self):
        F = realize_classical(classical_field("rotation", BOX), S64)
        a, v = np.array([0.2, 0.1]), np.array([0.01, 0.0])
        assert np.array_equal(finite_difference(F, a, [v]), F(a) - F(a + v))

    def test_affine_map_has_vanishing_second_difference(self):
        M = np.array([[1.0, 0.25], [-0.5, 1.0]])
        F = PrevectorField(
            func=lambda a: M @ a + np.array([0.125, -0.25]),
            domain=BOX, range_box=BIG, scale=S64,
        )
        lam = S64.lam_float
        a = dyadic(0.25, -0.5)
        d = finite_difference(F, a, [dyadic(lam, 0.0), dyadic(0.0, 2 * lam)])
        assert np.array_equal(d, np.zeros(2))

    def test_quadratic_field_matches_brute_force_expansion(self):
        X = ClassicalField(lambda a: np.array([a[0] ** 2, 0.0]), BOX)
        F = realize_classical(X, S64)
        lam = S64.lam_float
        a, h = np.array([0.25, 0.0]), 0.03125
        v = np.array([h, 0.0])
        got = finite_difference(F, a, [v, v])
        # independent corner-by-corner evaluation of the alternating sum
        brute = (
            F(a) - F(a + v) - F(a + v) + F(a + 2 * v)
        )
        assert np.allclose(got, brute, atol=1e-16)
        assert np.linalg.norm(got) == pytest.approx(2 * lam * h * h, rel=1e-10)

    def test_zero_direction_short_circuits(self):
        F = realize_classical(classical_field("rotation", BOX), S64)
        d = finite_difference(F, np.array([0.3, 0.3]), [np.zeros(2), np.array([0.01, 0.0])])
        assert np.array_equal(d, np.zeros(2))

    @given(
        a=st.tuples(st.floats(-1, 1), st.floats(-1, 1)),
        v=st.tuples(st.floats(-0.01, 0.01), st.floats(-0.01, 0.01)),
        w=st.tuples(st.floats(-0.01, 0.01), st.floats(-0.01, 0.01)),
    )
    @settings(max_examples=60, deadline=None)
    def test_second_difference_symmetric_in_directions(self, a, v, w):
        F = realize_classical(classical_field("pendulum", BIG), S64, domain=BOX)
        a, v, w = np.array(a), np.array(v), np.array(w)
        d1 = finite_difference(F, a, [v, w])
        d2 = finite_difference(F, a, [w, v])
        assert np.array_equal(d1, d2)

    def test_first_difference_additivity_identity(self):
        F = realize_classical(classical_field("rotation", BOX), S64)
        lam = S64.lam_float
        a, v = dyadic(0.25, 0.5), dyadic(lam, 0.0)
        lhs = finite_difference(lambda p: F(p) - p, a, [v])
        rhs = (F(a) - a) - (F(a + v) - (a + v))
        assert np.allclose(lhs, rhs, atol=1e-16)


class TestEstimateConstants:
    def test_identity_has_zero_constants(self):
        est = estimate_constants(identity_field(BOX, S64), BOX, num_samples=16, seed=0)
        assert est.c_hat == 0.0 and est.k_hat == 0.0

    def test_rotation_constant_is_one(self):
        # the first-difference quotient of a rotation generator is exactly 1
        # for every pair, so the sampled maximum is 1 to rounding
        F = realize_classical(classical_field("rotation", BIG), S64, domain=BOX)
        est = estimate_constants(F, Box([-1, -1], [1, 1]), num_samples=32, seed=0)
        assert est.k_hat == pytest.approx(1.0, abs=1e-9)
        assert est.c_hat <= math.sqrt(2.0) + 1e-9

    def test_reproducible_bit_for_bit(self):
        F = realize_classical(classical_field("pendulum", BIG), S64, domain=BOX)
        e1 = estimate_constants(F, BOX, num_samples=24, seed=9, want_d2=True)
        e2 = estimate_constants(F, BOX, num_samples=24, seed=9, want_d2=True)
        assert (e1.c_hat, e1.k_hat, e1.k2_hat) == (e2.c_hat, e2.k_hat, e2.k2_hat)

    def test_unit_oscillator_quotient_blows_up_like_inverse_scale(self):
        # at a=(0,0), b=(lambda,0) the first-difference quotient is exactly
        # 1/lambda: the displacement changes by a full lambda over a lambda step
        for k in (0, 2, 4):
            s = Scale(64 * 2 ** k)
            G = displacement_field("osc_e2", BOX, s)
            lam = s.lam_float
            a, b = np.zeros(2), np.array([lam, 0.0])
            q = np.linalg.norm((G(a) - a) - (G(b) - b)) / (lam * lam)
            assert q == pytest.approx(1.0 / lam, rel=1e-12)

    def test_sandwich_on_every_sampled_pair(self):
        region = Box([-1, -1], [1, 1])
        for name in ("rotation", "scaling", "pendulum"):
            F = realize_classical(classical_field(name, BIG), S64, domain=BOX)
            est = estimate_constants(F, region, num_samples=24, seed=5)
            klam = est.k_hat * S64.lam_float
            for a, b in sampled_pairs(region, S64, num_samples=24, seed=5):
                d = np.linalg.norm(a - b)
                fd = np.linalg.norm(F(a) - F(b))
                assert (1 - klam) * d <= fd * (1 + 1e-12)
                assert fd <= (1 + klam) * d * (1 + 1e-12)

    def test_injective_on_separated_samples(self):
        lam2 = S64.lam_float ** 2
        for name in ("rotation", "pendulum"):
            F = realize_classical(classical_field(name, BIG), S64, domain=BOX)
            rng = np.random.default_rng(11)
            pts = Box([-1, -1], [1, 1]).sample(rng, 20)
            for i in range(len(pts)):
                for j in range(i + 1, len(pts)):
                    if np.linalg.norm(pts[i] - pts[j]) >= lam2:
                        assert not np.array_equal(F(pts[i]), F(pts[j]))


class TestEquivalence:
    def test_field_equals_itself(self):
        fam = field_family("classical", "rotation", BOX)
        v = check_equivalence(fam, fam, Box([-1, -1], [1, 1]), PLAN, num_samples=8)
        assert v.relation == PREC_PREC
        assert v.fit.all_zero

    def test_euler_vs_midpoint_variant(self):
        # the midpoint-sampled step differs from the plain step by
        # (lambda^2/2) DX X + higher order, so the gap sweeps away at p=1
        X = classical_field("pendulum", BIG)

        def midpoint_family(s):
            lam = s.lam_float

            def func(a):
                return a + lam * X(a + 0.5 * lam * X(a))

            return PrevectorField(func=func, domain=BOX, range_box=BIG, scale=s)

        fam = lambda s: realize_classical(X, s, domain=BOX)
        v = check_equivalence(fam, midpoint_family, Box([-1, -1], [1, 1]), PLAN, num_samples=16)
        assert v.relation == PREC_PREC
        assert v.fit.slope == pytest.approx(2.0, abs=0.2)

    def test_euler_step_equivalent_to_exact_rotation_step(self):
        fam_e = lambda s: displacement_field("euler_rotation_step", BOX, s)
        fam_h = lambda s: displacement_field("rotation_step", BOX, s)
        v = check_equivalence(fam_e, fam_h, Box([-1, -1], [1, 1]), PLAN, num_samples=16)
        assert v.relation == PREC_PREC


class TestRealization:
    def test_coordinate_probes_see_the_field_exactly(self):
        X = classical_field("rotation", BIG)
        fam = lambda s: realize_classical(X, s, domain=BOX)
        pts = [np.array([0.3, 0.4]), np.array([-0.5, 0.2])]
        probes = [lambda p: p[0], lambda p: p[1]]
        v = check_realization(fam, X, probes, pts, PLAN)
        assert v.relation == PREC_PREC

    def test_quadratic_probe_residual_is_exactly_one_step(self):
        # constant field (1,0), probe x^2 at a=(1,0): the normalized
        # increment is 2 + lambda, the classical action is 2
        X = ClassicalField(lambda a: np.array([1.0, 0.0]), BIG)
        fam = lambda s: realize_classical(X, s, domain=BOX)
        a = np.array([1.0, 0.0])
        probe = lambda p: p[0] ** 2
        v = check_realization(fam, X, [probe], [a], PLAN, grad_step=1e-6)
        assert v.relation == PREC_PREC
        for lam, mag in v.fit.points:
            assert mag == pytest.approx(lam, rel=1e-4)
