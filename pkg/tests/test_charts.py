import math

import numpy as np
import pytest

from dispflow import (
    Box,
    ClassicalField,
    DomainExit,
    Prevector,
    Scale,
    SweepPlan,
    Transition,
    act_on_function,
    check_equivalence,
    conjugate_prevector_field,
    differential,
    estimate_constants,
    identity_transition,
    pushforward_field,
    realize_classical,
    sweep_verdict,
)
from dispflow.order import PREC_PREC

S256 = Scale(256)
PLAN = SweepPlan(base_scale=Scale(64), num_points=5)
BIG = Box([-4, -4], [4, 4])


def rotation_on(box):
    return ClassicalField(
        func=lambda a: np.array([-a[1], a[0]]), domain=box, smoothness="ck", name="rotation"
    )


class TestActOnFunction:
    def test_coordinate_function_reads_displacement(self):
        lam = S256.lam_float
        v = Prevector([0.0, 0.0], [lam, 0.0])
        assert act_on_function(v, lambda p: p[0], S256) == 1.0

    def test_zero_for_degenerate_pair(self):
        v = Prevector([0.3, 0.4], [0.3, 0.4])
        assert act_on_function(v, lambda p: p[0] * p[1], S256) == 0.0

    def test_product_function_exact_value(self):
        # base (1,0), tip (1+lambda, lambda): increment of xy is (1+lambda)*lambda,
        # so the normalized action is exactly 1 + 1/256 in dyadic arithmetic
        lam = S256.lam_float
        v = Prevector([1.0, 0.0], [1.0 + lam, lam])
        got = act_on_function(v, lambda p: p[0] * p[1], S256)
        assert got == 1.0 + 1.0 / 256.0

    def test_linear_in_the_function_dyadic_exact(self):
        lam = S256.lam_float
        v = Prevector([0.0, 0.0], [lam, 2 * lam])
        f = lambda p: p[0]
        g = lambda p: p[1]
        alpha, beta = 0.75, -2.5
        combo = lambda p: alpha * f(p) + beta * g(p)
        assert act_on_function(v, combo, S256) == (
            alpha * act_on_function(v, f, S256) + beta * act_on_function(v, g, S256)
        )

    def test_domain_guard(self):
        v = Prevector([3.0, 0.0], [3.0, 0.1])
        with pytest.raises(DomainExit):
            act_on_function(v, lambda p: p[0], S256, domain=Box([-1, -1], [1, 1]))

    def test_leibniz_up_to_scale(self):
        # residual of the product rule is the product of the two increments
        # over lambda, which shrinks linearly; judged at p=0 it vanishes
        f = lambda p: math.sin(p[0]) + 1.5
        g = lambda p: p[1] ** 2 - p[0]
        a = np.array([0.4, -0.3])
        samples = []
        for k in range(5):
            s = Scale(64 * 2 ** k)
            lam = s.lam_float
            v = Prevector(a, a + np.array([lam, -0.5 * lam]))
            fg = lambda p: f(p) * g(p)
            resid = abs(
                act_on_function(v, fg, s)
                - f(a) * act_on_function(v, g, s)
                - act_on_function(v, f, s) * g(a)
            )
            samples.append((s, resid))
        assert sweep_verdict(samples, 0.0, PLAN).relation == PREC_PREC


class TestDifferential:
    def test_identity_map(self):
        v = Prevector([0.1, 0.2], [0.15, 0.2])
        w = differential(lambda p: p, v)
        assert np.array_equal(w.base, v.base) and np.array_equal(w.tip, v.tip)

    def test_plus_minus_map(self):
        lam = S256.lam_float
        v = Prevector([0.0, 0.0], [lam, 0.0])
        h = lambda p: np.array([p[0] + p[1], p[0] - p[1]])
        w = differential(h, v)
        assert np.array_equal(w.base, [0.0, 0.0])
        assert np.array_equal(w.tip, [lam, lam])

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_chain_rule_is_an_exact_identity(self, seed):
        rng = np.random.default_rng(seed)
        base = rng.uniform(-1, 1, 2)
        tip = base + rng.uniform(-1, 1, 2) * S256.lam_float
        v = Prevector(base, tip)
        h = lambda p: np.array([math.sin(p[0]), p[1] + p[0] ** 2])
        g = lambda p: np.array([p[0] * p[1], math.exp(p[1])])
        lhs = differential(lambda p: g(h(p)), v)
        rhs = differential(g, differential(h, v))
        assert np.array_equal(lhs.base, rhs.base)
        assert np.array_equal(lhs.tip, rhs.tip)


class TestPushforward:
    def test_identity_transition_is_a_no_op(self):
        X = rotation_on(Box([-1, -1], [1, 1]))
        Y = pushforward_field(identity_transition(Box([-1, -1], [1, 1])), X)
        for p in [(0.3, 0.4), (-0.2, 0.1)]:
            assert np.allclose(Y(p), X(np.array(p)), atol=1e-12)

    def test_axis_stretch_scales_first_component(self):
        T = Transition(
            forward=lambda p: np.array([2 * p[0], p[1]]),
            inverse=lambda p: np.array([p[0] / 2, p[1]]),
            domain=Box([-1, -1], [1, 1]),
        )
        X = ClassicalField(lambda a: np.array([1.0, 0.0]), Box([-1, -1], [1, 1]))
        Y = pushforward_field(T, X, box=Box([-1.5, -0.8], [1.5, 0.8]))
        assert np.allclose(Y([0.5, 0.2]), [2.0, 0.0], atol=1e-9)

    def test_shear_of_rotation_matches_hand_computation(self):
        # phi(x,y) = (x+y, y) has Jacobian [[1,1],[0,1]]; applied to (-y, x)
        # the image field at phi(a) is (x - y, x)
        T = Transition(
            forward=lambda p: np.array([p[0] + p[1], p[1]]),
            inverse=lambda p: np.array([p[0] - p[1], p[1]]),
            domain=Box([-1, -1], [1, 1]),
        )
        X = rotation_on(BIG)
        Y = pushforward_field(T, X, box=Box([-0.8, -0.5], [0.8, 0.5]), scale=S256)
        for (x, y) in [(0.2, 0.3), (-0.4, 0.1), (0.0, -0.3)]:
            img = T.forward(np.array([x, y]))
            assert np.allclose(Y(img), [x - y, x], atol=1e-9)

    def test_finite_difference_jacobian_agrees_with_closed_form(self):
        fwd = lambda p: np.array([p[0] + p[1] ** 2, p[1]])
        T_fd = Transition(
            forward=fwd, inverse=lambda p: np.array([p[0] - p[1] ** 2, p[1]]),
            domain=Box([-1, -1], [1, 1]),
        )
        a = np.array([0.3, -0.4])
        J = T_fd.jacobian_at(a, S256)
        assert np.allclose(J, [[1.0, -0.8], [0.0, 1.0]], atol=1e-9)


class TestConjugation:
    def test_identity_transition_returns_same_values(self):
        F = realize_classical(rotation_on(BIG), S256, domain=Box([-1, -1], [1, 1]))
        G = conjugate_prevector_field(
            identity_transition(Box([-1, -1], [1, 1])), F, Box([-0.9, -0.9], [0.9, 0.9])
        )
        a = np.array([0.2, 0.5])
        assert np.allclose(G(a), F(a), atol=1e-15)

    def test_linear_stretch_of_translation_is_exact(self):
        lam = S256.lam_float
        from dispflow import PrevectorField

        F = PrevectorField(
            func=lambda a: a + np.array([lam, 0.0]),
            domain=BIG, range_box=BIG.expand(1.0), scale=S256,
        )
        T = Transition(
            forward=lambda p: np.array([2 * p[0], p[1]]),
            inverse=lambda p: np.array([p[0] / 2, p[1]]),
            domain=Box([-1, -1], [1, 1]),
        )
        G = conjugate_prevector_field(T, F, Box([-1, -1], [1, 1]))
        b = np.array([0.5, 0.25])
        assert np.array_equal(G(b), b + np.array([2 * lam, 0.0]))

    def _shear(self):
        return Transition(
            forward=lambda p: np.array([p[0] + p[1] ** 2, p[1]]),
            inverse=lambda p: np.array([p[0] - p[1] ** 2, p[1]]),
            domain=Box([-1.2, -1.2], [1.2, 1.2]),
        )

    def test_conjugation_matches_pushforward_realization_below_scale(self):
        # the conjugated map and the one-step realization of the pushforward
        # field differ only by the Jacobian's variation over one step
        T = self._shear()
        X = rotation_on(BIG)
        W = Box([-0.7, -0.7], [0.7, 0.7])
        Y = pushforward_field(T, X, box=Box([-1.6, -1.0], [1.6, 1.0]), scale=S256)

        fam_conj = lambda s: conjugate_prevector_field(
            T, realize_classical(X, s, domain=Box([-2.5, -1.5], [2.5, 1.5])), W
        )
        fam_push = lambda s: realize_classical(Y, s, domain=W)
        v = check_equivalence(fam_conj, fam_push, W, PLAN, num_samples=24)
        assert v.relation == PREC_PREC
        assert v.fit.slope == pytest.approx(2.0, abs=0.2)

    def test_first_difference_constant_survives_conjugation(self):
        T = self._shear()
        X = rotation_on(BIG)
        W = Box([-0.7, -0.7], [0.7, 0.7])
        ks = []
        for k in range(4):
            s = Scale(64 * 2 ** k)
            G = conjugate_prevector_field(
                T, realize_classical(X, s, domain=Box([-2.5, -1.5], [2.5, 1.5])), W
            )
            est = estimate_constants(G, W, num_samples=24, seed=3)
            ks.append(est.k_hat)
        assert max(ks) < 10.0
        assert max(ks) / min(ks) < 1.5
