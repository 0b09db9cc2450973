"""Loss arithmetic and Wirtinger-gradient correctness.

The finite-difference agreement tests are the load-bearing checks of the
whole package: they pin the reverse accumulation against an independent
oracle at fixed unroll depths across system sizes.
"""

import numpy as np
import pytest

from gridfp.errors import DegenerateVoltage, ValidationError
from gridfp.gradient import (
    ZERO_LOSS_FLOOR,
    _propagate,
    backward,
    finite_diff_gradient,
    loss,
    rmse,
)
from gridfp.loadflow import Injection
from gridfp.network import BALANCED_SLACK
from gridfp.surrogate import SurrogateParams, predict


def random_case(rng, n_buses, x_scale=0.1, load_scale=0.05):
    """Well-conditioned random params, injection, and target voltage."""
    n3 = 3 * n_buses
    w_hat = np.tile(BALANCED_SLACK, n_buses) * (
        1.0 + 0.05 * (rng.standard_normal(n3) + 1j * rng.standard_normal(n3))
    )
    x_hat = (
        x_scale
        / np.sqrt(n3)
        * (rng.standard_normal((n3, n3)) + 1j * rng.standard_normal((n3, n3)))
    )
    params = SurrogateParams(x_hat=x_hat, w_hat=w_hat)
    s = Injection(
        s_wye=load_scale * (rng.standard_normal(n3) + 1j * rng.standard_normal(n3)),
        s_delta=load_scale * (rng.standard_normal(n3) + 1j * rng.standard_normal(n3)),
    )
    v_true = w_hat + 0.1 * (rng.standard_normal(n3) + 1j * rng.standard_normal(n3))
    return params, s, v_true


def assert_gradients_match(computed, reference, rel=1e-5, floor=1e-9):
    err = np.abs(computed - reference)
    allowed = np.maximum(floor, rel * np.abs(reference))
    worst = (err / allowed).max()
    assert worst < 1.0, f"gradient mismatch: worst err/allowed = {worst:.3e}"


class TestLoss:
    def test_identical_vectors_give_zero(self):
        v = np.tile(BALANCED_SLACK, 2)
        assert loss(v, v.copy()).value == 0.0

    def test_single_entry_modulus(self):
        v_true = np.array([3.0 + 4.0j, 0, 0])
        v_pred = np.zeros(3, dtype=complex)
        assert abs(loss(v_true, v_pred).value - np.sqrt(25.0 / 3.0)) < 1e-15

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        b = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        acc = 0.0
        for x, y in zip(a, b):
            d = x - y
            acc += d.real**2 + d.imag**2
        assert abs(rmse(a, b) - np.sqrt(acc / 12)) < 1e-14

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            rmse(np.zeros(3, dtype=complex), np.zeros(6, dtype=complex))


class TestBackward:
    def test_zero_residual_gives_exact_zero(self):
        rng = np.random.default_rng(7)
        params, s, _ = random_case(rng, 2)
        tape = predict(params, s, tolerance=0.0, max_iterations=3)
        grad = backward(tape, tape.prediction.copy())
        assert np.array_equal(grad.d_x_conj, np.zeros((6, 6)))

    def test_single_bus_single_step_closed_form(self):
        # one step from w_hat, wye power only:
        #   v1 = w_hat + x_hat @ (conj(s)/conj(w_hat))
        #   dL/dconj(x)[p,q] = r_p * conj(u_q) / (2 * 3 * L)
        rng = np.random.default_rng(11)
        params, s, v_true = random_case(rng, 1)
        s = Injection(s_wye=s.s_wye, s_delta=np.zeros(3, dtype=complex))
        tape = predict(params, s, tolerance=0.0, max_iterations=1)
        u = np.conj(s.s_wye) / np.conj(params.w_hat)
        r = tape.prediction - v_true
        lval = np.sqrt(np.mean(np.abs(r) ** 2))
        expected = np.outer(r, np.conj(u)) / (2.0 * 3.0 * lval)
        assert_gradients_match(backward(tape, v_true).d_x_conj, expected, rel=1e-10)

    def test_matches_finite_differences_across_sizes(self):
        rng = np.random.default_rng(42)
        for n_buses in (1, 2, 4):
            for unroll in (1, 2, 5):
                params, s, v_true = random_case(rng, n_buses)
                tape = predict(params, s, tolerance=0.0, max_iterations=unroll)
                assert tape.steps == unroll
                fd = finite_diff_gradient(params, s, v_true, unroll)
                assert_gradients_match(backward(tape, v_true).d_x_conj, fd.d_x_conj)

    def test_wye_only_and_delta_only_paths(self):
        rng = np.random.default_rng(13)
        params, s, v_true = random_case(rng, 2)
        zero = np.zeros(6, dtype=complex)
        for inj in (
            Injection(s_wye=s.s_wye, s_delta=zero),
            Injection(s_wye=zero, s_delta=s.s_delta),
        ):
            tape = predict(params, inj, tolerance=0.0, max_iterations=2)
            fd = finite_diff_gradient(params, inj, v_true, 2)
            assert_gradients_match(backward(tape, v_true).d_x_conj, fd.d_x_conj)

    def test_conjugate_pair_symmetry(self):
        # the paired adjoint dL/dx_hat, accumulated through the mirrored
        # chain rule, must be the conjugate of dL/dconj(x_hat)
        from gridfp.loadflow import phase_pair_apply, phase_pair_apply_t

        rng = np.random.default_rng(17)
        params, s, v_true = random_case(rng, 2)
        tape = predict(params, s, tolerance=0.0, max_iterations=3)
        r = tape.prediction - v_true
        n3 = r.size
        lval = np.sqrt(np.mean(np.abs(r) ** 2))
        d_conj = _propagate(tape.iterates, s, params.x_hat, r / (2 * n3 * lval))

        g = np.conj(r) / (2 * n3 * lval)  # dL/dv at the final iterate
        d_plain = np.zeros_like(params.x_hat)
        for k in range(len(tape.iterates) - 2, -1, -1):
            vk = tape.iterates[k]
            hv = phase_pair_apply(vk)
            u_k = np.conj(s.s_wye / vk + phase_pair_apply_t(s.s_delta / hv))
            d_plain += np.outer(g, u_k)
            if k > 0:
                y = np.conj(params.x_hat).T @ np.conj(g)
                term = (s.s_wye / vk**2) * y
                term = term + phase_pair_apply_t((s.s_delta / hv**2) * phase_pair_apply(y))
                g = -term
        assert np.max(np.abs(d_plain - np.conj(d_conj))) < 1e-12

    def test_pre_sqrt_gradient_is_homogeneous_in_residual(self):
        rng = np.random.default_rng(19)
        params, s, v_true = random_case(rng, 2)
        tape = predict(params, s, tolerance=0.0, max_iterations=2)
        r = tape.prediction - v_true
        n3 = r.size
        seed = r / n3  # gradient seed of the pre-sqrt mean square
        base = _propagate(tape.iterates, s, params.x_hat, seed)
        for alpha in (0.5, 2.0, 7.5):
            scaled = _propagate(tape.iterates, s, params.x_hat, alpha * seed)
            assert np.max(np.abs(scaled - alpha * base)) < 1e-12 * alpha

    def test_corrupt_tape_raises(self):
        rng = np.random.default_rng(23)
        params, s, v_true = random_case(rng, 1)
        tape = predict(params, s, tolerance=0.0, max_iterations=2)
        tape.iterates[0][:] = 1e-14
        with pytest.raises(DegenerateVoltage):
            backward(tape, v_true)

    def test_short_tape_rejected(self):
        rng = np.random.default_rng(29)
        params, s, v_true = random_case(rng, 1)
        tape = predict(params, s, tolerance=0.0, max_iterations=1)
        object.__setattr__(tape, "iterates", tape.iterates[:1])
        with pytest.raises(ValidationError):
            backward(tape, v_true)


class TestFiniteDifferenceOracle:
    def test_zero_residual_entries_below_floor(self):
        # at an exact minimum the symmetric differences cancel to O(step)
        rng = np.random.default_rng(31)
        params, s, _ = random_case(rng, 1, load_scale=0.02)
        tape = predict(params, s, tolerance=0.0, max_iterations=2)
        fd = finite_diff_gradient(params, s, tape.prediction.copy(), 2, step=1e-7)
        assert np.max(np.abs(fd.d_x_conj)) < 1e-9

    def test_cross_oracle_single_step(self):
        rng = np.random.default_rng(37)
        params, s, v_true = random_case(rng, 1)
        tape = predict(params, s, tolerance=0.0, max_iterations=1)
        fd = finite_diff_gradient(params, s, v_true, 1)
        assert np.max(np.abs(backward(tape, v_true).d_x_conj - fd.d_x_conj)) < 1e-7

    def test_step_size_robustness(self):
        rng = np.random.default_rng(41)
        params, s, v_true = random_case(rng, 1)
        coarse = finite_diff_gradient(params, s, v_true, 2, step=1e-5)
        fine = finite_diff_gradient(params, s, v_true, 2, step=5e-6)
        assert np.max(np.abs(coarse.d_x_conj - fine.d_x_conj)) < 1e-8

    def test_argument_validation(self):
        rng = np.random.default_rng(43)
        params, s, v_true = random_case(rng, 1)
        with pytest.raises(ValidationError):
            finite_diff_gradient(params, s, v_true, 0)
        with pytest.raises(ValidationError):
            finite_diff_gradient(params, s, v_true, 1, step=0.0)
