import ast
import inspect
import io

import numpy as np
import pytest

import bearing_pursuit.estimator as estimator_module
from bearing_pursuit.errors import InvalidDt, NotYetObservable
from bearing_pursuit.estimator import (
    BearingMeasurement,
    FilterParams,
    FilterTraceWriter,
    InformationState,
    correct,
    estimate,
    make_transition,
    plkf_oracle_step,
    predict,
)
from bearing_pursuit.geometry import bearing, project


def random_spd(rng, n, scale=1.0):
    a = rng.normal(size=(n, n))
    return scale * (a @ a.T + n * np.eye(n))


def make_measurement(p_target, p_pursuer, rng=None, noise=0.0, sigma_var=1e-4,
                     v_pursuer=None):
    lam = bearing(p_pursuer, p_target)
    if rng is not None and noise > 0:
        lam = lam + rng.normal(0.0, noise, 3)
    v = np.zeros(3) if v_pursuer is None else np.asarray(v_pursuer, float)
    return BearingMeasurement(
        lambda_tilde=lam,
        pursuer_state=np.concatenate([p_pursuer, v]),
        sigma=sigma_var * np.eye(3),
    )


class TestMakeTransition:
    def test_rejects_bad_dt(self):
        for dt in (0.0, -0.1, np.nan, np.inf):
            with pytest.raises(InvalidDt):
                make_transition(dt)

    def test_entries(self):
        a, b, _ = make_transition(0.1)
        assert a[0, 3] == pytest.approx(0.1)
        assert b[3, 0] == pytest.approx(0.1)
        assert b[0, 0] == pytest.approx(0.005)

    def test_inverse(self):
        a, _, a_inv = make_transition(0.37)
        np.testing.assert_allclose(a @ a_inv, np.eye(6), atol=1e-12)


class TestPredict:
    def test_noiseless_propagation(self):
        rng = np.random.default_rng(10)
        params = FilterParams(dt=0.1, q=np.zeros((3, 3)))
        y_mat = random_spd(rng, 6)
        x = rng.normal(size=6)
        state = InformationState(y=y_mat @ x, Y=y_mat)
        out = predict(state, params)
        a, _, a_inv = make_transition(0.1)
        np.testing.assert_allclose(out.Y, a_inv.T @ y_mat @ a_inv, atol=1e-10)
        x_out, _ = estimate(out)
        np.testing.assert_allclose(x_out, a @ x, atol=1e-9)

    def test_covariance_form_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            params = FilterParams(dt=0.1, q=random_spd(rng, 3, 0.1))
            y_mat = random_spd(rng, 6)
            state = InformationState(y=y_mat @ rng.normal(size=6), Y=y_mat)
            out = predict(state, params)
            a, b, _ = make_transition(0.1)
            cov_pred = a @ np.linalg.inv(y_mat) @ a.T + b @ params.q @ b.T
            np.testing.assert_allclose(
                out.Y, np.linalg.inv(cov_pred), rtol=1e-8, atol=1e-10
            )

    def test_vanishing_dt_is_identity(self):
        rng = np.random.default_rng(12)
        params = FilterParams(dt=1e-8, q=0.25 * np.eye(3))
        y_mat = random_spd(rng, 6)
        state = InformationState(y=y_mat @ rng.normal(size=6), Y=y_mat)
        out = predict(state, params)
        np.testing.assert_allclose(out.Y, state.Y, rtol=1e-6)
        np.testing.assert_allclose(out.y, state.y, rtol=1e-6, atol=1e-9)

    def test_symmetry_and_psd(self):
        rng = np.random.default_rng(13)
        params = FilterParams(dt=0.1, q=0.25 * np.eye(3))
        y_mat = random_spd(rng, 6)
        state = InformationState(y=y_mat @ rng.normal(size=6), Y=y_mat)
        out = predict(state, params)
        np.testing.assert_allclose(out.Y, out.Y.T, atol=1e-12)
        assert np.linalg.eigvalsh(out.Y).min() > 0


class TestCorrect:
    def test_empty_measurements_identity(self):
        params = FilterParams(dt=0.1, q=0.25 * np.eye(3))
        prior = predict(params.initial_state(), params)
        post = correct(prior, [])
        assert np.array_equal(post.y, prior.y)
        assert np.array_equal(post.Y, prior.Y)
        assert post.k == prior.k

    def test_single_measurement_matches_covariance_oracle(self):
        rng = np.random.default_rng(14)
        params = FilterParams(dt=0.1, q=0.25 * np.eye(3))
        state = params.initial_state()
        x_cov = params.initial_estimate.copy()
        p_cov = np.linalg.inv(params.initial_information)
        p_target = np.array([1.0, 1.0, 0.5])
        for _ in range(5):
            p_pursuer = rng.uniform(-2, 2, 3)
            meas = [make_measurement(p_target, p_pursuer, rng, noise=1e-2)]
            state = correct(predict(state, params), meas)
            x_cov, p_cov = plkf_oracle_step((x_cov, p_cov), meas, params)
            x_inf, _ = estimate(state)
            rel = np.linalg.norm(x_inf - x_cov) / (1 + np.linalg.norm(x_cov))
            assert rel < 1e-8

    def test_two_orthogonal_bearings_fill_plane(self):
        # Pursuers east and north of the target: bearings are orthogonal,
        # and their information increment must span the x-y plane.
        params = FilterParams(dt=0.1, q=0.25 * np.eye(3))
        prior = predict(params.initial_state(), params)
        target = np.array([0.0, 0.0, 0.0])
        meas = [
            make_measurement(target, np.array([2.0, 0.0, 0.0])),
            make_measurement(target, np.array([0.0, 2.0, 0.0])),
        ]
        post = correct(prior, meas)
        delta = post.Y - prior.Y
        plane_block = delta[:2, :2]
        assert np.linalg.eigvalsh(plane_block).min() > 0

    def test_monotone_information(self):
        rng = np.random.default_rng(15)
        params = FilterParams(dt=0.1, q=0.25 * np.eye(3))
        state = params.initial_state()
        target = np.array([1.0, -1.0, 0.0])
        for _ in range(30):
            prior = predict(state, params)
            n = int(rng.integers(0, 4))
            meas = [
                make_measurement(target, rng.uniform(-3, 3, 3), rng, noise=1e-2)
                for _ in range(n)
            ]
            state = correct(prior, meas)
            gain = state.Y - prior.Y
            assert np.linalg.eigvalsh(gain).min() > -1e-12

    def test_measurement_order_invariance(self):
        rng = np.random.default_rng(16)
        params = FilterParams(dt=0.1, q=0.25 * np.eye(3))
        prior = predict(params.initial_state(), params)
        target = np.array([0.5, 0.5, 0.0])
        meas = [
            make_measurement(target, rng.uniform(-3, 3, 3), rng, noise=1e-2)
            for _ in range(3)
        ]
        a = correct(prior, meas)
        b = correct(prior, meas[::-1])
        np.testing.assert_allclose(a.y, b.y, atol=1e-12)
        np.testing.assert_allclose(a.Y, b.Y, atol=1e-12)

    def test_target_loss_run_stays_finite_and_psd(self):
        params = FilterParams(dt=0.1, q=0.25 * np.eye(3))
        state = params.initial_state()
        target = np.array([1.0, 0.0, 0.0])
        state = correct(predict(state, params), [
            make_measurement(target, np.array([0.0, 1.0, 0.0])),
            make_measurement(target, np.array([2.0, 1.0, 0.0])),
        ])
        for _ in range(500):
            state = correct(predict(state, params), [])
            assert np.all(np.isfinite(state.y))
            assert np.all(np.isfinite(state.Y))
            assert np.linalg.eigvalsh(state.Y).min() > -1e-12

    def test_degenerate_range_skipped(self):
        params = FilterParams(dt=0.1, q=0.25 * np.eye(3))
        prior = predict(params.initial_state(), params)
        # prior position estimate is exactly the origin; a pursuer at the
        # origin has degenerate predicted range
        bad = BearingMeasurement(
            lambda_tilde=np.array([1.0, 0.0, 0.0]),
            pursuer_state=np.zeros(6),
            sigma=1e-4 * np.eye(3),
        )
        post = correct(prior, [bad])
        assert post.skipped == 1
        np.testing.assert_array_equal(post.Y, prior.Y)

    def test_closed_form_shortcut_agrees(self):
        # With Sigma = s^2 I the weight collapses to P_lam / (r^2 s^2).
        rng = np.random.default_rng(17)
        params = FilterParams(dt=0.1, q=0.25 * np.eye(3))
        prior = predict(params.initial_state(), params)
        x_prior, _ = estimate(prior)
        target = np.array([1.0, 2.0, 0.0])
        p_pursuer = np.array([-1.0, 0.5, 0.0])
        meas = make_measurement(target, p_pursuer, rng, noise=1e-2)
        post = correct(prior, [meas])

        p_lam = project(meas.lambda_tilde)
        r_hat = np.linalg.norm(x_prior[:3] - p_pursuer)
        w = p_lam / (r_hat**2 * 1e-4)
        delta_expected = np.zeros((6, 6))
        delta_expected[:3, :3] = p_lam @ w @ p_lam
        np.testing.assert_allclose(post.Y - prior.Y, delta_expected, rtol=1e-9)


class TestEstimate:
    def test_identity_information(self):
        v = np.arange(6.0)
        x, cov = estimate(InformationState(y=v, Y=np.eye(6)))
        np.testing.assert_allclose(x, v)
        np.testing.assert_allclose(cov, np.eye(6))

    def test_singular_raises(self):
        state = InformationState(y=np.zeros(6), Y=np.zeros((6, 6)))
        with pytest.raises(NotYetObservable):
            estimate(state)


class TestOracleEquivalence:
    def test_hundred_step_random_scenarios(self):
        rng = np.random.default_rng(18)
        params = FilterParams(dt=0.1, q=0.25 * np.eye(3))
        state = params.initial_state()
        x_cov = params.initial_estimate.copy()
        p_cov = np.linalg.inv(params.initial_information)
        p_target = np.array([1.0, 1.5, 0.2])
        v_target = np.array([0.2, -0.1, 0.0])
        for _ in range(100):
            p_target = p_target + params.dt * v_target
            n = int(rng.integers(1, 4))
            meas = [
                make_measurement(
                    p_target, rng.uniform(-3, 3, 3), rng, noise=1e-2,
                    v_pursuer=rng.uniform(-1, 1, 3),
                )
                for _ in range(n)
            ]
            state = correct(predict(state, params), meas)
            x_cov, p_cov = plkf_oracle_step((x_cov, p_cov), meas, params)
            x_inf, _ = estimate(state)
            rel = np.linalg.norm(x_inf - x_cov) / (1 + np.linalg.norm(x_cov))
            assert rel < 1e-6


def test_no_trig_in_filter_source():
    # The vector-bearing formulation is singularity-free by construction;
    # keep trigonometry out of the filter.
    trig = {"cos", "sin", "tan", "atan", "atan2", "arctan", "arctan2",
            "asin", "acos", "arcsin", "arccos"}
    tree = ast.parse(inspect.getsource(estimator_module))
    for node in ast.walk(tree):
        if isinstance(node, ast.Call):
            func = node.func
            name = getattr(func, "attr", None) or getattr(func, "id", None)
            assert name not in trig, f"trigonometric call {name!r} in estimator"


def test_trace_writer_format():
    params = FilterParams(dt=0.1, q=0.25 * np.eye(3))
    state = correct(predict(params.initial_state(), params), [
        make_measurement(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
    ])
    buf = io.StringIO()
    writer = FilterTraceWriter(buf)
    writer.write(state, n_measurements=1)
    lines = buf.getvalue().strip().split("\n")
    assert len(lines) == 2
    assert lines[0].startswith("k,xhat_px")
    fields = lines[1].split(",")
    assert len(fields) == 14
    assert fields[0] == "1" and fields[-1] == "1"
