import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artdiff.codec import MASK, TokenKind, TokenLayout, TokenSequence
from artdiff.errors import InvalidParameterError, InvalidStepError, InvalidValueError
from artdiff.forward import (
    NoiseSchedule,
    build_schedule,
    build_transition,
    cumulative_transition,
    forward_sample,
    forward_trajectory,
    global_state,
    marginal,
    pose_transition,
    state_index,
)


def explicit_product(schedule, t, K):
    """Q_1 Q_2 ... Q_t by plain matrix multiplication."""
    M = np.eye(K + 1)
    for s in range(1, t + 1):
        M = M @ build_transition(schedule, s, TokenKind.ROT, K).entries
    return M


class TestSchedule:
    @pytest.mark.parametrize("profile", ["linear", "cosine"])
    def test_monotone_and_clamped(self, profile):
        s = build_schedule(100, profile)
        a = np.concatenate([[1.0], s.alpha])
        assert np.all(np.diff(a) < 0)
        assert s.alpha_at(0) == 1.0
        assert s.alpha_at(100) <= 1e-3

    def test_linear_values(self):
        s = build_schedule(10)
        assert s.alpha_at(5) == pytest.approx(0.5)
        assert s.alpha_at(10) == pytest.approx(1e-4)

    def test_two_step_linear(self):
        s = build_schedule(2)
        assert np.allclose(s.alpha, [0.5, 1e-4])
        assert np.allclose(s.beta, [0.5, 2e-4])

    def test_alpha_is_running_product(self):
        s = build_schedule(37, "cosine")
        assert np.allclose(s.alpha, np.cumprod(s.beta), rtol=0, atol=1e-15)

    def test_single_step(self):
        s = build_schedule(1)
        assert s.T == 1
        assert s.alpha_at(1) == pytest.approx(1e-4)

    def test_bad_inputs(self):
        with pytest.raises(InvalidParameterError):
            build_schedule(0)
        with pytest.raises(InvalidParameterError):
            build_schedule(10, "sigmoid")
        with pytest.raises(InvalidParameterError):
            NoiseSchedule([0.5, 1.2])
        with pytest.raises(InvalidStepError):
            build_schedule(5).alpha_at(6)
        with pytest.raises(InvalidStepError):
            build_schedule(5).beta_at(0)

    def test_json_round_trip(self):
        s = build_schedule(20, "cosine")
        back = NoiseSchedule.from_json(s.to_json())
        assert np.array_equal(back.beta, s.beta)
        assert back.profile == "cosine"
        d = json.loads(s.to_json())
        assert set(d) == {"T", "profile", "beta", "alpha"}
        d["alpha"][3] += 0.1
        with pytest.raises(InvalidParameterError):
            NoiseSchedule.from_dict(d)


class TestTransitions:
    @pytest.mark.parametrize("t", [1, 3, 7, 10])
    def test_rows_stochastic_and_absorbing(self, t):
        Q = build_transition(build_schedule(10), t, TokenKind.TSL, 8).entries
        assert np.allclose(Q.sum(axis=1), 1.0, atol=1e-15)
        assert Q[-1, -1] == 1.0 and np.all(Q[-1, :-1] == 0)

    @pytest.mark.parametrize("profile", ["linear", "cosine"])
    def test_closed_form_matches_product(self, profile):
        s = build_schedule(12, profile)
        for t in range(1, 13):
            assert np.max(np.abs(cumulative_transition(s, t, TokenKind.ROT, 6).entries - explicit_product(s, t, 6))) <= 1e-14

    def test_marginal_is_cumulative_row(self):
        s = build_schedule(10)
        p = marginal(3, 4, s, 8)
        assert np.allclose(p, explicit_product(s, 4, 8)[2])
        with pytest.raises(InvalidValueError):
            marginal(MASK, 4, s, 8)

    def test_pose_transition_blocks(self):
        K = 5
        P = pose_transition(build_schedule(10), 4, K)
        assert P.shape == (3 * (K + 1),) * 2
        for a in range(3):
            for b in range(3):
                if a != b:
                    assert np.all(P[a * (K + 1):(a + 1) * (K + 1), b * (K + 1):(b + 1) * (K + 1)] == 0)

    def test_state_index(self):
        assert state_index(MASK, 360) == 360
        assert state_index(1, 360) == 0
        assert list(global_state([MASK, 2], [TokenKind.TSL, TokenKind.JOINT], 4)) == [9, 11]


class TestSampling:
    def test_t0_is_identity(self, rng):
        x0 = TokenSequence(np.arange(1, 7), TokenLayout(1))
        assert forward_sample(x0, 0, build_schedule(5), rng) is x0

    def test_masked_x0_rejected(self, rng):
        with pytest.raises(InvalidValueError):
            forward_sample(TokenSequence([0, 1, 1, 1, 1, 1], TokenLayout(1)), 1, build_schedule(5), rng)

    def test_survival_rate(self, rng):
        s = build_schedule(10)
        x0 = TokenSequence(rng.integers(1, 361, 60_000), TokenLayout(10_000))
        xt = forward_sample(x0, 3, s, rng)
        kept = ~xt.mask
        assert np.array_equal(xt.values[kept], x0.values[kept])
        p = s.alpha_at(3)
        assert abs(kept.mean() - p) <= 4 * np.sqrt(p * (1 - p) / 60_000)

    def test_trajectory_masks_are_monotone(self, rng):
        s = build_schedule(20)
        x0 = TokenSequence(rng.integers(1, 361, 14), TokenLayout(2, ("revolute", "prismatic")))
        traj = forward_trajectory(x0, s, rng)
        assert len(traj) == 21
        for a, b in zip(traj, traj[1:]):
            assert np.all(b.mask >= a.mask)
            assert np.all((b.values == a.values) | b.mask)

    def test_trajectory_deterministic(self):
        s = build_schedule(20)
        x0 = TokenSequence(np.arange(1, 8), TokenLayout(1, ("revolute",)))
        a = forward_trajectory(x0, s, np.random.default_rng(1))
        b = forward_trajectory(x0, s, np.random.default_rng(1))
        assert all(u == v for u, v in zip(a, b))

    def test_per_kind_schedules(self, rng):
        sched = {TokenKind.ROT: build_schedule(5), TokenKind.TSL: NoiseSchedule([1.0] * 5), TokenKind.JOINT: build_schedule(5)}
        x0 = TokenSequence(rng.integers(1, 361, 600), TokenLayout(100))
        xt = forward_sample(x0, 5, sched, rng)
        assert not np.any(xt.mask[x0.kinds == TokenKind.TSL])

    @given(st.integers(1, 60), st.sampled_from(["linear", "cosine"]))
    def test_schedule_properties(self, T, profile):
        s = build_schedule(T, profile)
        assert np.all((s.beta >= 0) & (s.beta <= 1))
        assert s.alpha_at(T) <= 1e-3
