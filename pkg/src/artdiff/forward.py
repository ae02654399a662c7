"""Noise schedules, mask-absorbing transition matrices and forward corruption.

State vectors are ordered ``[bin 1, ..., bin K, MASK]``; :func:`state_index`
converts token values to that ordering. ``[Q_t]_ij = q(x_t = j | x_{t-1} = i)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np
from scipy.linalg import block_diag

from .codec import MASK, TokenKind, TokenSequence
from .errors import InvalidParameterError, InvalidStepError, InvalidValueError

ALPHA_T_CLAMP = 1e-4
DEFAULT_BETA_FLOOR = 1e-8
COSINE_OFFSET = 0.008


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Per-step keep probabilities ``beta[t-1]`` and their running product ``alpha``."""

    beta: np.ndarray
    profile: str = "manual"

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).reshape(-1)
        if beta.size == 0:
            raise InvalidParameterError("schedule needs at least one step")
        if np.any(~np.isfinite(beta)) or np.any(beta < 0.0) or np.any(beta > 1.0):
            raise InvalidParameterError("beta values must lie in [0, 1]")
        beta.flags.writeable = False
        alpha = np.cumprod(beta)
        alpha.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)

    @property
    def T(self) -> int:
        return int(self.beta.shape[0])

    def _check(self, t: int, lowest: int = 1) -> int:
        if int(t) != t or not lowest <= t <= self.T:
            raise InvalidStepError(f"step {t} outside [{lowest}, {self.T}]")
        return int(t)

    def alpha_at(self, t: int) -> float:
        """``alpha_t`` with ``alpha_0 = 1``."""
        t = self._check(t, lowest=0)
        return 1.0 if t == 0 else float(self.alpha[t - 1])

    def beta_at(self, t: int) -> float:
        return float(self.beta[self._check(t) - 1])

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "profile": self.profile,
            "beta": [float(b) for b in self.beta],
            "alpha": [float(a) for a in self.alpha],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        sched = cls(d["beta"], d.get("profile", "manual"))
        if "T" in d and d["T"] != sched.T:
            raise InvalidParameterError(f"T={d['T']} does not match {sched.T} beta values")
        if "alpha" in d and not np.allclose(sched.alpha, d["alpha"], rtol=1e-12, atol=1e-15):
            raise InvalidParameterError("stored alpha is inconsistent with beta")
        return sched

    @classmethod
    def from_json(cls, text: str) -> "NoiseSchedule":
        return cls.from_dict(json.loads(text))


Schedules = Union[NoiseSchedule, Mapping[TokenKind, NoiseSchedule]]


def build_schedule(T: int = 100, profile: str = "linear", beta_floor: float = DEFAULT_BETA_FLOOR) -> NoiseSchedule:
    """Schedule whose ``alpha`` falls from 1 towards 0 over ``T`` steps.

    ``linear`` uses ``alpha_t = 1 - t/T``; ``cosine`` the squared-cosine
    profile with offset 0.008. ``alpha_T`` is raised to at least 1e-4 and ``beta`` is
    floored at ``beta_floor``.
    """
    if int(T) != T or T < 1:
        raise InvalidParameterError(f"T must be a positive integer, got {T}")
    T = int(T)
    steps = np.arange(1, T + 1, dtype=float)
    if profile == "linear":
        alpha = 1.0 - steps / T
    elif profile == "cosine":
        f = lambda s: np.cos((s / T + COSINE_OFFSET) / (1 + COSINE_OFFSET) * np.pi / 2) ** 2
        alpha = f(steps) / f(0.0)
    else:
        raise InvalidParameterError(f"unknown profile {profile!r}")
    alpha[-1] = max(alpha[-1], ALPHA_T_CLAMP)
    alpha_prev = np.concatenate([[1.0], alpha[:-1]])
    beta = np.maximum(alpha / alpha_prev, beta_floor)
    sched = NoiseSchedule(np.minimum(beta, 1.0), profile)
    if np.any(np.diff(np.concatenate([[1.0], sched.alpha])) >= 0) or sched.alpha[-1] > 1e-3:
        raise InvalidParameterError(f"T={T} is too large for a strictly decreasing {profile} schedule")
    return sched


def schedule_for(schedule: Schedules, kind: TokenKind) -> NoiseSchedule:
    if isinstance(schedule, NoiseSchedule):
        return schedule
    return schedule[TokenKind(kind)]


def schedule_T(schedule: Schedules) -> int:
    if isinstance(schedule, NoiseSchedule):
        return schedule.T
    Ts = {s.T for s in schedule.values()}
    if len(Ts) != 1:
        raise InvalidParameterError("per-kind schedules must share T")
    return Ts.pop()


def per_token(schedule: Schedules, kinds: np.ndarray, fn) -> np.ndarray:
    """Evaluate ``fn(NoiseSchedule)`` for each token position's schedule."""
    if isinstance(schedule, NoiseSchedule):
        return np.full(len(kinds), fn(schedule), dtype=float)
    out = np.empty(len(kinds), dtype=float)
    for kind in np.unique(kinds):
        out[kinds == kind] = fn(schedule[TokenKind(kind)])
    return out


def state_index(token, bin_count: int):
    """Position of a token value in a ``(K+1)`` state vector (MASK last)."""
    token = np.asarray(token)
    return np.where(token == MASK, bin_count, token - 1)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    kind: TokenKind
    entries: np.ndarray

    @property
    def bin_count(self) -> int:
        return self.entries.shape[0] - 1


def _absorbing(keep: float, bin_count: int) -> np.ndarray:
    Q = np.zeros((bin_count + 1, bin_count + 1))
    idx = np.arange(bin_count)
    Q[idx, idx] = keep
    Q[idx, bin_count] = 1.0 - keep
    Q[bin_count, bin_count] = 1.0
    return Q


def build_transition(schedule: Schedules, t: int, kind: TokenKind, bin_count: int = 360) -> TransitionMatrix:
    """One-step matrix: keep with ``beta_t``, else jump to MASK."""
    s = schedule_for(schedule, kind)
    return TransitionMatrix(TokenKind(kind), _absorbing(s.beta_at(t), bin_count))


def cumulative_transition(schedule: Schedules, t: int, kind: TokenKind, bin_count: int = 360) -> TransitionMatrix:
    """Closed form of ``Q_1 Q_2 ... Q_t``: keep with ``alpha_t``, else MASK."""
    s = schedule_for(schedule, kind)
    s._check(t)
    return TransitionMatrix(TokenKind(kind), _absorbing(s.alpha_at(t), bin_count))


def pose_transition(schedule: Schedules, t: int, bin_count: int = 360) -> np.ndarray:
    """Block-diagonal transition over the stacked ROT | TSL | JOINT vocabularies.

    Each block is a ``(K+1)`` absorbing matrix with its own MASK state; block
    ``k`` occupies rows/columns ``k*(K+1) .. (k+1)*(K+1)-1``.
    """
    return block_diag(*(build_transition(schedule, t, kind, bin_count).entries for kind in TokenKind))


def global_state(values, kinds, bin_count: int) -> np.ndarray:
    """Index of each token in the stacked vocabulary of :func:`pose_transition`."""
    return np.asarray(kinds) * (bin_count + 1) + state_index(values, bin_count)


def marginal(x0_token: int, t: int, schedule: Schedules, bin_count: int = 360, kind: TokenKind = TokenKind.ROT):
    """``q(x_t | x_0)`` as a ``(K+1)`` probability vector."""
    if x0_token == MASK:
        raise InvalidValueError("clean tokens are never MASK")
    if not 1 <= x0_token <= bin_count:
        raise InvalidValueError(f"token {x0_token} outside 1..{bin_count}")
    s = schedule_for(schedule, kind)
    a = s.alpha_at(s._check(t))
    p = np.zeros(bin_count + 1)
    p[x0_token - 1] = a
    p[bin_count] += 1.0 - a
    return p


def forward_sample(x0: TokenSequence, t: int, schedule: Schedules, rng: np.random.Generator) -> TokenSequence:
    """Draw ``x_t ~ q(x_t | x_0)``: each token survives with ``alpha_t``."""
    if np.any(x0.mask):
        raise InvalidValueError("x0 must not contain MASK tokens")
    if t == 0:
        return x0
    keep = per_token(schedule, x0.kinds, lambda s: s.alpha_at(s._check(t)))
    survive = rng.random(len(x0)) < keep
    return x0.replace(np.where(survive, x0.values, MASK))


def forward_trajectory(x0: TokenSequence, schedule: Schedules, rng: np.random.Generator, t_max: int | None = None):
    """Sequential chain ``x_0, x_1, ..., x_{t_max}`` applying ``Q_1 .. Q_t`` step by step."""
    T = schedule_T(schedule)
    t_max = T if t_max is None else int(t_max)
    if not 0 <= t_max <= T:
        raise InvalidStepError(f"t_max {t_max} outside [0, {T}]")
    traj = [x0]
    x = x0.values
    for t in range(1, t_max + 1):
        keep = per_token(schedule, x0.kinds, lambda s: s.beta_at(t))
        x = np.where(rng.random(len(x)) < keep, x, MASK)
        traj.append(x0.replace(x))
    return traj
