"""Reverse process: analytic posterior, flow decider and the two samplers.

The reformulated step routes every token through one of four branches::

    x_{t-1} = b   * [v1 * x_t   + (1 - v1) * u1]
            + (1-b) * [v2 * x0hat + (1 - v2) * u2]

with ``b = [x_t == x0hat]``, ``v1 ~ Bern(lambda1)``, ``v2 ~ Bern(lambda2)``
(drawn by Gumbel-max), ``u1 = MASK`` and ``u2 ~ beta_t * x_t + (1-beta_t) * MASK``.
Marginalizing the binary draws gives :func:`posterior_analytic`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Protocol, Union

import numpy as np

from .codec import MASK, TokenKind, TokenLayout, TokenSequence
from .errors import (
    EstimationFailedError,
    InvalidParameterError,
    InvalidStepError,
    InvalidValueError,
    SequenceShapeError,
)
from .forward import NoiseSchedule, Schedules, per_token, schedule_for, schedule_T

MODES = ("reformulated", "vanilla")
X0_CHOICES = ("argmax", "sample")


class Denoiser(Protocol):
    """Predicts ``p(x_0 | x_t, observation)`` as an ``(L, K)`` array over bins 1..K."""

    def predict(self, x_t: TokenSequence, t: int, observation: Any) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class FlowSchedule:
    """Flow coefficients indexed by step: entry ``t-1`` is used when leaving ``x_t``."""

    lambda1: np.ndarray
    lambda2: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        arrays = []
        for name in ("lambda1", "lambda2", "beta"):
            a = np.array(getattr(self, name), dtype=float).reshape(-1)
            if np.any(~np.isfinite(a)) or np.any(a < 0.0) or np.any(a > 1.0):
                raise InvalidParameterError(f"{name} must lie in [0, 1]")
            a.flags.writeable = False
            object.__setattr__(self, name, a)
            arrays.append(a)
        if len({a.shape[0] for a in arrays}) != 1:
            raise InvalidParameterError("flow arrays must share length T")

    @property
    def T(self) -> int:
        return int(self.beta.shape[0])

    def at(self, t: int):
        """``(lambda1, lambda2, beta)`` for step ``t``."""
        if int(t) != t or not 1 <= t <= self.T:
            raise InvalidStepError(f"step {t} outside [1, {self.T}]")
        return float(self.lambda1[t - 1]), float(self.lambda2[t - 1]), float(self.beta[t - 1])


Flows = Union[FlowSchedule, Mapping[TokenKind, FlowSchedule]]


def default_flow(schedule: NoiseSchedule, lambda1=None) -> FlowSchedule:
    """Exact mask-absorbing coefficients.

    ``lambda2[t-1] = (alpha_{t-1} - alpha_t) / (1 - alpha_t)`` is the chance a
    masked token was unmasked one step earlier. ``lambda1`` defaults to 1; pass
    a scalar or length-T array below 1 to re-noise agreeing tokens.
    """
    alpha = schedule.alpha
    alpha_prev = np.concatenate([[1.0], alpha[:-1]])
    denom = 1.0 - alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        lam2 = np.where(denom > 0.0, (alpha_prev - alpha) / denom, 1.0)
    lam2 = np.clip(lam2, 0.0, 1.0)
    lam1 = np.ones(schedule.T) if lambda1 is None else np.broadcast_to(np.asarray(lambda1, dtype=float), (schedule.T,))
    return FlowSchedule(lam1, lam2, schedule.beta)


def _flow_for(schedule: Schedules, flow: Flows | None, kind) -> FlowSchedule:
    if flow is None:
        return default_flow(schedule_for(schedule, kind))
    if isinstance(flow, FlowSchedule):
        return flow
    return flow[TokenKind(kind)]


def _coefficients(schedule: Schedules, flow: Flows | None, kinds: np.ndarray, t: int):
    """Per-token ``(lambda1, lambda2, beta)`` arrays at step ``t``."""
    if flow is None and isinstance(schedule, NoiseSchedule):
        flow = default_flow(schedule)
    if isinstance(flow, FlowSchedule):
        l1, l2, b = flow.at(t)
        n = len(kinds)
        return np.full(n, l1), np.full(n, l2), np.full(n, b)
    out = np.empty((3, len(kinds)))
    for kind in np.unique(kinds):
        out[:, kinds == kind] = np.array(_flow_for(schedule, flow, kind).at(t))[:, None]
    return out[0], out[1], out[2]


def posterior_analytic(
    x_t_token: int,
    x0_token: int,
    t: int,
    schedule: Schedules,
    flow: Flows | None = None,
    bin_count: int = 360,
    kind: TokenKind = TokenKind.ROT,
) -> np.ndarray:
    """``q(x_{t-1} | x_t, x_0)`` over ``[bin 1..K, MASK]`` for ``2 <= t <= T``."""
    T = schedule_T(schedule)
    if int(t) != t or not 2 <= t <= T:
        raise InvalidStepError(f"posterior defined for 2 <= t <= {T}; t=1 is finalized by argmax")
    if x0_token == MASK or not 1 <= x0_token <= bin_count:
        raise InvalidValueError(f"x0 token must be a bin in 1..{bin_count}")
    if not 0 <= x_t_token <= bin_count:
        raise InvalidValueError(f"x_t token {x_t_token} outside MASK/1..{bin_count}")
    lam1, lam2, beta = _flow_for(schedule, flow, kind).at(t)
    p = np.zeros(bin_count + 1)
    mask_i = bin_count
    if x_t_token == x0_token:
        p[x_t_token - 1] += lam1
        p[mask_i] += 1.0 - lam1
    else:
        p[x0_token - 1] += lam2
        if x_t_token == MASK:
            p[mask_i] += 1.0 - lam2
        else:
            p[x_t_token - 1] += (1.0 - lam2) * beta
            p[mask_i] += (1.0 - lam2) * (1.0 - beta)
    return p


def gumbel_binary(lam, rng: np.random.Generator, temperature: float = 1.0):
    """Hard Gumbel-max draw from ``GS(lam, 1 - lam)``.

    Returns ``(hard, soft)``: ``hard`` is 1 where the first category wins,
    ``soft`` the tempered softmax weight of that category (diagnostics only).
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    with np.errstate(divide="ignore"):
        logits = np.stack([np.log(lam), np.log1p(-lam)], axis=-1)
    g = rng.gumbel(size=logits.shape)
    z = logits + g
    hard = (z[..., 0] > z[..., 1]).astype(np.int64)
    with np.errstate(invalid="ignore", over="ignore"):
        d = (z[..., 1] - z[..., 0]) / temperature
        soft = np.where(np.isnan(d), 0.5, 1.0 / (1.0 + np.exp(np.clip(d, -700, 700))))
    return hard, soft


@dataclass(frozen=True, eq=False)
class FlowDecision:
    b: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    v1_soft: np.ndarray
    v2_soft: np.ndarray

    def apply(self, x_t, x0hat) -> np.ndarray:
        """The branch selected for each token."""
        keep_branch = np.where(self.v1 == 1, x_t, self.u1)
        denoise_branch = np.where(self.v2 == 1, x0hat, self.u2)
        return np.where(self.b == 1, keep_branch, denoise_branch)


def flow_decide(x_t, x0hat, t: int, flow: FlowSchedule, temperature: float, rng: np.random.Generator) -> FlowDecision:
    """Draw the routing variables for tokens ``x_t`` given predictions ``x0hat``.

    ``flow`` may also be a tuple of per-token ``(lambda1, lambda2, beta)``
    arrays, as produced internally for per-kind schedules.
    """
    if not temperature > 0:
        raise InvalidParameterError("temperature must be positive")
    x_t = np.atleast_1d(np.asarray(x_t, dtype=np.int64))
    x0hat = np.atleast_1d(np.asarray(x0hat, dtype=np.int64))
    if x_t.shape != x0hat.shape:
        raise SequenceShapeError("x_t and x0hat differ in shape")
    n = x_t.shape[0]
    if isinstance(flow, FlowSchedule):
        lam1, lam2, beta = (np.full(n, c) for c in flow.at(t))
    else:
        lam1, lam2, beta = flow
    b = (x_t == x0hat).astype(np.int64)
    v1, v1_soft = gumbel_binary(lam1, rng, temperature)
    v2, v2_soft = gumbel_binary(lam2, rng, temperature)
    u1 = np.full(n, MASK, dtype=np.int64)
    u2 = np.where(rng.random(n) < beta, x_t, MASK)
    return FlowDecision(b, v1, v2, u1, u2, v1_soft, v2_soft)


def reverse_step(
    x_t: TokenSequence,
    x0hat: TokenSequence,
    t: int,
    schedule: Schedules,
    flow: Flows | None,
    rng: np.random.Generator,
    temperature: float = 1.0,
) -> TokenSequence:
    """One reformulated reverse step ``x_t -> x_{t-1}`` towards ``x0hat``."""
    if len(x_t) != len(x0hat) or x_t.layout != x0hat.layout:
        raise SequenceShapeError(f"x_t has {len(x_t)} tokens, x0hat has {len(x0hat)}")
    if np.any(x0hat.mask):
        raise InvalidValueError("x0hat must be MASK-free")
    coeffs = _coefficients(schedule, flow, x_t.kinds, t)
    decision = flow_decide(x_t.values, x0hat.values, t, coeffs, temperature, rng)
    return x_t.replace(decision.apply(x_t.values, x0hat.values))


def vanilla_step(x_t: TokenSequence, x0hat: TokenSequence, t: int, schedule: Schedules, flow: Flows | None, rng):
    """Absorbing-posterior step: masked tokens commit to ``x0hat`` with ``lambda2``; others never move."""
    _, lam2, _ = _coefficients(schedule, flow, x_t.kinds, t)
    commit = x_t.mask & (rng.random(len(x_t)) < lam2)
    return x_t.replace(np.where(commit, x0hat.values, x_t.values))


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Row-wise inverse-CDF draw; returns bins ``1..K``."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    idx = (cdf > u[:, None]).argmax(axis=1)
    return idx + 1


def _predict(denoiser, x_t: TokenSequence, t: int, observation, bin_count: int) -> np.ndarray:
    try:
        probs = np.asarray(denoiser.predict(x_t, t, observation), dtype=float)
    except Exception as exc:
        raise EstimationFailedError(f"denoiser raised {type(exc).__name__}: {exc}", t) from exc
    if probs.shape != (len(x_t), bin_count):
        raise EstimationFailedError(f"denoiser returned shape {probs.shape}, expected {(len(x_t), bin_count)}", t)
    if not np.all(np.isfinite(probs)) or np.any(probs < 0) or np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-9:
        raise EstimationFailedError("denoiser output is not a distribution per token", t)
    return probs


def sample_reverse(
    observation,
    denoiser: Denoiser,
    schedule: Schedules,
    layout: TokenLayout,
    rng: np.random.Generator,
    *,
    bin_count: int = 360,
    flow: Flows | None = None,
    mode: str = "reformulated",
    x0_choice: str | None = None,
    temperature: float = 1.0,
    trace: list | None = None,
) -> TokenSequence:
    """Denoise an all-MASK sequence into an ``x_0`` estimate.

    Steps ``t = T..2`` use :func:`reverse_step` (``reformulated``) or
    :func:`vanilla_step` (``vanilla``); at ``t = 1`` every remaining MASK
    takes the denoiser's argmax. The denoiser is called exactly ``T`` times.

    ``x0_choice`` picks how the per-step prediction is read from the
    denoiser: ``argmax`` (default for ``reformulated``) or a categorical
    ``sample`` (default, and the only faithful choice, for ``vanilla``). When
    ``trace`` is a list, one ``{"t", "tokens"}`` record per state is appended.
    """
    if mode not in MODES:
        raise InvalidParameterError(f"mode must be one of {MODES}, got {mode!r}")
    if x0_choice is None:
        x0_choice = "argmax" if mode == "reformulated" else "sample"
    if x0_choice not in X0_CHOICES:
        raise InvalidParameterError(f"x0_choice must be one of {X0_CHOICES}")
    T = schedule_T(schedule)
    x = TokenSequence.all_mask(layout)
    if trace is not None:
        trace.append(_trace_record(T, x))
    for t in range(T, 1, -1):
        probs = _predict(denoiser, x, t, observation, bin_count)
        if x0_choice == "argmax":
            x0hat = x.replace(probs.argmax(axis=1) + 1)
        else:
            x0hat = x.replace(sample_categorical(probs, rng))
        if mode == "reformulated":
            x = reverse_step(x, x0hat, t, schedule, flow, rng, temperature)
        else:
            x = vanilla_step(x, x0hat, t, schedule, flow, rng)
        if trace is not None:
            trace.append(_trace_record(t - 1, x))
    probs = _predict(denoiser, x, 1, observation, bin_count)
    x = x.replace(np.where(x.mask, probs.argmax(axis=1) + 1, x.values))
    if trace is not None:
        trace.append(_trace_record(0, x))
    return x


def _trace_record(t: int, x: TokenSequence) -> dict:
    return {"t": t, "tokens": [None if v == MASK else int(v) for v in x.values]}
