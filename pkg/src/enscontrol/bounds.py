"""Deviation bounds for weighted sample averages, with Monte Carlo checks.

The bounded-support structure of singleton samples lets classic
exponential concentration arguments bound how far weighted averages sit
from their targets.  The closed-form bounds live here next to the
empirical harness used to validate them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .averaging import ensemble_estimate
from .ensemble import _draw_vector_batch, draw_ensemble, gamma_vec
from .rng import RngStream


@dataclass(frozen=True)
class BoundSpec:
    """Inputs of the weighted-average deviation bound.

    The exponent constant defaults to 2, the value the Chernoff argument
    actually yields for variables of range ``range_hi - range_lo``; 4
    reproduces the sharper printed variant and can be selected where that
    convention is wanted.
    """

    range_lo: float
    range_hi: float
    weights: np.ndarray
    deviation: float
    exponent_constant: float = 2.0

    def __post_init__(self):
        if self.range_lo > self.range_hi:
            raise ValueError("range_lo must not exceed range_hi")
        if self.deviation < 0:
            raise ValueError("deviation must be >= 0")
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or (w < 0).any():
            raise ValueError("weights must be a nonnegative vector")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to one")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class VarianceBoundInputs:
    """Constants entering the three-term control and state deviation bounds."""

    sample_count: int
    deviation: float
    gamma_x0: float
    gamma_a: float
    dimension_constant: float
    beta: float = 1.0
    gamma_xf: float = 0.0
    gamma_b: float = 0.0
    u_norm: float = 0.0
    a_norm: float = 0.0
    x0_norm: float = 0.0

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.deviation < 0:
            raise ValueError("deviation must be >= 0")


def weighted_hoeffding_bound(spec: BoundSpec) -> float:
    """Tail bound on ``|mean - sum_i w_i Z_i|`` for bounded i.i.d. variables.

    Evaluates ``min(1, 2 exp(-c t^2 / ((b-a)^2 sum w_i^2)))``.  A
    degenerate range (``a == b``) makes any positive deviation impossible,
    so the bound is 0 for ``t > 0`` and 1 at ``t = 0``.
    """
    width = spec.range_hi - spec.range_lo
    if width == 0.0:
        return 0.0 if spec.deviation > 0 else 1.0
    wsq = float((spec.weights**2).sum())
    exponent = -spec.exponent_constant * spec.deviation**2 / (width**2 * wsq)
    return min(1.0, 2.0 * math.exp(exponent))


def norm_constants(n: int):
    """Dimension constants relating 2-norms to max-norms.

    ``eta`` bounds ``||w||_2 <= eta * ||w||_inf`` for vectors, ``mu`` the
    matrix analogue; both equal ``sqrt(n)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    root = math.sqrt(n)
    return root, root


def control_variance_bound(inputs: VarianceBoundInputs) -> float:
    """Probability bound on the combined-control deviation at N samples.

    Three exponential terms, one per sampled entity (final state, initial
    state, state map), each with exponent ``-2 N eps^2 / (9 beta^2 gamma^2)``,
    scaled by twice the dimension constant and capped at one.
    """
    scale = -2.0 * inputs.sample_count * inputs.deviation**2 / (9.0 * inputs.beta**2)
    total = 0.0
    for gamma in (inputs.gamma_xf, inputs.gamma_x0, inputs.gamma_a):
        if gamma == 0.0:
            continue  # degenerate entity: no deviation contribution
        total += math.exp(scale / gamma**2)
    return min(1.0, 2.0 * inputs.dimension_constant * total)


def state_variance_bound(inputs: VarianceBoundInputs) -> float:
    """Probability bound on the averaged endpoint deviation at N samples.

    Same three-term structure as the control bound, with entity scales
    ``||u|| gamma(B)``, ``||A|| gamma(x0)`` and ``||x0|| gamma(A)``.
    """
    for name in ("gamma_b", "u_norm", "a_norm", "x0_norm"):
        if getattr(inputs, name) <= 0:
            raise ValueError(f"{name} must be positive for the state bound")
    base = -2.0 * inputs.sample_count * inputs.deviation**2 / 9.0
    c1 = base / (inputs.u_norm**2 * inputs.gamma_b**2)
    c2 = base / (inputs.a_norm**2 * inputs.gamma_x0**2)
    c3 = base / (inputs.x0_norm**2 * inputs.gamma_a**2)
    total = math.exp(c1) + math.exp(c2) + math.exp(c3)
    return min(1.0, 2.0 * inputs.dimension_constant * total)


def one_step_error_bound(xf_err: float, x0_err: float, a_norm: float) -> float:
    """Deterministic bound on the one-step control combination defect.

    The image of the combination error under the input map is at most the
    final-state estimation error plus the state-map norm times the
    initial-state estimation error.
    """
    if xf_err < 0 or x0_err < 0 or a_norm < 0:
        raise ValueError("inputs must be >= 0")
    return xf_err + a_norm * x0_err


def _uniform_estimates(target: np.ndarray, trials: int, count: int, rng: RngStream):
    """Uniform-average estimates of a vector target, one row per trial."""
    dim = target.size
    idx, val = _draw_vector_batch(target, trials * count, rng)
    flat = np.arange(trials).repeat(count) * dim + idx
    sums = np.bincount(flat, weights=val, minlength=trials * dim)
    return sums.reshape(trials, dim) / count


def component_deviation_frequencies(
    target, t_grid, trials: int, samples_per_trial: int, rng: RngStream
) -> np.ndarray:
    """Per-component frequency of ``|mean_i - target_i| >= t``.

    Returns an array of shape ``(len(t_grid), dim)`` for uniform averaging
    of ``samples_per_trial`` draws per trial.
    """
    target = np.asarray(target, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    means = _uniform_estimates(target, trials, samples_per_trial, rng)
    dev = np.abs(means - target[None, :])
    return (dev[None, :, :] >= t_grid[:, None, None]).mean(axis=1)


def empirical_deviation_curve(
    target,
    t_grid,
    trials: int,
    samples_per_trial: int,
    rng: RngStream,
    method: str = "uniform",
    norm: str = "l2",
):
    """Fraction of trials whose estimate deviates from the target by >= t.

    Each trial draws ``samples_per_trial`` fresh samples of the target and
    estimates it with the given averaging method; the deviation is either
    the 2-norm (``norm="l2"``) or the largest component magnitude
    (``norm="sup"``).  Returns ``[(t, frequency), ...]`` over ``t_grid``.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    target = np.asarray(target, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if norm not in ("l2", "sup"):
        raise ValueError(f"unknown norm {norm!r}")

    if method == "uniform" and target.ndim == 1:
        means = _uniform_estimates(target, trials, samples_per_trial, rng)
        diff = means - target[None, :]
        dev = (
            np.linalg.norm(diff, axis=1)
            if norm == "l2"
            else np.abs(diff).max(axis=1)
        )
    else:
        dev = np.empty(trials)
        for t in range(trials):
            samples = draw_ensemble(
                target, samples_per_trial, rng.child("trial", t)
            )
            est = ensemble_estimate(target, samples, method)
            diff = (est.estimate - target).ravel()
            dev[t] = (
                float(np.linalg.norm(diff))
                if norm == "l2"
                else float(np.abs(diff).max())
            )
    return [(float(t), float((dev >= t).mean())) for t in t_grid]


def hoeffding_component_bound(
    target, deviation: float, samples_per_trial: int, exponent_constant: float = 2.0
) -> float:
    """Per-component deviation bound for uniform singleton-sample averages.

    Each component of a draw has range equal to the target's absolute
    mass, so the weighted bound applies with ``b - a = gamma`` and uniform
    weights.
    """
    gamma = gamma_vec(target)
    spec = BoundSpec(
        range_lo=0.0,
        range_hi=gamma,
        weights=np.full(samples_per_trial, 1.0 / samples_per_trial),
        deviation=deviation,
        exponent_constant=exponent_constant,
    )
    return weighted_hoeffding_bound(spec)
