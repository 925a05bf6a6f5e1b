"""One-step controls from ensembles and multi-step reference tracking.

Per-realization controls solve ``x_to = A_hat x_from + B u`` in the
minimum-norm least-squares sense.  The per-realization controls are then
combined into a single control with uniform weights, a batch simplex
least-squares fit of the sampled entities, or the sequential streaming
scheme of :func:`streaming_control`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .averaging import (
    EmptySampleSetError,
    ShapeMismatchError,
    _solve_simplex_lsq,
    sample_to_array,
    slse_step,
)
from .ensemble import DltiSystem, SampleMatrix, SampleVector, gamma_vec
from .rng import RngStream

logger = logging.getLogger(__name__)

# Controls are plain 1-D arrays of dimension m.
ControlInput = np.ndarray


@dataclass
class StreamingState:
    """Running state of the sequential control computation."""

    x0_estimate: np.ndarray
    xf_estimate: np.ndarray
    a_estimate: np.ndarray
    control: np.ndarray
    iterations: int
    last_error: float
    error_history: list = field(default_factory=list)
    converged: bool = False


@dataclass(frozen=True)
class TrajectoryResult:
    """Reference tracking outcome: states, controls and per-step errors."""

    reference_states: list
    realized_states: list
    ideal_states: list
    controls: list
    relative_errors: list


def pseudo_inverse(m, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse with a relative singular-value cutoff.

    Singular values below ``tol * sigma_max`` are treated as zero; the
    default cutoff is ``max(shape) * machine_epsilon``.
    """
    m = np.asarray(m, dtype=float)
    if not np.isfinite(m).all():
        raise ValueError("matrix must be finite")
    if tol is None:
        tol = max(m.shape) * np.finfo(float).eps
    return np.linalg.pinv(m, rtol=tol)


def _apply_state_map(a_hat, x) -> np.ndarray:
    """``A_hat @ x`` exploiting singleton-support structure when present."""
    if isinstance(a_hat, SampleMatrix):
        if isinstance(x, SampleVector):
            out = np.zeros(a_hat.rows)
            row = a_hat.support_rows[x.support_index]
            if row >= 0:
                out[row] = a_hat.values[x.support_index] * x.value
            return out
        x = np.asarray(x, dtype=float)
        out = np.zeros(a_hat.rows)
        live = a_hat.support_rows >= 0
        np.add.at(
            out,
            a_hat.support_rows[live],
            a_hat.values[live] * x[np.nonzero(live)[0]],
        )
        return out
    return np.asarray(a_hat, dtype=float) @ sample_to_array(x)


def one_step_control(a_hat, b, x_from, x_to, pinv_b: np.ndarray | None = None):
    """Minimum-norm control with ``x_to = A_hat x_from + B u``.

    When ``x_to - A_hat x_from`` lies outside the range of ``B`` the
    least-squares control is returned and the defect is logged, not raised.
    """
    if pinv_b is None:
        pinv_b = pseudo_inverse(b)
    rhs = sample_to_array(x_to) - _apply_state_map(a_hat, x_from)
    u = pinv_b @ rhs
    defect = float(np.linalg.norm(np.asarray(b, dtype=float) @ u - rhs))
    if defect > 1e-8 * (1.0 + float(np.linalg.norm(rhs))):
        logger.debug("one-step target outside input range, defect %.3e", defect)
    return u


def combine_controls_uniform(controls) -> np.ndarray:
    """Arithmetic mean of controls (pairwise summation, order independent)."""
    controls = list(controls)
    if not controls:
        raise EmptySampleSetError("no controls to combine")
    stacked = np.stack([np.asarray(u, dtype=float) for u in controls])
    return stacked.mean(axis=0)


def _is_vector_samples(samples) -> bool:
    return all(isinstance(s, SampleVector) for s in samples)


def _is_matrix_samples(samples) -> bool:
    return all(isinstance(s, SampleMatrix) for s in samples)


def per_sample_controls(pinv_b, x0_samples, xf_samples, a_samples) -> np.ndarray:
    """Controls of every paired realization, as columns of an (m, N) array."""
    n_samples = len(x0_samples)
    if not (len(xf_samples) == len(a_samples) == n_samples):
        raise ShapeMismatchError("entity sample lists must have equal length")
    if n_samples == 0:
        raise EmptySampleSetError("need at least one realization")
    dim = pinv_b.shape[1]
    rhs = np.zeros((dim, n_samples))
    cols = np.arange(n_samples)

    if _is_vector_samples(xf_samples):
        idx = np.fromiter((s.support_index for s in xf_samples), np.int64, n_samples)
        val = np.fromiter((s.value for s in xf_samples), float, n_samples)
        rhs[idx, cols] = val
    else:
        rhs += np.stack([sample_to_array(s) for s in xf_samples], axis=1)

    if _is_matrix_samples(a_samples) and _is_vector_samples(x0_samples):
        k0 = np.fromiter((s.support_index for s in x0_samples), np.int64, n_samples)
        v0 = np.fromiter((s.value for s in x0_samples), float, n_samples)
        rows_a = np.stack([s.support_rows for s in a_samples])
        vals_a = np.stack([s.values for s in a_samples])
        ar = rows_a[cols, k0]
        av = vals_a[cols, k0]
        live = ar >= 0
        rhs[ar[live], cols[live]] -= av[live] * v0[live]
    else:
        for j, (a_hat, x0_hat) in enumerate(zip(a_samples, x0_samples)):
            rhs[:, j] -= _apply_state_map(a_hat, x0_hat)

    return pinv_b @ rhs


def _stacked_entity_matrix(x0_samples, xf_samples, a_samples, n: int):
    """Samples of (x0, xf, A) stacked into one tall entity, one column each."""
    n_samples = len(x0_samples)
    structured = (
        _is_vector_samples(x0_samples)
        and _is_matrix_samples(a_samples)
        and (
            _is_vector_samples(xf_samples)
            or all(not np.any(sample_to_array(s)) for s in xf_samples)
        )
    )
    a_rows = a_samples[0].rows if structured else n
    height = 2 * n + n * a_rows
    if structured:
        rows_list, data_list, col_list = [], [], []
        offs = 2 * n + np.arange(n) * a_rows
        for j in range(n_samples):
            x0s, xfs, ahs = x0_samples[j], xf_samples[j], a_samples[j]
            live = ahs.support_rows >= 0
            rows = [np.array([x0s.support_index])]
            data = [np.array([x0s.value])]
            if isinstance(xfs, SampleVector):
                rows.append(np.array([n + xfs.support_index]))
                data.append(np.array([xfs.value]))
            rows.append(ahs.support_rows[live] + offs[live])
            data.append(ahs.values[live])
            rows = np.concatenate(rows)
            rows_list.append(rows)
            data_list.append(np.concatenate(data))
            col_list.append(np.full(rows.size, j, dtype=np.int64))
        return sp.csr_matrix(
            (np.concatenate(data_list),
             (np.concatenate(rows_list), np.concatenate(col_list))),
            shape=(height, n_samples),
        )
    columns = [
        np.concatenate(
            [
                sample_to_array(x0_samples[j]),
                sample_to_array(xf_samples[j]),
                sample_to_array(a_samples[j]).ravel(order="F"),
            ]
        )
        for j in range(n_samples)
    ]
    return np.stack(columns, axis=1)


def ensemble_control(
    system: DltiSystem,
    x0,
    xf,
    x0_samples,
    xf_samples,
    a_samples,
    method: str = "uniform",
    rng: RngStream | None = None,
    alse_tol: float = 1e-9,
    alse_max_iter: int = 2000,
    error_bound: float | None = None,
) -> np.ndarray:
    """Combined control for driving ``x0`` to ``xf`` from paired realizations.

    Realization ``j`` pairs the ``j``-th entry of each sample list; its
    control solves the sampled one-step equation with the true input map.
    ``method`` selects the combination: ``"uniform"`` averages the
    controls, ``"alse"`` weights them by the batch simplex fit of the
    stacked entity samples against the true ``(x0, xf, A)``, and
    ``"slse"`` runs the sequential scheme over the sample lists (requires
    ``rng`` for its entity choices; with the default ``error_bound=None``
    it consumes the whole sample budget).  A batch fit that exhausts its
    iteration budget falls back to the best iterate found and logs it.
    """
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)
    if method == "slse":
        if rng is None:
            raise ValueError("slse combination requires an RngStream")
        control, _ = streaming_control(
            x0,
            xf,
            system.a_matrix,
            system.b_matrix,
            x0_draws=x0_samples if gamma_vec(x0) > 0 else None,
            xf_draws=xf_samples if gamma_vec(xf) > 0 else None,
            a_draws=a_samples,
            error_bound=error_bound,
            max_iter=3 * len(a_samples),
            rng=rng,
        )
        return control

    pinv_b = pseudo_inverse(system.b_matrix)
    controls = per_sample_controls(pinv_b, x0_samples, xf_samples, a_samples)
    if method == "uniform":
        return controls.mean(axis=1)
    if method == "alse":
        n = system.n
        target = np.concatenate([x0, xf, system.a_matrix.ravel(order="F")])
        mat = _stacked_entity_matrix(x0_samples, xf_samples, a_samples, n)
        weights, gap, converged = _solve_simplex_lsq(
            mat, target, tol=alse_tol, max_iter=alse_max_iter
        )
        if not converged:
            logger.info(
                "entity fit stopped at gap %.3e after %d iterations; "
                "using best iterate",
                gap,
                alse_max_iter,
            )
        return controls @ weights
    raise ValueError(f"unknown method {method!r}")


def streaming_control(
    x0,
    xf,
    a_matrix,
    b_matrix,
    x0_draws,
    xf_draws,
    a_draws,
    error_bound: float | None,
    max_iter: int,
    rng: RngStream,
):
    """Sequential control computation with streaming entity updates.

    Keeps running estimates of the initial state, final state and state
    map.  Each iteration picks one entity at random, blends its estimate
    with a freshly drawn sample by the optimal two-term simplex weights
    against the true entity, recomputes the candidate control from the
    updated estimates, and blends the control with the same weights.  The
    loop stops when the control update ``||v_next - v||`` falls to
    ``error_bound``, the iteration budget is reached, or the chosen
    entity's sample stream is exhausted.

    A degenerate blend (the fresh draw equals the running estimate) leaves
    the control unchanged and reports a zero update, so any nonnegative
    ``error_bound`` would stop there; pass ``error_bound=None`` to disable
    the error stop and consume the whole sample budget.

    Entities whose draw stream is ``None`` are pinned to their true value
    and never updated (useful when the target, for example the origin, has
    no sample distribution).

    Returns ``(control, state)``; ``state.converged`` records whether the
    error criterion was met.
    """
    if error_bound is not None and error_bound < 0:
        raise ValueError("error_bound must be >= 0 (or None for no error stop)")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)
    a_matrix = np.asarray(a_matrix, dtype=float)
    pinv_b = pseudo_inverse(b_matrix)

    streams = {}
    estimates = {"x0": x0, "xf": xf, "a": a_matrix}
    targets = {"x0": x0, "xf": xf, "a": a_matrix}
    for name, draws in (("x0", x0_draws), ("xf", xf_draws), ("a", a_draws)):
        if draws is None:
            continue
        it = iter(draws)
        try:
            first = next(it)
        except StopIteration:
            raise EmptySampleSetError(f"no samples for entity {name!r}") from None
        estimates[name] = sample_to_array(first)
        streams[name] = it
    if not streams:
        raise ValueError("at least one entity must provide samples")
    names = sorted(streams)

    def solve():
        return pinv_b @ (estimates["xf"] - estimates["a"] @ estimates["x0"])

    gen = rng.generator()
    control = solve()
    error = np.inf
    history: list[float] = []
    iterations = 0
    while (error_bound is None or error > error_bound) and iterations < max_iter:
        name = names[int(gen.integers(0, len(names)))]
        try:
            new = next(streams[name])
        except StopIteration:
            break
        w1, w2, blended = slse_step(estimates[name], new, targets[name])
        estimates[name] = blended
        candidate = solve()
        update = (w1 - 1.0) * control + w2 * candidate
        error = float(np.linalg.norm(update))
        control = control + update
        history.append(error)
        iterations += 1

    state = StreamingState(
        x0_estimate=estimates["x0"],
        xf_estimate=estimates["xf"],
        a_estimate=estimates["a"],
        control=control,
        iterations=iterations,
        last_error=float(error) if history else np.inf,
        error_history=history,
        converged=bool(history)
        and error_bound is not None
        and error <= error_bound,
    )
    return control, state


def draw_entity(target, count: int, rng: RngStream) -> list:
    """Ensemble draws of a target; zero-mass vectors yield exact zero draws."""
    from .ensemble import draw_ensemble

    target = np.asarray(target, dtype=float)
    if target.ndim == 1 and gamma_vec(target) == 0.0:
        return [np.zeros(target.size) for _ in range(count)]
    return draw_ensemble(target, count, rng)


def track_trajectory(
    system: DltiSystem,
    reference,
    method: str,
    samples_per_step: int,
    rng: RngStream,
    alse_tol: float = 1e-9,
    alse_max_iter: int = 2000,
) -> TrajectoryResult:
    """Track a reference state sequence with per-step ensemble controls.

    For each step the control is synthesized from fresh ensembles of the
    reference endpoints and the state map, then applied through the true
    system.  Errors are measured against the trajectory obtained with the
    ideal per-step pseudoinverse controls, which is the best any method
    can do when a reference step leaves the input range.
    """
    reference = [np.asarray(x, dtype=float) for x in reference]
    if len(reference) < 2:
        raise ValueError("reference must contain at least two states")
    pinv_b = pseudo_inverse(system.b_matrix)

    ideal = [reference[0]]
    realized = [reference[0]]
    controls: list[np.ndarray] = []
    errors: list[float] = []
    for t in range(len(reference) - 1):
        step_rng = rng.child("step", t)
        x0_samples = draw_entity(reference[t], samples_per_step, step_rng.child("x_from"))
        xf_samples = draw_entity(reference[t + 1], samples_per_step, step_rng.child("x_to"))
        a_samples = draw_entity(system.a_matrix, samples_per_step, step_rng.child("a"))
        u = ensemble_control(
            system,
            reference[t],
            reference[t + 1],
            x0_samples,
            xf_samples,
            a_samples,
            method=method,
            rng=step_rng.child("policy"),
            alse_tol=alse_tol,
            alse_max_iter=alse_max_iter,
        )
        u_ideal = pinv_b @ (reference[t + 1] - system.a_matrix @ reference[t])
        ideal.append(system.step(ideal[-1], u_ideal))
        realized.append(system.step(realized[-1], u))
        controls.append(u)
        num = float(np.linalg.norm(realized[-1] - ideal[-1]))
        den = float(np.linalg.norm(ideal[-1]))
        errors.append(num / den if den > 0 else (0.0 if num == 0.0 else np.inf))
    return TrajectoryResult(reference, realized, ideal, controls, errors)
