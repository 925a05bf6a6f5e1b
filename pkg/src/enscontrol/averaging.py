"""Combine ensemble samples into estimates.

Three schemes are provided: uniform weights, a batch simplex-constrained
least-squares fit over all samples at once ("accumulated"), and a
streaming two-term blend that folds one sample in at a time.  For vector
targets with singleton-support samples the accumulated fit has a closed
form; the general case is solved by projected gradient on the simplex.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .ensemble import SampleMatrix, SampleVector, gamma_vec


class ShapeMismatchError(ValueError):
    """Samples and weights do not share consistent shapes or lengths."""


class EmptySampleSetError(ValueError):
    """An operation that needs at least one sample received none."""


class NonConvergenceError(RuntimeError):
    """Simplex solver failed to certify optimality within its budget.

    Carries the best iterate found (``best_weights``), its residual
    (``best_residual``) and the final optimality gap (``gap``).
    """

    def __init__(self, message, best_weights, best_residual, gap):
        super().__init__(message)
        self.best_weights = best_weights
        self.best_residual = best_residual
        self.gap = gap


@dataclass(frozen=True)
class EnsembleEstimate:
    """A weighted combination of samples together with its fit residual."""

    samples: tuple
    weights: np.ndarray
    estimate: np.ndarray
    residual: float


def _sample_shape(sample):
    if isinstance(sample, SampleVector):
        return (sample.dimension,)
    if isinstance(sample, SampleMatrix):
        return (sample.rows, sample.cols)
    return np.asarray(sample).shape


def sample_to_array(sample) -> np.ndarray:
    """Densify a sample (pass ndarrays through)."""
    if isinstance(sample, (SampleVector, SampleMatrix)):
        return sample.to_array()
    return np.asarray(sample, dtype=float)


def _check_homogeneous(samples) -> tuple:
    if len(samples) == 0:
        raise EmptySampleSetError("need at least one sample")
    shape = _sample_shape(samples[0])
    for s in samples[1:]:
        if _sample_shape(s) != shape:
            raise ShapeMismatchError(
                f"inconsistent sample shapes: {shape} vs {_sample_shape(s)}"
            )
    return shape


def uniform_weights(count: int) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be >= 1")
    return np.full(count, 1.0 / count)


def weighted_sum(samples: Sequence, weights) -> np.ndarray:
    """Convex (or affine) combination ``sum_i weights[i] * samples[i]``."""
    shape = _check_homogeneous(samples)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(samples),):
        raise ShapeMismatchError(
            f"{len(samples)} samples but {weights.shape} weights"
        )
    if all(isinstance(s, SampleVector) for s in samples):
        idx = np.fromiter((s.support_index for s in samples), np.int64, len(samples))
        val = np.fromiter((s.value for s in samples), float, len(samples))
        return np.bincount(idx, weights=weights * val, minlength=shape[0])
    if all(isinstance(s, SampleMatrix) for s in samples):
        nr, nc = shape
        out = np.zeros(nr * nc)
        cols = np.arange(nc) * nr
        for w, s in zip(weights, samples):
            live = s.support_rows >= 0
            np.add.at(out, s.support_rows[live] + cols[live], w * s.values[live])
        return out.reshape((nc, nr)).T
    out = np.zeros(shape)
    for w, s in zip(weights, samples):
        out += w * sample_to_array(s)
    return out


def project_simplex(y) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Sort-based algorithm: threshold at the largest prefix whose shifted
    average keeps all retained components positive.
    """
    y = np.asarray(y, dtype=float)
    if not np.isfinite(y).all():
        raise ValueError("point must be finite")
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, y.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


def slse_step(prev_estimate, new_sample, target):
    """Optimal two-term simplex blend of the running estimate and one sample.

    Minimizes ``||w1 * prev + w2 * sample - target||`` over ``w1 + w2 = 1``,
    ``w1, w2 >= 0``.  Returns ``(w1, w2, new_estimate)``; a degenerate
    direction (``prev == sample``) keeps the previous estimate.
    """
    prev = sample_to_array(prev_estimate)
    new = sample_to_array(new_sample)
    tgt = sample_to_array(target)
    if prev.shape != new.shape or prev.shape != tgt.shape:
        raise ShapeMismatchError(
            f"shapes differ: {prev.shape}, {new.shape}, {tgt.shape}"
        )
    d = prev - new
    dd = float((d * d).sum())
    if dd == 0.0:
        return 1.0, 0.0, prev
    w1 = float(((tgt - new) * d).sum()) / dd
    w1 = min(1.0, max(0.0, w1))
    return w1, 1.0 - w1, w1 * prev + (1.0 - w1) * new


def alse_vector_weights(target, samples: Sequence) -> np.ndarray:
    """Closed-form accumulated least-squares weights for vector targets.

    Requires singleton-support samples of magnitude ``gamma_vec(target)``.
    Sample ``j`` hitting component ``k`` receives weight
    ``|target_k| / (gamma * n_k)`` with ``n_k`` the number of samples
    hitting ``k``.  The squared fit residual is then exactly the squared
    mass of the components no sample hit.  When some components are unhit
    the weights sum to the hit mass over ``gamma`` (< 1): renormalizing
    onto the simplex would necessarily worsen the residual, so the
    sub-stochastic optimum is returned as-is.
    """
    target = np.asarray(target, dtype=float)
    if target.ndim != 1:
        raise ValueError("target must be a vector")
    if len(samples) == 0:
        raise EmptySampleSetError("need at least one sample")
    gamma = gamma_vec(target)
    if gamma == 0.0:
        raise ValueError("target must have positive absolute mass")
    idx = np.empty(len(samples), dtype=np.int64)
    for j, s in enumerate(samples):
        arr = sample_to_array(s)
        if arr.shape != target.shape:
            raise ShapeMismatchError(f"sample {j} has shape {arr.shape}")
        support = np.nonzero(arr)[0]
        if support.size != 1:
            raise ValueError(f"sample {j} does not have singleton support")
        k = int(support[0])
        if abs(abs(arr[k]) - gamma) > 1e-9 * max(gamma, 1.0):
            raise ValueError(f"sample {j} magnitude differs from target mass")
        if arr[k] * target[k] <= 0.0:
            raise ValueError(f"sample {j} sign disagrees with the target")
        idx[j] = k
    counts = np.bincount(idx, minlength=target.size)
    return np.abs(target[idx]) / (gamma * counts[idx])


def _stack_columns(samples: Sequence, shape):
    """Samples as columns of a (possibly sparse) matrix, flattened Fortran-style."""
    n_samples = len(samples)
    if len(shape) == 1 and all(isinstance(s, SampleVector) for s in samples):
        idx = np.fromiter((s.support_index for s in samples), np.int64, n_samples)
        val = np.fromiter((s.value for s in samples), float, n_samples)
        return sp.csr_matrix(
            (val, (idx, np.arange(n_samples))), shape=(shape[0], n_samples)
        )
    if len(shape) == 2 and all(isinstance(s, SampleMatrix) for s in samples):
        nr, nc = shape
        cols = np.arange(nc) * nr
        rows_list, data_list, col_list = [], [], []
        for j, s in enumerate(samples):
            live = s.support_rows >= 0
            rows_list.append(s.support_rows[live] + cols[live])
            data_list.append(s.values[live])
            col_list.append(np.full(int(live.sum()), j, dtype=np.int64))
        return sp.csr_matrix(
            (np.concatenate(data_list),
             (np.concatenate(rows_list), np.concatenate(col_list))),
            shape=(nr * nc, n_samples),
        )
    dense = np.stack([sample_to_array(s).ravel(order="F") for s in samples], axis=1)
    return dense


def _power_iteration_lmax(mat, mat_t, n: int) -> float:
    v = 1.0 + 1e-6 * np.arange(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(200):
        w = mat_t @ (mat @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam_new = float(v @ (mat_t @ (mat @ v)))
        if abs(lam_new - lam) <= 1e-8 * max(lam_new, 1.0):
            return lam_new
        lam = lam_new
    return lam


def _solve_simplex_lsq(mat, target_vec: np.ndarray, tol: float, max_iter: int):
    """Projected gradient for ``min ||mat w - target||^2`` over the simplex.

    Starts at uniform weights (so the best iterate never loses to uniform
    averaging) and steps by ``1/L`` with ``L`` the top Gram eigenvalue from
    power iteration.  Returns ``(weights, gap, converged)`` where ``gap``
    is the Frank-Wolfe optimality gap of the half-squared objective at the
    stopping point; ``gap <= tol`` certifies the objective is within
    ``tol`` of the constrained optimum.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    n_weights = mat.shape[1]
    if n_weights == 1:
        return np.ones(1), 0.0, True
    if sp.issparse(mat):
        mat = mat.tocsr()
        mat_t = mat.T.tocsr()
    else:
        mat_t = mat.T
    lam = _power_iteration_lmax(mat, mat_t, n_weights)
    if lam == 0.0:
        return uniform_weights(n_weights), 0.0, True
    step = 1.0 / (1.01 * lam)

    w = uniform_weights(n_weights)
    r = mat @ w - target_vec
    f = 0.5 * float(r @ r)
    best_w, best_f = w, f
    gap = np.inf
    for _ in range(max_iter):
        g = mat_t @ r
        gap = float(g @ w) - float(g.min())
        if gap <= tol:
            return (best_w if best_f < f else w), gap, True
        w = project_simplex(w - step * g)
        r = mat @ w - target_vec
        f = 0.5 * float(r @ r)
        if f < best_f:
            best_w, best_f = w, f
    return best_w, gap, False


def alse_general_weights(
    target, samples: Sequence, tol: float = 1e-10, max_iter: int = 10000
) -> np.ndarray:
    """Accumulated least-squares weights for arbitrary sample shapes.

    Solves ``min ||sum_i w_i * sample_i - target||^2`` over the simplex by
    projected gradient with step ``1/L`` (``L`` from power iteration on the
    sample Gram matrix), started at uniform weights.  Iteration stops once
    the Frank-Wolfe optimality gap of the half-squared objective drops to
    ``tol``, which certifies the objective is within ``tol`` of optimal.

    Raises
    ------
    NonConvergenceError
        If the gap is still above ``tol`` after ``max_iter`` iterations.
        The error carries the best iterate, which is never worse than the
        uniform weighting.
    """
    shape = _check_homogeneous(samples)
    n_samples = len(samples)
    if n_samples == 1:
        return np.ones(1)
    tgt = np.asarray(sample_to_array(target), dtype=float)
    if tgt.shape != shape:
        raise ShapeMismatchError(f"target shape {tgt.shape} vs samples {shape}")
    mat = _stack_columns(samples, shape)
    weights, gap, converged = _solve_simplex_lsq(
        mat, tgt.ravel(order="F"), tol=tol, max_iter=max_iter
    )
    if not converged:
        residual = float(np.linalg.norm(mat @ weights - tgt.ravel(order="F")))
        raise NonConvergenceError(
            f"optimality gap {gap:.3e} > tol {tol:.3e} after {max_iter} iterations",
            best_weights=weights,
            best_residual=residual,
            gap=gap,
        )
    return weights


def _slse_fold(target, samples: Sequence):
    """Fold samples through the streaming blend; returns (weights, estimate)."""
    tgt = sample_to_array(target)
    estimate = sample_to_array(samples[0])
    w1s = np.empty(len(samples) - 1)
    w2s = np.empty(len(samples) - 1)
    for i, s in enumerate(samples[1:]):
        w1, w2, estimate = slse_step(estimate, s, tgt)
        w1s[i], w2s[i] = w1, w2
    weights = np.empty(len(samples))
    if len(samples) == 1:
        weights[0] = 1.0
        return weights, estimate
    # weight of sample j is its blend share times all later shrink factors
    suffix = np.ones(len(samples))
    suffix[:-1] = np.cumprod(w1s[::-1])[::-1]
    weights[0] = suffix[0]
    weights[1:] = w2s * suffix[1:]
    return weights, estimate


def ensemble_estimate(
    target,
    samples: Sequence,
    method: str,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> EnsembleEstimate:
    """Estimate a target from its samples with one of the averaging methods.

    ``method`` is ``"uniform"``, ``"alse"`` (batch least squares; closed
    form for vector targets, simplex solver otherwise) or ``"slse"``
    (streaming blend in sample order).
    """
    _check_homogeneous(samples)
    tgt = sample_to_array(target)
    if method == "uniform":
        weights = uniform_weights(len(samples))
        estimate = weighted_sum(samples, weights)
    elif method == "alse":
        if tgt.ndim == 1 and all(isinstance(s, SampleVector) for s in samples):
            weights = alse_vector_weights(tgt, samples)
        else:
            weights = alse_general_weights(tgt, samples, tol=tol, max_iter=max_iter)
        estimate = weighted_sum(samples, weights)
    elif method == "slse":
        weights, estimate = _slse_fold(tgt, samples)
    else:
        raise ValueError(f"unknown method {method!r}")
    residual = float(np.linalg.norm((estimate - tgt).ravel()))
    return EnsembleEstimate(tuple(samples), weights, estimate, residual)
