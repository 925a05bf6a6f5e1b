"""Singleton-support sampling of vectors and matrices.

A vector ``w`` is turned into a probability mass function by normalizing
its absolute values with the mass ``gamma_vec(w)``.  Each draw picks one
component ``j`` with probability ``|w_j| / gamma`` and returns the sparse
vector with ``sign(w_j) * gamma`` at ``j`` and zeros elsewhere, so draws
are unbiased for ``w`` component-wise and preserve its support.  Matrices
are sampled column by column with per-column masses, which keeps zero
columns exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import RngStream


class ZeroMassError(ValueError):
    """The target has zero absolute mass and admits no sample distribution."""


@dataclass(frozen=True)
class DltiSystem:
    """Ground-truth discrete-time LTI pair ``x(k+1) = A x(k) + B u(k)``."""

    a_matrix: np.ndarray
    b_matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a_matrix, dtype=float)
        b = np.asarray(self.b_matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"state map must be square, got shape {a.shape}")
        if b.ndim != 2 or b.shape[0] != a.shape[0]:
            raise ValueError(
                f"input map must have {a.shape[0]} rows, got shape {b.shape}"
            )
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("system matrices must be finite")
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "b_matrix", b)

    @property
    def n(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def m(self) -> int:
        return self.b_matrix.shape[1]

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.a_matrix @ x + self.b_matrix @ u

    def simulate(self, x0: np.ndarray, controls) -> list[np.ndarray]:
        """States ``x(0..K)`` under the true dynamics for the given controls."""
        states = [np.asarray(x0, dtype=float)]
        for u in controls:
            states.append(self.step(states[-1], np.asarray(u, dtype=float)))
        return states


@dataclass(frozen=True)
class SampleVector:
    """One singleton-support draw: ``value`` at ``support_index``, zeros elsewhere.

    ``abs(value)`` equals the mass of the source vector at draw time.
    """

    dimension: int
    support_index: int
    value: float

    @property
    def gamma(self) -> float:
        return abs(self.value)

    def to_array(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[self.support_index] = self.value
        return out


@dataclass(frozen=True)
class SampleMatrix:
    """One draw of a matrix, sampled independently per column.

    ``support_rows[j]`` is the selected row of column ``j`` (-1 for a zero
    source column) and ``values[j]`` its signed magnitude, equal to the
    column mass ``column_gammas[j]`` up to sign.
    """

    rows: int
    cols: int
    support_rows: np.ndarray
    values: np.ndarray
    column_gammas: np.ndarray

    def to_array(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols))
        live = self.support_rows >= 0
        out[self.support_rows[live], np.nonzero(live)[0]] = self.values[live]
        return out


def gamma_vec(w) -> float:
    """Absolute mass of a vector: the sum of component magnitudes."""
    w = np.asarray(w, dtype=float)
    if not np.isfinite(w).all():
        raise ValueError("vector must be finite")
    return float(np.abs(w).sum())


def gamma_mat(m) -> float:
    """Largest column absolute-sum of a matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ValueError("matrix must be finite")
    return float(np.abs(m).sum(axis=0).max())


@dataclass(frozen=True)
class _VectorPlan:
    """Precomputed inverse-CDF tables for sampling one vector."""

    gamma: float
    signs: np.ndarray
    cum: np.ndarray
    remap: np.ndarray  # boundary ties land on the lower positive-mass index


def _make_vector_plan(w: np.ndarray) -> _VectorPlan:
    gamma = float(np.abs(w).sum())
    if gamma == 0.0:
        return _VectorPlan(0.0, np.sign(w), np.ones_like(w), np.zeros(w.size, int))
    mass = np.abs(w) / gamma
    cum = np.cumsum(mass)
    cum[-1] = 1.0
    # skip forward past zero-mass components when a uniform hits a boundary
    remap = np.arange(w.size)
    positive = mass > 0.0
    last = int(np.nonzero(positive)[0][-1])
    nxt = last
    for j in range(w.size - 1, -1, -1):
        if positive[j]:
            nxt = j
        remap[j] = nxt
    return _VectorPlan(gamma, np.sign(w), cum, remap)


def _draw_vector_indices(
    plan: _VectorPlan, rng: RngStream, count: int, start: int = 0
) -> np.ndarray:
    u = rng.uniform_grid(count, 1, start=start)[:, 0]
    idx = np.searchsorted(plan.cum, u, side="left")
    return plan.remap[idx]


def _draw_vector_batch(w, count: int, rng: RngStream, start: int = 0):
    """Vectorized draws of a vector target, as (indices, signed values)."""
    w = np.asarray(w, dtype=float)
    plan = _make_vector_plan(w)
    if plan.gamma == 0.0:
        raise ZeroMassError("cannot sample a vector with zero absolute mass")
    idx = _draw_vector_indices(plan, rng, count, start=start)
    return idx, plan.signs[idx] * plan.gamma


def _draw_matrix_batch(m, count: int, rng: RngStream, start: int = 0):
    """Vectorized matrix draws, as per-column (rows, values, gammas) arrays."""
    m = np.asarray(m, dtype=float)
    nrows, ncols = m.shape
    plans = [_make_vector_plan(m[:, j]) for j in range(ncols)]
    gammas = np.array([p.gamma for p in plans])
    u = rng.uniform_grid(count, ncols, start=start)
    rows = np.full((count, ncols), -1, dtype=np.int64)
    vals = np.zeros((count, ncols))
    for j, plan in enumerate(plans):
        if plan.gamma == 0.0:
            continue
        idx = plan.remap[np.searchsorted(plan.cum, u[:, j], side="left")]
        rows[:, j] = idx
        vals[:, j] = plan.signs[idx] * plan.gamma
    return rows, vals, gammas


def sample_vector(w, rng: RngStream, draw_index: int = 0) -> SampleVector:
    """Draw one singleton-support sample of the vector ``w``.

    Component ``j`` is selected with probability ``|w_j| / gamma_vec(w)``;
    the sample carries ``+gamma`` where ``w_j > 0`` and ``-gamma`` where
    ``w_j < 0``, so the expectation over the sample space is exactly ``w``.

    Raises
    ------
    ZeroMassError
        If ``gamma_vec(w) == 0``.
    """
    w = np.asarray(w, dtype=float)
    if not np.isfinite(w).all():
        raise ValueError("vector must be finite")
    idx, val = _draw_vector_batch(w, 1, rng, start=draw_index)
    return SampleVector(w.size, int(idx[0]), float(val[0]))


def sample_matrix(m, rng: RngStream, draw_index: int = 0) -> SampleMatrix:
    """Draw one sample of the matrix ``m``, each nonzero column independently.

    Columns are treated as vector targets with their own column mass, so
    the per-column expectation equals the source column and zero columns
    stay exactly zero.
    """
    m = np.asarray(m, dtype=float)
    if not np.isfinite(m).all():
        raise ValueError("matrix must be finite")
    rows, vals, gammas = _draw_matrix_batch(m, 1, rng, start=draw_index)
    return SampleMatrix(m.shape[0], m.shape[1], rows[0].copy(), vals[0].copy(), gammas)


def draw_ensemble(target, count: int, rng: RngStream, start: int = 0) -> list:
    """Draw ``count`` independent samples of a vector or matrix target.

    Draw ``i`` uses a substream hashed from ``(stream, start + i)``, so the
    result is identical whether the draws are produced in one call, in
    chunks, or in parallel.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    target = np.asarray(target, dtype=float)
    if not np.isfinite(target).all():
        raise ValueError("target must be finite")
    if target.ndim == 1:
        idx, vals = _draw_vector_batch(target, count, rng, start=start)
        dim = target.size
        return [SampleVector(dim, int(i), float(v)) for i, v in zip(idx, vals)]
    if target.ndim == 2:
        rows, vals, gammas = _draw_matrix_batch(target, count, rng, start=start)
        nr, nc = target.shape
        return [
            SampleMatrix(nr, nc, rows[d].copy(), vals[d].copy(), gammas)
            for d in range(count)
        ]
    raise ValueError(f"target must be a vector or matrix, got ndim={target.ndim}")
