"""Reachability tests for simplex-constrained and sampled systems.

A column-stochastic system confined to the probability simplex is
reachable between arbitrary simplex points exactly when its input map has
zero column sums and the controllability matrix, projected off the
all-ones direction, has rank ``n - 1``.  A dense multi-step solve serves
as the brute-force counterpart, and a Monte Carlo harness measures how
often sampled-system runs end far from the target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .ensemble import _draw_matrix_batch, _draw_vector_batch
from .rng import RngStream


class NotColumnStochasticError(ValueError):
    """The state map's columns do not each sum to one within tolerance."""


@dataclass(frozen=True)
class ReachabilityReport:
    """Outcome of the simplex-constrained reachability test."""

    ones_orthogonality: bool
    projected_rank: int
    required_rank: int
    verdict: bool
    singular_values: tuple

    def to_text(self) -> str:
        lines = [
            f"ones_orthogonality={str(self.ones_orthogonality).lower()}",
            f"projected_rank={self.projected_rank}",
            f"required_rank={self.required_rank}",
            f"verdict={str(self.verdict).lower()}",
            "singular_values="
            + ",".join(f"{s:.17g}" for s in self.singular_values),
        ]
        return "\n".join(lines) + "\n"


class ReachResult(NamedTuple):
    reachable: bool
    controls: np.ndarray
    residual: float


def controllability_matrix(a, b) -> np.ndarray:
    """Horizontal stack of ``A^k B`` for ``k = 0 .. n-1``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or b.shape[0] != a.shape[0]:
        raise ValueError("inconsistent shapes for controllability matrix")
    blocks = [b]
    for _ in range(a.shape[0] - 1):
        blocks.append(a @ blocks[-1])
    return np.hstack(blocks)


def project_ones_complement(m) -> np.ndarray:
    """Project the columns of ``m`` onto the orthogonal complement of ones."""
    m = np.asarray(m, dtype=float)
    return m - np.outer(np.ones(m.shape[0]), m.sum(axis=0) / m.shape[0])


def simplex_reachability_check(a, b, tol: float = 1e-9) -> ReachabilityReport:
    """Test reachability between simplex points for a column-stochastic map.

    The verdict is true exactly when every column of ``b`` sums to zero
    within ``tol`` and the projected controllability matrix has numerical
    rank ``n - 1`` (singular values above ``tol * sigma_max`` counted).

    Raises
    ------
    NotColumnStochasticError
        If some column of ``a`` does not sum to one within ``tol``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    col_defect = np.abs(a.sum(axis=0) - 1.0).max()
    if col_defect > tol:
        raise NotColumnStochasticError(
            f"column sums of the state map deviate from one by {col_defect:.3e}"
        )
    n = a.shape[0]
    ones_orth = bool(np.abs(b.sum(axis=0)).max() <= tol)
    projected = project_ones_complement(controllability_matrix(a, b))
    svals = np.linalg.svd(projected, compute_uv=False)
    smax = float(svals[0]) if svals.size else 0.0
    rank = int((svals > tol * smax).sum()) if smax > 0 else 0
    verdict = ones_orth and rank == n - 1
    return ReachabilityReport(
        ones_orthogonality=ones_orth,
        projected_rank=rank,
        required_rank=n - 1,
        verdict=verdict,
        singular_values=tuple(float(s) for s in svals),
    )


def reachable_in_k(a, b, x0, xf, k: int, tol: float = 1e-9) -> ReachResult:
    """Can ``xf`` be reached from ``x0`` in exactly ``k`` steps?

    Solves the stacked k-step equation for the minimum-norm control
    sequence and verifies it by forward simulation; the verdict compares
    the simulated endpoint defect against ``tol * (1 + ||xf||)``.
    Returns the controls as a ``(k, m)`` array.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)
    n, m = b.shape
    # columns ordered so the stacked controls read [u(0); ...; u(k-1)]
    blocks = [b]
    for _ in range(k - 1):
        blocks.append(a @ blocks[-1])
    grammian = np.hstack(blocks[::-1])
    rhs = xf - np.linalg.matrix_power(a, k) @ x0
    stacked, *_ = np.linalg.lstsq(grammian, rhs, rcond=None)
    controls = stacked.reshape(k, m)

    x = x0
    for u in controls:
        x = a @ x + b @ u
    residual = float(np.linalg.norm(x - xf))
    return ReachResult(
        reachable=residual <= tol * (1.0 + float(np.linalg.norm(xf))),
        controls=controls,
        residual=residual,
    )


def empirical_approx_reachability(
    x0,
    a,
    b,
    controls,
    xf,
    epsilon: float,
    prefix_sizes,
    trials: int,
    rng: RngStream,
):
    """Deviation frequency of averaged sampled-system endpoints.

    Simulates runs of the sampled system (fresh state-map and input-map
    draws at every step, sampled initial states, the given fixed controls)
    and averages the endpoints over growing run prefixes.  For each prefix
    size, returns the fraction of independent trials whose averaged
    endpoint lies farther than ``epsilon`` from ``xf``.
    """
    x0 = np.asarray(x0, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    xf = np.asarray(xf, dtype=float)
    controls = [np.asarray(u, dtype=float) for u in controls]
    prefix_sizes = sorted(int(p) for p in prefix_sizes)
    if not prefix_sizes or prefix_sizes[0] < 1:
        raise ValueError("prefix sizes must be positive")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = a.shape[0]
    runs = prefix_sizes[-1]

    exceed = np.zeros(len(prefix_sizes), dtype=np.int64)
    for t in range(trials):
        trial_rng = rng.child("trial", t)
        idx0, val0 = _draw_vector_batch(x0, runs, trial_rng.child("x0"))
        states = np.zeros((runs, n))
        states[np.arange(runs), idx0] = val0
        for step, u in enumerate(controls):
            step_rng = trial_rng.child("step", step)
            rows_a, vals_a, _ = _draw_matrix_batch(a, runs, step_rng.child("a"))
            rows_b, vals_b, _ = _draw_matrix_batch(b, runs, step_rng.child("b"))
            a_hats = np.zeros((runs, n, n))
            a_hats[np.arange(runs)[:, None], rows_a, np.arange(n)[None, :]] = vals_a
            bu = np.zeros((runs, n))
            live = rows_b >= 0
            contrib = vals_b * u[None, :]
            np.add.at(
                bu,
                (np.nonzero(live)[0], rows_b[live]),
                contrib[live],
            )
            states = np.einsum("rij,rj->ri", a_hats, states) + bu
        prefix_means = np.cumsum(states, axis=0) / np.arange(1, runs + 1)[:, None]
        deviations = np.linalg.norm(prefix_means - xf[None, :], axis=1)
        for i, p in enumerate(prefix_sizes):
            if deviations[p - 1] > epsilon:
                exceed[i] += 1
    return [(p, exceed[i] / trials) for i, p in enumerate(prefix_sizes)]
