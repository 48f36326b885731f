"""Truncated POD bases with a prescribed projection-error budget.

The basis is cut at the smallest mode count whose discarded tail energy
``sqrt(sum_{i>n} s_i^2)`` stays within the budget; by the Schmidt-Eckart-
Young bound that tail also bounds the Frobenius projection error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import machine_rank, truncated_svd

__all__ = ["PodBasis", "pod_basis", "pod_sweep"]


@dataclass
class PodBasis:
    """Orthonormal projection columns plus the spectrum bookkeeping."""

    modes: np.ndarray
    retained_singular_values: np.ndarray
    discarded_energy: float
    requested_error: float

    @property
    def order(self) -> int:
        return self.modes.shape[1]


def _tail_energies(s: np.ndarray, dim_max: int) -> np.ndarray:
    """tail[k] = sqrt(sum of s[k:]**2), with machine-noise values zeroed."""
    s = s.copy()
    s[machine_rank(s, dim_max) :] = 0.0
    return np.sqrt(np.cumsum(s[::-1] ** 2)[::-1])


def pod_basis(
    x,
    error_budget: float,
    mode: str = "relative",
    per_snapshot: bool = False,
) -> PodBasis:
    """Smallest POD basis of the snapshot matrix ``x`` meeting the budget.

    ``mode='relative'`` scales the budget by the Frobenius norm of ``x``,
    ``mode='absolute'`` uses it as-is. ``per_snapshot`` additionally divides
    the tail energy by sqrt(#snapshots), reading the budget as a mean
    per-snapshot error. At least one mode is always retained.
    """
    return pod_sweep(x, [error_budget], mode=mode, per_snapshot=per_snapshot)[0]


def pod_sweep(
    x,
    error_budgets,
    mode: str = "relative",
    per_snapshot: bool = False,
) -> list[PodBasis]:
    """Bases for several budgets from a single SVD of the snapshot matrix."""
    if mode not in ("relative", "absolute"):
        raise ValueError(f"unknown mode {mode!r}")
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    if norm == 0.0:
        raise ValueError("cannot build a POD basis from a zero snapshot matrix")

    svd = truncated_svd(x, eps=0.0)
    s = svd.singular_values
    tails = _tail_energies(s, max(x.shape))

    out = []
    for budget in error_budgets:
        if budget < 0:
            raise ValueError("error budget must be nonnegative")
        threshold = budget * norm if mode == "relative" else float(budget)
        if per_snapshot:
            threshold *= np.sqrt(x.shape[1])
        # tails[n] is the energy discarded when keeping n modes
        n = int(np.argmax(tails <= threshold)) if tails[-1] <= threshold else s.size
        n = max(n, 1)
        out.append(
            PodBasis(
                modes=svd.left_vectors[:, :n],
                retained_singular_values=s[:n],
                discarded_energy=float(tails[n]) if n < tails.size else 0.0,
                requested_error=float(budget),
            )
        )
    return out
