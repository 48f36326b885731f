"""POD truncation against hand-built spectra and the tail-energy bound."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iodmd.pod import pod_basis, pod_sweep


def matrix_with_spectrum(singular_values, shape=(6, 5), seed=0):
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((shape[0], shape[0])))
    v, _ = np.linalg.qr(rng.standard_normal((shape[1], shape[1])))
    k = len(singular_values)
    return u[:, :k] * np.asarray(singular_values, dtype=float) @ v[:, :k].T


def test_absolute_budget_cuts_at_hand_computed_tails():
    # spectrum 3, 2, 1: tails are sqrt(14), sqrt(5), 1, 0
    x = matrix_with_spectrum([3.0, 2.0, 1.0])
    assert pod_basis(x, 2.3, mode="absolute").order == 1  # sqrt(5) = 2.236 fits
    assert pod_basis(x, 2.2, mode="absolute").order == 2
    assert pod_basis(x, 1.0, mode="absolute").order == 2  # tail exactly at budget
    assert pod_basis(x, 0.5, mode="absolute").order == 3


def test_relative_budget_scales_by_frobenius_norm():
    x = matrix_with_spectrum([3.0, 2.0, 1.0])
    norm = np.sqrt(14.0)
    basis = pod_basis(x, 2.3 / norm, mode="relative")
    assert basis.order == 1
    assert pod_basis(x, 0.5 / norm).order == 3  # relative is the default mode


def test_per_snapshot_budget_multiplies_by_sample_count():
    x = matrix_with_spectrum([3.0, 2.0, 1.0])  # 5 snapshots
    # threshold becomes 1.05 * sqrt(5) = 2.35 > sqrt(5) tail
    basis = pod_basis(x, 1.05, mode="absolute", per_snapshot=True)
    assert basis.order == 1


def test_basis_bookkeeping_fields():
    x = matrix_with_spectrum([3.0, 2.0, 1.0])
    basis = pod_basis(x, 2.2, mode="absolute")
    assert np.allclose(basis.retained_singular_values, [3.0, 2.0])
    assert basis.discarded_energy == pytest.approx(1.0, rel=1e-10)
    assert basis.requested_error == 2.2
    assert np.allclose(basis.modes.T @ basis.modes, np.eye(2), atol=1e-12)


def test_huge_budget_still_keeps_one_mode():
    x = matrix_with_spectrum([3.0, 2.0, 1.0])
    assert pod_basis(x, 1e9, mode="absolute").order == 1


def test_sweep_shares_one_decomposition():
    x = matrix_with_spectrum([5.0, 1.0, 0.1])
    bases = pod_sweep(x, [3.0, 0.5, 0.05], mode="absolute")
    assert [b.order for b in bases] == [1, 2, 3]
    # coarser basis is a prefix of the finer one
    assert np.allclose(bases[0].modes, bases[2].modes[:, :1])


def test_pod_rejects_degenerate_inputs():
    x = matrix_with_spectrum([3.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        pod_basis(np.zeros((3, 3)), 0.1)
    with pytest.raises(ValueError):
        pod_basis(x, -0.1)
    with pytest.raises(ValueError):
        pod_sweep(x, [0.1], mode="fraction")


def test_projection_error_meets_tail_bound():
    x = matrix_with_spectrum([4.0, 2.0, 0.3, 0.01], shape=(8, 6), seed=3)
    for budget in (1e-1, 1e-2, 1e-3):
        basis = pod_basis(x, budget, mode="relative")
        q = basis.modes
        err = np.linalg.norm(x - q @ (q.T @ x))
        assert err <= basis.discarded_energy + 1e-10 * np.linalg.norm(x)


@given(st.integers(0, 10_000), st.sampled_from([1e-1, 1e-2, 1e-4, 1e-6]))
@settings(max_examples=40, deadline=None)
def test_minimality_property(seed, budget):
    x = np.random.default_rng(seed).standard_normal((7, 6))
    basis = pod_basis(x, budget, mode="relative")
    s = np.linalg.svd(x, compute_uv=False)
    tails = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]  # tails[k] drops modes k..end
    threshold = budget * np.linalg.norm(x)
    n = basis.order
    if n < len(s):
        assert tails[n] <= threshold
    if n > 1:
        # one fewer mode must violate the budget
        assert tails[n - 1] > threshold
