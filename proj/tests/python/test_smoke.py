# SPDX-License-Identifier: MIT
"""Smoke tests of the python bindings against numpy references."""

import math

import numpy as np
import pytest

import ctrc


def random_cores(rng, dims, ranks):
    bonds = list(ranks) + [ranks[0]]
    return [rng.standard_normal((bonds[d], dims[d], bonds[d + 1])) for d in range(len(dims))]


def einsum_contract(cores):
    # trace of the product of core slices, mode by mode
    out = np.einsum("aib->iab", cores[0])
    for core in cores[1:]:
        out = np.einsum("...ab,bjc->...jac", out, core)
    return np.einsum("...aa->...", out)


def test_contract_matches_einsum():
    rng = np.random.default_rng(0)
    cores = random_cores(rng, [3, 4, 5], [2, 3, 2])
    got = ctrc.contract(cores)
    want = einsum_contract(cores)
    assert got.shape == (3, 4, 5)
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_fnorm_and_rmse():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((4, 5))
    assert math.isclose(ctrc.fnorm(x), np.linalg.norm(x), rel_tol=1e-12)
    y = rng.standard_normal((4, 5))
    want = np.linalg.norm(x - y) / math.sqrt(x.size)
    assert math.isclose(ctrc.rmse(x, y), want, rel_tol=1e-12)
    assert math.isclose(
        ctrc.coupled_fnorm(x, y),
        math.hypot(np.linalg.norm(x), np.linalg.norm(y)),
        rel_tol=1e-12,
    )


def test_subchain_identity():
    rng = np.random.default_rng(2)
    cores = random_cores(rng, [3, 4, 5], [2, 3, 2])
    full = ctrc.contract(cores)
    for d in range(3):
        B = ctrc.subchain(cores, d)
        r1, _, r2 = cores[d].shape
        A = np.transpose(cores[d], (1, 0, 2)).reshape(cores[d].shape[1], r1 * r2)
        # columns of the mode-d unfolding: remaining modes, d+1 first
        perm = list(range(d, 3)) + list(range(0, d))
        unfolded = np.transpose(full, perm).reshape(full.shape[d], -1, order="F")
        np.testing.assert_allclose(A @ B, unfolded, rtol=1e-12, atol=1e-12)


def test_tr_svd_roundtrip():
    rng = np.random.default_rng(3)
    cores = random_cores(rng, [4, 4, 4], [2, 2, 2])
    tensor = ctrc.contract(cores)
    out, rel_error, clipped = ctrc.tr_svd(tensor, rank=[2, 2, 2])
    assert not clipped
    assert rel_error < 1e-10
    np.testing.assert_allclose(ctrc.contract(out), tensor, rtol=1e-8, atol=1e-8)


def test_generate_and_coupled_solve_recovers():
    shapes = [[8, 8, 8], [8, 8, 8]]
    observed, masks, truths = ctrc.generate(
        shapes, rank=2, coupled_modes=2, sampling_rates=[0.5, 0.5], seed=1
    )
    assert masks[0].sum() == round(0.5 * 8**3)
    factors, recons, report = ctrc.solve_coupled(
        observed,
        masks,
        ranks=[[2], [2]],
        coupled_modes=2,
        ground_truth=truths,
        max_iters=200,
        tol=1e-10,
        seed=8,
    )
    assert report["iterations"] <= 200
    assert ctrc.rmse(recons[0], truths[0]) < 1e-6
    assert ctrc.rmse(recons[1], truths[1]) < 1e-6
    # shared leading cores agree across the two rings
    np.testing.assert_array_equal(factors[0][0], factors[1][0])
    # objective trace is non-increasing
    obj = report["objective"]
    assert np.all(np.diff(obj) <= 1e-10 * obj[:-1])


def test_tr_als_objective_decreases():
    rng = np.random.default_rng(4)
    cores = random_cores(rng, [6, 6, 6], [2, 2, 2])
    tensor = einsum_contract(cores)
    mask = rng.random(tensor.shape) < 0.7
    out_cores, report = ctrc.tr_als(tensor, mask, rank=[2], max_iters=40, seed=3)
    obj = report["objective"]
    assert obj[-1] <= obj[0]
    assert len(out_cores) == 3


def test_bound_functions():
    df1, df2 = ctrc.df_star(5.0, 40.0, 0.0)
    assert math.isclose(df1, 34.18181818181818, rel_tol=1e-12)
    assert math.isclose(df2, 24.5, rel_tol=1e-12)

    value, converged, _ = ctrc.pfq([], [], 1.0)
    assert converged and math.isclose(value, math.e, rel_tol=1e-10)
    value, converged, _ = ctrc.pfq([0.5], [], 0.25)
    assert converged and math.isclose(value, (1 - 0.25) ** -0.5, rel_tol=1e-10)

    assert math.isclose(ctrc.beta_ratio_power(1.0, 1.0, 1), math.pi / 2, rel_tol=1e-12)

    params = dict(a=3.2, b=1.0, k=4, D1=3, D2=3, L=2, T1=4000, T2=500, S1=4000, S2=500)
    res = ctrc.coupled_bound(params)
    assert res["series_converged"]
    assert res["value"] > 0
    assert ctrc.individual_bound(params, 1) > 0
    assert ctrc.supremum_bound(params) > 0


def test_invalid_arguments_raise():
    with pytest.raises(ValueError):
        ctrc.tr_svd(np.zeros((2, 2)))
    with pytest.raises(Exception):
        ctrc.df_star(4.0, 10.0, 4.5)  # denominator root
