import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hssloewner.data import FrequencyDataset
from hssloewner.dense import build_dense
from hssloewner.partition import (
    PartitionedData,
    PartitionError,
    PartitionKind,
    change_of_basis,
    partition,
    realify,
)

from conftest import random_dataset


def test_odd_even_pattern():
    d = random_dataset(4, seed=1)
    w = d.omega
    pd = partition(d, PartitionKind.ODD_EVEN)
    np.testing.assert_array_equal(pd.lam, [1j * w[0], -1j * w[0], 1j * w[2], -1j * w[2]])
    np.testing.assert_array_equal(pd.mu, [1j * w[1], -1j * w[1], 1j * w[3], -1j * w[3]])
    assert np.all(pd.R == 1) and np.all(pd.L == 1)


def test_half_half_pattern():
    d = random_dataset(4, seed=2)
    w = d.omega
    pd = partition(d, "half-half")
    np.testing.assert_array_equal(pd.lam, [1j * w[0], -1j * w[0], 1j * w[1], -1j * w[1]])
    np.testing.assert_array_equal(pd.mu, [1j * w[2], -1j * w[2], 1j * w[3], -1j * w[3]])


def test_directions_cycle():
    d = random_dataset(8, p=2, seed=3)
    pd = partition(d, "odd-even")
    right = np.arange(0, 8, 2)
    for k, j in enumerate(right):
        e = np.eye(2)[:, k % 2]
        np.testing.assert_array_equal(pd.R[:, 2 * k], e)
        np.testing.assert_allclose(pd.W[:, 2 * k], d.H[j] @ e)
        np.testing.assert_allclose(pd.W[:, 2 * k + 1], (d.H[j] @ e).conj())
    left = np.arange(1, 8, 2)
    for h, j in enumerate(left):
        e = np.eye(2)[h % 2]
        np.testing.assert_array_equal(pd.L[2 * h], e)
        np.testing.assert_allclose(pd.V[2 * h], e @ d.H[j])


def test_rectangular_p_q():
    d = random_dataset(6, p=2, q=3, seed=4)
    pd = partition(d, "odd-even")
    assert pd.R.shape == (3, 6) and pd.W.shape == (2, 6)
    assert pd.L.shape == (6, 2) and pd.V.shape == (6, 3)


def test_realify_single_pair():
    # Pi^* (h, conj h) = sqrt(2) (a, -b) for h = a + ib
    a, b = 0.7, -1.3
    d = FrequencyDataset([1.0, 2.0], np.array([1.0 + 0.5j, a + 1j * b]))
    pd = partition(d, "odd-even-real")
    np.testing.assert_allclose(pd.V[:, 0], np.sqrt(2) * np.array([a, -b]), rtol=1e-15)
    assert pd.V.dtype == np.float64


def test_realify_squared_points():
    d = random_dataset(4, seed=5)
    w = d.omega
    pd = partition(d, "odd-even-real")
    np.testing.assert_allclose(pd.lam, -np.array([w[0], w[0], w[2], w[2]]) ** 2, rtol=1e-14)
    np.testing.assert_allclose(pd.mu, -np.array([w[1], w[1], w[3], w[3]]) ** 2, rtol=1e-14)
    sq = pd.lam_matrix() @ pd.lam_matrix()
    np.testing.assert_allclose(sq, np.diag(pd.lam), atol=1e-12 * np.abs(pd.lam).max())


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


@pytest.mark.parametrize("p", [1, 2])
def test_real_sylvester_dense(p):
    d = random_dataset(8, p=p, seed=6)
    pdc = partition(d, "odd-even")
    pdr = realify(pdc)
    P_r = change_of_basis(pdc.shape[1])
    P_l = change_of_basis(pdc.shape[0])
    dc = build_dense(pdc)
    LLr = P_l.conj().T @ dc.LL @ P_r
    SSr = P_l.conj().T @ dc.SS @ P_r
    Mr, Lr = pdr.mu_matrix(), pdr.lam_matrix()
    Vr, Rr, Lr_, Wr = pdr.V, pdr.R, pdr.L, pdr.W
    K = Vr @ Rr - Lr_ @ Wr
    lhs = Mr @ Mr @ LLr - LLr @ Lr @ Lr
    assert _rel(lhs, Mr @ K + K @ Lr) < 1e-10
    assert _rel(lhs, pdr.rhs_L[0] @ pdr.rhs_L[1]) < 1e-10
    KS = Mr @ Vr @ Rr - Lr_ @ Wr @ Lr
    lhsS = Mr @ Mr @ SSr - SSr @ Lr @ Lr
    assert _rel(lhsS, Mr @ KS + KS @ Lr) < 1e-10
    assert _rel(lhsS, pdr.rhs_S[0] @ pdr.rhs_S[1]) < 1e-10


def test_unitary_change_of_basis():
    P = change_of_basis(10)
    np.testing.assert_allclose(P.conj().T @ P, np.eye(10), atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(half=st.integers(1, 16), p=st.integers(1, 3), seed=st.integers(0, 10**6))
def test_real_dense_equivalence(half, p, seed):
    d = random_dataset(2 * half, p=p, seed=seed)
    pdc = partition(d, "odd-even")
    pdr = realify(pdc)
    dc = build_dense(pdc)
    dr = build_dense(pdr)
    Pl, Pr = change_of_basis(pdc.shape[0]), change_of_basis(pdc.shape[1])
    assert _rel(dr.LL, Pl.conj().T @ dc.LL @ Pr) < 1e-10
    assert _rel(dr.SS, Pl.conj().T @ dc.SS @ Pr) < 1e-10


@pytest.mark.parametrize("N", [2, 5, 8])
def test_realness(N):
    pd = partition(random_dataset(N, p=2, seed=N), "odd-even-real")
    for a in (pd.R, pd.W, pd.L, pd.V, pd.lam, pd.mu, *pd.rhs_L, *pd.rhs_S, pd.lam_blocks, pd.mu_blocks):
        assert a.dtype == np.float64


@pytest.mark.parametrize("kind", list(PartitionKind))
@pytest.mark.parametrize("N", [2, 3, 7, 10])
def test_disjoint_and_shapes(kind, N):
    pd = partition(random_dataset(N, seed=N), kind)
    assert np.min(np.abs(pd.mu[:, None] - pd.lam[None, :])) > 0
    if kind is PartitionKind.HALF_HALF:
        assert pd.shape == (2 * (N - N // 2), 2 * (N // 2))
    else:
        assert pd.shape == (2 * (N // 2), 2 * ((N + 1) // 2))


def test_realify_needs_pairs():
    pd = partition(random_dataset(4, seed=0), "odd-even")
    bad = PartitionedData(
        lam=pd.lam[::-1].copy() * np.array([1, 1j, 1, 1]),
        mu=pd.mu, R=pd.R, W=pd.W, L=pd.L, V=pd.V, flavor="complex",
        rhs_L=pd.rhs_L, rhs_S=pd.rhs_S, right_freqs=pd.right_freqs, left_freqs=pd.left_freqs,
    )
    with pytest.raises(PartitionError):
        realify(bad)
    with pytest.raises(PartitionError):
        realify(realify(pd))


@pytest.mark.parametrize("alias, kind", [("HalfHalf", "half-half"), ("odd_even", "odd-even"), ("OddEvenReal", "odd-even-real")])
def test_kind_parse(alias, kind):
    assert PartitionKind.parse(alias).value == kind
    with pytest.raises(ValueError):
        PartitionKind.parse("random")
