import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hssloewner.data import (
    DatasetError,
    FrequencyDataset,
    SyntheticSystem,
    generate_synthetic,
    load_dataset,
    load_system,
    sample_system,
    save_dataset,
    save_system,
)

from conftest import random_dataset


def _write(tmp_path, text):
    p = tmp_path / "d.csv"
    p.write_text(text)
    return p


def test_load_two_rows(tmp_path):
    p = _write(tmp_path, "# p=1 q=1\nfreq_hz,re_1_1,im_1_1\n1.0,2,0\n2.0,3,1\n")
    d = load_dataset(p)
    assert d.N == 2 and (d.p, d.q) == (1, 1)
    assert d.H[:, 0, 0].tolist() == [2 + 0j, 3 + 1j]


def test_load_sorts(tmp_path):
    p = _write(tmp_path, "# p=1 q=1\nfreq_hz,re_1_1,im_1_1\n2.0,3,1\n1.0,2,0\n")
    d = load_dataset(p)
    assert d.freqs.tolist() == [1.0, 2.0]
    assert d.H[0, 0, 0] == 2


def test_load_duplicate(tmp_path):
    p = _write(tmp_path, "# p=1 q=1\nfreq_hz,re_1_1,im_1_1\n1.0,2,0\n1.0,3,1\n")
    with pytest.raises(DatasetError, match="duplicate"):
        load_dataset(p)


@pytest.mark.parametrize(
    "body, msg",
    [
        ("1.0,2,0\n2.0,x,1\n", "malformed"),
        ("1.0,2,0\n2.0,3\n", "expected 3 columns"),
        ("-1.0,2,0\n2.0,3,1\n", "nonpositive"),
    ],
)
def test_load_errors(tmp_path, body, msg):
    p = _write(tmp_path, "# p=1 q=1\nfreq_hz,re_1_1,im_1_1\n" + body)
    with pytest.raises(DatasetError, match=msg):
        load_dataset(p)


def test_load_missing_meta(tmp_path):
    p = _write(tmp_path, "freq_hz,re_1_1,im_1_1\n1.0,2,0\n2.0,3,1\n")
    with pytest.raises(DatasetError, match="metadata"):
        load_dataset(p)


@settings(max_examples=25, deadline=None)
@given(N=st.integers(2, 30), p=st.integers(1, 3), q=st.integers(1, 3), seed=st.integers(0, 10**6))
def test_roundtrip_bit_identical(tmp_path_factory, N, p, q, seed):
    d = random_dataset(N, p, q, seed=seed)
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    save_dataset(d, path)
    e = load_dataset(path)
    assert np.array_equal(d.freqs, e.freqs)
    assert np.array_equal(d.H.real, e.H.real) and np.array_equal(d.H.imag, e.H.imag)


def test_empty_dataset_rejected():
    with pytest.raises(DatasetError):
        FrequencyDataset(np.zeros(0), np.zeros((0, 1, 1)))


def test_column_count(tmp_path):
    d = random_dataset(2, 2, 2)
    path = tmp_path / "d.csv"
    save_dataset(d, path)
    rows = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith(("#", "freq"))]
    assert all(len(r.split(",")) == 1 + 2 * 2 * 2 for r in rows)


def test_dataset_invariants():
    with pytest.raises(DatasetError):
        FrequencyDataset([2.0, 1.0], np.ones(2))
    with pytest.raises(DatasetError):
        FrequencyDataset([0.0, 1.0], np.ones(2))
    with pytest.raises(DatasetError):
        FrequencyDataset([1.0, 2.0], np.ones((3, 1, 1)))


def test_synthetic_pair():
    s = generate_synthetic(2, 1, seed=3)
    assert s.order == 2
    assert s.poles[1] == np.conj(s.poles[0])
    assert np.array_equal(s.residues[1], s.residues[0].conj())
    assert np.linalg.matrix_rank(s.residues[0]) == 1


def test_synthetic_stable_order50():
    s = generate_synthetic(50, 1, seed=11)
    assert s.poles.real.max() < 0 and s.is_stable


def test_synthetic_deterministic():
    a, b = generate_synthetic(10, 2, seed=5), generate_synthetic(10, 2, seed=5)
    assert np.array_equal(a.poles, b.poles) and np.array_equal(a.residues, b.residues)


def test_synthetic_odd_order():
    with pytest.raises(ValueError):
        generate_synthetic(3, 1, seed=0)


def test_synthetic_distribution():
    s = generate_synthetic(4000, 1, seed=1)
    re = s.poles[0::2].real
    assert abs(re.mean() + 1e4) < 3 * 2e3 / np.sqrt(re.size)
    assert abs(re.std() / 2e3 - 1) < 0.1


def test_sample_noiseless_matches_sum():
    s = generate_synthetic(2, 1, seed=4)
    d = sample_system(s, 5, 1.0, 1e3)
    w = 2 * np.pi * d.freqs
    ref = sum(s.residues[k, 0, 0] / (1j * w - s.poles[k]) for k in range(2))
    np.testing.assert_allclose(d.H[:, 0, 0], ref, rtol=1e-14)


def test_sample_snr_ratio():
    s = generate_synthetic(50, 1, seed=2)
    clean = sample_system(s, 2000, 1591.5, 1591549)
    noisy = sample_system(s, 2000, 1591.5, 1591549, snr_db=100, seed=2)
    ratio = np.sum(np.abs(clean.H) ** 2) / np.sum(np.abs(noisy.H - clean.H) ** 2)
    assert abs(ratio / 1e10 - 1) <= 0.05


def test_sample_log_spacing():
    d = sample_system(generate_synthetic(2, 1, seed=0), 3, 1.0, 100.0)
    np.testing.assert_allclose(d.freqs, [1.0, 10.0, 100.0], rtol=1e-15)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_conjugate_consistency(seed):
    s = generate_synthetic(20, 2, seed=seed)
    w = np.geomspace(1e3, 1e7, 17)
    np.testing.assert_allclose(s(-1j * w), s(1j * w).conj(), rtol=1e-13)


def test_sample_deterministic():
    s = generate_synthetic(6, 1, seed=0)
    a = sample_system(s, 50, 1, 10, snr_db=40, seed=9)
    b = sample_system(s, 50, 1, 10, snr_db=40, seed=9)
    assert np.array_equal(a.H, b.H)


def test_system_roundtrip(tmp_path):
    s = generate_synthetic(6, 2, seed=1, D=np.ones((2, 2)))
    save_system(s, tmp_path / "s.json")
    t = load_system(tmp_path / "s.json")
    assert isinstance(t, SyntheticSystem)
    assert np.array_equal(s.poles, t.poles) and np.array_equal(s.residues, t.residues)
    assert np.array_equal(s.D, t.D)
