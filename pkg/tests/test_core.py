import math

import numpy as np
import pytest
from scipy import stats

from noisewarp import _backend
from noisewarp.core import (PartitionRecord, RngKey, check_flow, check_noise, derive_seed, lane_hash,
                            make_prior_noise, num_threads, splitmix64, standard_normal, uniform)


def test_splitmix64_reference_values():
    # first outputs of the reference splitmix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_standard_normal_is_pure():
    k = RngKey(7, 3, 1, 9)
    assert standard_normal(k) == standard_normal(k)
    assert standard_normal(k) != standard_normal(k._replace(draw=10))
    assert 0.0 < uniform(k) < 1.0


def test_kernel_normals_match_scalar(backend):
    pix = np.arange(50, dtype=np.int64)
    ch = pix % 3
    dr = pix * 7 % 11
    got = _backend.kernels.normal_array(99, pix, ch, dr)
    want = [standard_normal(RngKey(99, int(p), int(c), int(d))) for p, c, d in zip(pix, ch, dr)]
    if backend == "compiled":
        np.testing.assert_array_equal(got, want)
    else:
        # numpy's vectorized log/cos may differ from libm in the last bit
        np.testing.assert_allclose(got, want, rtol=1e-14, atol=1e-15)


def test_million_keys_pass_ks():
    n = 10 ** 6
    z = _backend.kernels.normal_array(2024, np.arange(n, dtype=np.int64), np.zeros(n, np.int64),
                                      np.zeros(n, np.int64))
    assert stats.kstest(z, "norm").pvalue > 0.01


def test_draw_counter_lag1_autocorrelation():
    n = 200000
    z = _backend.kernels.normal_array(5, np.zeros(n, np.int64), np.zeros(n, np.int64), np.arange(n, dtype=np.int64))
    r = np.corrcoef(z[:-1], z[1:])[0, 1]
    assert abs(r) < 3.0 / math.sqrt(n)


def test_prior_noise_deterministic_and_seeded():
    a = make_prior_noise((4, 4), 1, 7)
    b = make_prior_noise((4, 4), 1, 7)
    assert a.shape == (1, 4, 4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, make_prior_noise((4, 4), 1, 8))


def test_prior_noise_moments():
    x = make_prior_noise((256, 256), 1, 3)
    assert abs(x.mean()) < 0.02
    assert abs(x.var() - 1.0) < 0.02


def test_prior_noise_seed_pairs_uncorrelated():
    # Fisher z of 16-pixel correlations; each z*sqrt(n-3) is close to N(0, 1)
    zs = []
    for s in range(1000):
        a = make_prior_noise((4, 4), 1, 2 * s).ravel()
        b = make_prior_noise((4, 4), 1, 2 * s + 1).ravel()
        zs.append(np.arctanh(np.corrcoef(a, b)[0, 1]) * math.sqrt(16 - 3))
    zs = np.asarray(zs)
    assert abs(zs.mean()) < 3.0 / math.sqrt(len(zs))
    assert stats.kstest(zs, "norm").pvalue > 0.001


def test_prior_noise_channels_independent_lanes():
    x = make_prior_noise((64, 64), 2, 1)
    assert abs(np.corrcoef(x[0].ravel(), x[1].ravel())[0, 1]) < 3.0 / 64


def test_prior_noise_backends_agree():
    with _backend.use("python"):
        a = make_prior_noise((9, 7), 3, 11)
    if _backend.COMPILED_AVAILABLE:
        with _backend.use("compiled"):
            np.testing.assert_allclose(a, make_prior_noise((9, 7), 3, 11), rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize("shape", [(0, 4), (4, -1), (5,), (2, 2, 2, 2)])
def test_prior_noise_rejects_bad_shapes(shape):
    with pytest.raises(ValueError):
        make_prior_noise(shape, 1, 0)


def test_derive_seed_streams_differ():
    assert derive_seed(1, 2) != derive_seed(1, 3)
    assert derive_seed(1, 2) != derive_seed(2, 2)
    assert derive_seed(1, 2, 0) != derive_seed(1, 2, 1)
    assert lane_hash(1, 2, 3) != lane_hash(1, 3, 2)


def test_check_noise_and_flow():
    assert check_noise(np.zeros((3, 4)), ndim=2).shape == (1, 3, 4)
    with pytest.raises(ValueError):
        check_noise(np.full((1, 3, 3), np.nan))
    with pytest.raises(ValueError):
        check_flow(np.zeros((3, 3, 3)))
    with pytest.raises(ValueError):
        check_flow(np.zeros((3, 3, 2)), (3, 4))
    f = np.zeros((3, 3, 2))
    f[1, 1, 0] = np.inf
    with pytest.raises(ValueError):
        check_flow(f)


def test_num_threads_env(monkeypatch):
    monkeypatch.setenv("NOISEWARP_THREADS", "3")
    assert num_threads() == 3
    monkeypatch.setenv("NOISEWARP_THREADS", "0")
    assert num_threads() >= 1
    monkeypatch.setenv("NOISEWARP_THREADS", "-2")
    with pytest.raises(ValueError):
        num_threads()


def test_partition_record_validation():
    rec = PartitionRecord.from_lists((1, 2), [[(0.5, 0), (0.5, (0, 1))], []])
    assert rec.entries(0) == [(0.5, (0, 0)), (0.5, (0, 1))]
    assert rec.entries((0, 1)) == []
    np.testing.assert_array_equal(rec.source_sums(), [[1.0, 0.0]])
    np.testing.assert_array_equal(rec.dest_areas(), [[0.5, 0.5]])
    assert rec.same_as(PartitionRecord.from_lists((1, 2), [[(0.5, 0), (0.5, 1)], []]))
    with pytest.raises(ValueError):
        PartitionRecord.from_lists((1, 2), [[(0.0, 0)], []])
    with pytest.raises(ValueError):
        PartitionRecord((1, 2), [0, 1, 1], [0.5], [2])
    with pytest.raises(ValueError):
        PartitionRecord((1, 2), [0, 2, 1], [0.5, 0.5], [0, 1])
    ident = PartitionRecord.identity((2, 3))
    assert ident.entries((1, 2)) == [(1.0, (1, 2))]
