import math

import numpy as np
import pytest
from scipy import stats

from noisewarp import _backend
from noisewarp.bridge import bridge_prefix_path
from noisewarp.core import STREAM_BRIDGE, PartitionRecord, RngKey, derive_seed, make_prior_noise
from noisewarp.flows import random_smooth_flow, uniform_flow, vortex_flow, zero_flow
from noisewarp.partition_grid import build_grid_partition
from noisewarp.partition_particle import build_particle_partition
from noisewarp.warp import build_record, warp_flow, warp_noise, warp_sequence


def test_identity_record_is_exact(backend):
    prior = make_prior_noise((7, 5), 3, 1)
    out = warp_noise(prior, PartitionRecord.identity((7, 5)), 9)
    np.testing.assert_array_equal(out.warped, prior)
    np.testing.assert_array_equal(out.area, 1.0)
    assert not out.vacated.any() and out.clamp_count == 0


@pytest.mark.parametrize("method", ["grid", "particle"])
def test_integer_shift_moves_noise(method, backend):
    prior = make_prior_noise((6, 7), 2, 4)
    out = warp_noise(prior, build_record(uniform_flow((6, 7), (0.0, -2.0)), method), 5)
    np.testing.assert_array_equal(out.warped[:, :, 2:], prior[:, :, :-2])
    assert out.vacated_pixels == [(i, j) for i in range(6) for j in range(2)]
    # vacated pixels get fresh draws that do not copy the prior
    assert not np.any(np.isin(out.warped[:, :, :2], prior))


def test_vacated_fill_is_deterministic():
    prior = make_prior_noise((4, 4), 1, 0)
    rec = build_record(uniform_flow((4, 4), (2.0, 0.0)), "grid")
    a, b = warp_noise(prior, rec, 3), warp_noise(prior, rec, 3)
    np.testing.assert_array_equal(a.warped, b.warped)
    assert not np.array_equal(a.warped[:, 2:], warp_noise(prior, rec, 4).warped[:, 2:])


def test_shape_mismatch():
    with pytest.raises(ValueError):
        warp_noise(make_prior_noise((4, 4)), PartitionRecord.identity((4, 5)))


def test_clamp_skips_oversubscribed_requests(backend):
    # source 0 hands out 0.7 twice; the second request only gets 0.3
    rec = PartitionRecord.from_lists((1, 3), [[(0.7, 1), (0.7, 2)], [], []])
    out = warp_noise(np.array([[[1.0, 2.0, 3.0]]]), rec, 0)
    assert out.clamp_count == 1
    np.testing.assert_allclose(out.area[0], [0.0, 0.7, 0.3], atol=1e-15)
    assert out.vacated[0].tolist() == [True, False, False]


def test_scatter_conservation_matches_scalar_walk(backend):
    # one source with three entries summing to 0.9; contributions sum to B(0.9)
    rec = PartitionRecord.from_lists((1, 4), [[(0.2, 1), (0.3, 2), (0.4, 3)], [], [], []])
    c = 1.3
    acc, consumed, _ = _backend.kernels.bridge_scatter(np.array([[c, 0, 0, 0]]), rec.offsets, rec.areas,
                                                       rec.dests, 17, 4, 1)
    path = bridge_prefix_path(c, [0.2, 0.5, 0.9], RngKey(17, 0, 0))
    np.testing.assert_allclose(acc[0, 1:], np.diff([0.0] + path), rtol=1e-13, atol=1e-15)
    assert acc[0].sum() == pytest.approx(path[-1], abs=1e-14)


def test_warp_noise_uses_bridge_stream():
    rec = PartitionRecord.from_lists((1, 2), [[(0.5, 0), (0.5, 1)], []])
    out = warp_noise(np.array([[[0.8, 0.0]]]), rec, 42)
    q = bridge_prefix_path(0.8, [0.5, 1.0], RngKey(derive_seed(42, STREAM_BRIDGE), 0, 0))
    assert out.warped[0, 0, 0] == pytest.approx(q[0] / math.sqrt(0.5), abs=1e-14)
    assert out.warped[0, 0, 1] == pytest.approx((0.8 - q[0]) / math.sqrt(0.5), abs=1e-14)


def test_channels_use_independent_draws():
    prior = np.repeat(make_prior_noise((16, 16), 1, 1), 2, axis=0)
    out = warp_noise(prior, build_grid_partition(vortex_flow((16, 16), 1.0)), 2).warped
    assert not np.array_equal(out[0], out[1])


def test_backends_agree_on_warp(rng):
    flow = rng.normal(0, 1.5, (9, 8, 2))
    prior = make_prior_noise((9, 8), 2, 3)
    res = []
    for b in ("python", "compiled") if _backend.COMPILED_AVAILABLE else ("python",):
        with _backend.use(b):
            res.append(warp_noise(prior, build_grid_partition(flow), 6))
    for r in res[1:]:
        np.testing.assert_allclose(r.warped, res[0].warped, rtol=1e-12, atol=1e-12)
        np.testing.assert_array_equal(r.area, res[0].area)
        assert r.clamp_count == res[0].clamp_count


def test_thread_count_does_not_change_output(monkeypatch):
    flow = random_smooth_flow((40, 40), 3.0, 2.0, seed=1)
    prior = make_prior_noise((40, 40), 2, 0)
    monkeypatch.setenv("NOISEWARP_THREADS", "1")
    a = warp_noise(prior, build_grid_partition(flow), 1).warped
    monkeypatch.setenv("NOISEWARP_THREADS", "4")
    np.testing.assert_array_equal(a, warp_noise(prior, build_grid_partition(flow), 1).warped)


def test_sequence_examples():
    prior = make_prior_noise((6, 6), 1, 2)
    assert len(warp_sequence(prior, [])) == 1
    frames = warp_sequence(prior, [zero_flow((6, 6))] * 50, "grid", 3)
    assert len(frames) == 51
    for f in frames:
        np.testing.assert_array_equal(f, prior)


def test_sequence_frames_use_distinct_seeds():
    prior = make_prior_noise((8, 8), 1, 2)
    flow = vortex_flow((8, 8), 1.0)
    f = warp_sequence(prior, [flow, flow], "particle", 7)
    rec = build_particle_partition(flow)
    from noisewarp.core import STREAM_FRAME
    np.testing.assert_array_equal(f[1], warp_noise(prior, rec, derive_seed(7, STREAM_FRAME, 0)).warped)
    np.testing.assert_array_equal(f[2], warp_noise(f[1], rec, derive_seed(7, STREAM_FRAME, 1)).warped)


def test_warp_flow_dispatch():
    prior = make_prior_noise((5, 5), 1, 0)
    for m in ("grid", "particle", "hiwyn", "hiwyn-eulerian", "bilinear", "bicubic", "nearest"):
        np.testing.assert_array_equal(warp_flow(prior, zero_flow((5, 5)), m, 0, 2), prior)
    with pytest.raises(ValueError):
        warp_flow(prior, zero_flow((5, 5)), "splat")


def test_per_pixel_marginals_are_standard_normal():
    # fresh white-noise prior per run, injective smooth flow
    runs = 10000
    flow = vortex_flow((4, 4), 1.2, radius=1.5)
    out = warp_noise(make_prior_noise((4, 4), runs, 31), build_grid_partition(flow), 32).warped
    pix = out.reshape(runs, -1).T
    # alpha = 0.01 for the whole family of pixels (Bonferroni)
    for p in pix:
        assert stats.kstest(p, "norm").pvalue > 0.01 / len(pix)


def test_particle_record_decorrelates_pixels():
    runs = 20000
    rng = np.random.default_rng(8)
    flow = rng.normal(0, 1.5, (3, 3, 2))
    out = warp_noise(make_prior_noise((3, 3), runs, 11), build_particle_partition(flow), 12).warped
    corr = np.corrcoef(out.reshape(runs, -1), rowvar=False)
    off = corr[~np.eye(9, dtype=bool)]
    assert np.all(np.abs(off) < 3.0 / math.sqrt(runs))
