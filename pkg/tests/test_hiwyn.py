import math

import numpy as np
import pytest

from noisewarp import _backend
from noisewarp.bridge import sample_upsampled_subimage
from noisewarp.core import STREAM_UPSAMPLE, RngKey, derive_seed, make_prior_noise
from noisewarp.flows import random_smooth_flow, uniform_flow, vortex_flow, zero_flow
from noisewarp.hiwyn import hiwyn_owner, hiwyn_warp, hiwyn_warp_eulerian, upsample_noise


@pytest.mark.parametrize("N", [1, 2, 3, 8])
def test_identity_flow_is_exact(N, backend):
    prior = make_prior_noise((5, 4), 2, 0)
    for fn in (hiwyn_warp, hiwyn_warp_eulerian):
        out = fn(prior, zero_flow((5, 4)), N, 1)
        np.testing.assert_array_equal(out.warped, prior)
        assert not out.vacated.any()


def test_single_pixel_full_coverage():
    prior = np.array([[[1.25]]])
    for fn in (hiwyn_warp, hiwyn_warp_eulerian):
        assert fn(prior, zero_flow((1, 1)), 16, 3).warped[0, 0, 0] == 1.25


def test_bad_level():
    with pytest.raises(ValueError):
        hiwyn_warp(make_prior_noise((3, 3)), zero_flow((3, 3)), 0)
    with pytest.raises(ValueError):
        hiwyn_owner(zero_flow((3, 3)), 0)


def test_upsampled_image_sums(backend):
    prior = make_prior_noise((3, 4), 2, 5)
    up = upsample_noise(prior, 8, 1)
    sub = up.subpixels()
    np.testing.assert_allclose(sub.sum(-1), prior.reshape(2, -1), atol=1e-12)
    img = up.assemble()
    assert img.shape == (2, 24, 32)
    np.testing.assert_allclose(img[:, 8:16, 24:32].sum(), prior[:, 1, 3].sum(), atol=1e-12)


def test_upsampling_matches_subimage_sampler():
    prior = make_prior_noise((2, 3), 1, 5)
    up = upsample_noise(prior, 4, 9)
    x = sample_upsampled_subimage(prior[0, 1, 2], 4, RngKey(derive_seed(9, STREAM_UPSAMPLE), 5, 0))
    np.testing.assert_allclose(up.subpixels()[0, 5], x, atol=1e-14)


def test_half_pixel_shift_n2(backend):
    prior = make_prior_noise((4, 4), 1, 2)
    flow = uniform_flow((4, 4), (0.5, 0.0))
    out = hiwyn_warp(prior, flow, 2, 3)
    img = upsample_noise(prior, 2, 3).assemble()[0]
    for i in range(3):
        for j in range(4):
            want = img[2 * i + 1:2 * i + 3, 2 * j:2 * j + 2].sum()
            assert out.warped[0, i, j] == pytest.approx(want, abs=1e-12)
            assert out.area[i, j] == 1.0
    # bottom row only covers half a pixel inside the domain
    np.testing.assert_array_equal(out.area[3], 0.5)


def test_owner_is_lowest_destination():
    # every pixel collapses onto the same point; overlapping quarter squares at the corners
    from noisewarp.flows import collapse_flow
    own = hiwyn_owner(collapse_flow((4, 4)), 4)
    assert set(np.unique(own)) <= {-1, 0, 3, 12, 15}
    owned = np.unique(own[own >= 0])
    assert len(owned) == 4


def test_gather_and_scatter_counts_match(backend):
    flow = random_smooth_flow((6, 6), 2.0, 1.0, seed=3)
    prior = make_prior_noise((6, 6), 1, 1)
    a = hiwyn_warp(prior, flow, 4, 2)
    b = hiwyn_warp_eulerian(prior, flow, 4, 2)
    np.testing.assert_array_equal(a.area, b.area)
    np.testing.assert_array_equal(a.vacated, b.vacated)


def test_owner_reuse_gives_same_output():
    flow = vortex_flow((6, 6), 1.0)
    prior = make_prior_noise((6, 6), 1, 0)
    own = hiwyn_owner(flow, 4)
    np.testing.assert_array_equal(hiwyn_warp(prior, flow, 4, 1, owner=own).warped, hiwyn_warp(prior, flow, 4, 1).warped)
    with pytest.raises(ValueError):
        hiwyn_warp(prior, flow, 2, 1, owner=own)


def test_backends_agree(rng):
    flow = rng.normal(0, 1.0, (5, 6, 2))
    prior = make_prior_noise((5, 6), 2, 0)
    res = []
    for b in ("python", "compiled") if _backend.COMPILED_AVAILABLE else ("python",):
        with _backend.use(b):
            res.append((hiwyn_owner(flow, 4), hiwyn_warp(prior, flow, 4, 1).warped,
                        hiwyn_warp_eulerian(prior, flow, 4, 1).warped))
    for r in res[1:]:
        np.testing.assert_array_equal(r[0], res[0][0])
        np.testing.assert_allclose(r[1], res[0][1], rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(r[2], res[0][2], rtol=1e-12, atol=1e-12)


def test_output_is_unit_variance_at_finite_n():
    runs = 20000
    flow = vortex_flow((4, 4), 1.0, radius=1.5)
    out = hiwyn_warp(make_prior_noise((4, 4), runs, 3), flow, 4, 4).warped.reshape(runs, -1)
    assert np.all(np.abs(out.var(0) - 1.0) < 3 * math.sqrt(2.0 / runs))
