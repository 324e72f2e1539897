import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_stream
from evrecon.errors import DimensionMismatchError, InvalidInputError, OutOfRangeError
from evrecon.events import EventStream, ExposureWindow
from evrecon.integral import IntegralMap, double_integral, sharp_integral
from evrecon.reconstruction import (EPS, Frame, apf_fuse, enhance, fusion_weights, reblur,
                                    reconstruct_latent)
from evrecon.simulator import synthetic_scene

WIN = ExposureWindow(0.0, 1.0)


def frame(values, exposure=WIN):
    return Frame(np.asarray(values, dtype=float), exposure)


def imap(values, m=0.5, window=WIN):
    return IntegralMap(np.asarray(values, dtype=float), m, window)


@pytest.fixture(scope="module")
def scene():
    return synthetic_scene(0.2, width=32, height=32, seed=4)


class TestFrame:
    def test_range_enforced(self):
        with pytest.raises(InvalidInputError):
            frame([[0.0, 0.5]])
        with pytest.raises(InvalidInputError):
            frame([[1.2]])

    def test_clamped(self):
        f = Frame.clamped([[0.0, 2.0, 0.3]], WIN)
        assert f.intensity.tolist() == [[EPS, 1.0, 0.3]]

    def test_immutable(self):
        f = frame([[0.5]])
        with pytest.raises(ValueError):
            f.intensity[0, 0] = 0.1


class TestDivision:
    def test_unit_integral(self, rng):
        F = frame(rng.uniform(0.1, 1, (4, 5)))
        L = reconstruct_latent(F, imap(np.ones((4, 5))))
        assert np.array_equal(L.intensity, F.intensity)
        assert L.exposure == ExposureWindow(0.5, 0.0)

    def test_direct_division(self):
        assert reconstruct_latent(frame([[0.5]]), imap([[2.0]])).intensity[0, 0] == 0.25

    def test_clamps(self):
        L = reconstruct_latent(frame([[0.9, 0.001]]), imap([[0.5, 100.0]]))
        assert L.intensity.tolist() == [[1.0, EPS]]

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            reconstruct_latent(frame(np.full((2, 2), 0.5)), imap(np.ones((2, 3))))

    def test_reblur_unit_and_exposure(self):
        L = frame([[0.3, 0.7]], ExposureWindow(0.5, 0.0))
        B = reblur(L, imap([[1.0, 1.0]]))
        assert np.array_equal(B.intensity, L.intensity)
        assert B.exposure == WIN

    def test_reblur_inverts_division_where_unclamped(self, rng):
        B = frame(rng.uniform(0.05, 0.5, (6, 6)))
        E = imap(rng.uniform(0.6, 1.8, (6, 6)))
        L = reconstruct_latent(B, E)
        ok = (B.intensity / E.values <= 1.0) & (B.intensity / E.values >= EPS)
        np.testing.assert_allclose(reblur(L, E).intensity[ok], B.intensity[ok], rtol=1e-15)

    def test_model_exact_latent(self, scene):
        B = scene.blurry[0]
        ms = [0.05, 0.5, 0.95]
        truth = scene.latent_at(ms)
        ok = ~truth.clamped
        for m, gt in zip(ms, truth.frames):
            L = reconstruct_latent(B, double_integral(scene.stream, m, B.exposure, scene.c))
            assert np.max(np.abs(L.intensity - gt.intensity)[ok]) < 1e-6

    def test_model_exact_reblur(self, scene):
        for B in scene.blurry:
            E = double_integral(scene.stream, 1.25, B.exposure, scene.c)
            L = scene.latent_at([1.25]).frames[0]
            assert np.max(np.abs(reblur(L, E).intensity - B.intensity)) < 1e-6


class TestFusion:
    win_i = ExposureWindow(0.0, 1.0)
    win_j = ExposureWindow(2.0, 1.0)

    def latents(self, rng, shape=(5, 5), m=1.5):
        inst = ExposureWindow(m, 0.0)
        return frame(rng.uniform(0.1, 1, shape), inst), frame(rng.uniform(0.1, 1, shape), inst)

    def test_equal_deviation_gives_half(self):
        w = fusion_weights(imap([[2.0, 0.5]]), imap([[0.5, 2.0]]))
        assert w.w_i.tolist() == [[0.5, 0.5]]
        assert w.w_j.tolist() == [[0.5, 0.5]]

    def test_hand_softmax(self):
        w = fusion_weights(imap([[1.0]]), imap([[np.e]]))
        assert w.w_i[0, 0] == pytest.approx(np.e / (1 + np.e), rel=1e-15)
        assert w.w_i[0, 0] == pytest.approx(0.7311, abs=1e-4)

    def test_closer_to_one_wins(self, rng):
        a = rng.uniform(0.2, 5, (8, 8))
        b = rng.uniform(0.2, 5, (8, 8))
        w = fusion_weights(imap(a), imap(b))
        closer = np.abs(np.log(a)) < np.abs(np.log(b))
        assert np.all(w.w_i[closer] > 0.5)
        assert np.all(w.w_i[~closer] <= 0.5)

    def test_weights_sum_to_one(self, rng):
        for _ in range(20):
            a = np.exp(rng.normal(0, 3, (16, 16)))
            b = np.exp(rng.normal(0, 3, (16, 16)))
            w = fusion_weights(imap(a), imap(b))
            assert np.max(np.abs(w.w_i + w.w_j - 1)) <= 1e-15
            assert np.all((w.w_i >= 0) & (w.w_i <= 1) & (w.w_j >= 0) & (w.w_j <= 1))

    def test_extreme_maps_do_not_overflow(self):
        w = fusion_weights(imap([[1e-300, 1.0]]), imap([[1.0, 1e300]]))
        assert np.all(np.isfinite(w.w_i))
        assert w.w_i[0, 0] == pytest.approx(1e-300, rel=1e-12)
        assert w.w_i[0, 1] == 1.0

    @given(st.floats(0.01, 100), st.integers(0, 2**31))
    @settings(max_examples=50, deadline=None)
    def test_argmax_stable_under_common_scaling(self, k, seed):
        rng = np.random.default_rng(seed)
        la, lb = rng.normal(0, 1, (4, 4)), rng.normal(0, 1, (4, 4))
        keep = np.abs(np.abs(la) - np.abs(lb)) > 1e-6
        w1 = fusion_weights(imap(np.exp(la)), imap(np.exp(lb)))
        w2 = fusion_weights(imap(np.exp(k * la)), imap(np.exp(k * lb)))
        assert np.array_equal((w1.w_i > w1.w_j)[keep], (w2.w_i > w2.w_j)[keep])

    def test_boundaries_pass_through(self, rng):
        for m, pick in ((0.0, 0), (1.0, 0), (2.0, 1), (3.0, 1), (0.4, 0), (2.7, 1)):
            L_i, L_j = self.latents(rng, m=m)
            E = imap(np.full((5, 5), 2.0), m)
            out = apf_fuse(L_i, L_j, E, E, m, self.win_i, self.win_j)
            assert out is (L_i, L_j)[pick]

    def test_convex_combination(self, rng):
        for _ in range(10):
            L_i, L_j = self.latents(rng, (12, 12))
            E_i = imap(np.exp(rng.normal(0, 1, (12, 12))), 1.5, self.win_i)
            E_j = imap(np.exp(rng.normal(0, 1, (12, 12))), 1.5, self.win_j)
            out = apf_fuse(L_i, L_j, E_i, E_j, 1.5, self.win_i, self.win_j).intensity
            a, b = L_i.intensity, L_j.intensity
            assert np.all(out >= np.minimum(a, b)) and np.all(out <= np.maximum(a, b))
            w = fusion_weights(E_i, E_j)
            np.testing.assert_allclose(out, w.w_i * a + w.w_j * b, rtol=1e-15)

    def test_out_of_range(self, rng):
        L_i, L_j = self.latents(rng)
        E = imap(np.ones((5, 5)))
        for m in (-0.1, 3.1):
            with pytest.raises(OutOfRangeError):
                apf_fuse(L_i, L_j, E, E, m, self.win_i, self.win_j)


class TestEnhance:
    def test_static_scene_any_task(self, rng):
        img = rng.uniform(0.1, 0.9, (6, 7))
        empty = EventStream.empty(7, 6, (0.0, 3.0))
        for wi, wj in ((ExposureWindow(0, 1), ExposureWindow(2, 1)),
                       (ExposureWindow(0, 0), ExposureWindow(3, 0))):
            out = enhance(Frame(img, wi), Frame(img, wj), empty, np.linspace(0, 3, 13), 0.3)
            for f in out:
                assert np.array_equal(f.intensity, img)

    def test_sharp_endpoints(self, rng):
        s = random_stream(rng, 8, 8, 300, (0.0, 1.0))
        I_i = frame(rng.uniform(0.1, 0.9, (8, 8)), ExposureWindow(0.0, 0.0))
        I_j = frame(rng.uniform(0.1, 0.9, (8, 8)), ExposureWindow(1.0, 0.0))
        a, b = enhance(I_i, I_j, s, [0.0, 1.0], 0.2)
        assert np.array_equal(a.intensity, I_i.intensity)
        assert np.array_equal(b.intensity, I_j.intensity)

    def test_interpolation_matches_sharp_division(self, rng):
        s = random_stream(rng, 8, 8, 300, (0.0, 1.0))
        I_i = frame(rng.uniform(0.1, 0.5, (8, 8)), ExposureWindow(0.0, 0.0))
        I_j = frame(rng.uniform(0.1, 0.5, (8, 8)), ExposureWindow(1.0, 0.0))
        (out,) = enhance(I_i, I_j, s, [0.3], 0.2)
        L_i = reconstruct_latent(I_i, sharp_integral(s, 0.3, 0.0, 0.2))
        L_j = reconstruct_latent(I_j, sharp_integral(s, 0.3, 1.0, 0.2))
        lo, hi = np.minimum(L_i.intensity, L_j.intensity), np.maximum(L_i.intensity, L_j.intensity)
        assert np.all((out.intensity >= lo) & (out.intensity <= hi))

    def test_deblur_queries_model_exact(self, scene):
        B_i, B_j = scene.blurry
        qs = list(np.linspace(0.0, 1.0, 7))
        truth = scene.latent_at(qs)
        ok = ~truth.clamped
        for f, gt in zip(enhance(B_i, B_j, scene.stream, qs, scene.c), truth.frames):
            assert np.max(np.abs(f.intensity - gt.intensity)[ok]) < 1e-6

    def test_deblur_ignores_second_frame_and_later_events(self, scene, rng):
        B_i, B_j = scene.blurry
        qs = [0.1, 0.6, 1.0]
        ref = enhance(B_i, B_j, scene.stream, qs, scene.c)
        other = Frame(rng.uniform(0.1, 1, B_j.shape), B_j.exposure)
        s = scene.stream
        keep = s.t <= B_i.exposure.t_e
        n_late = 500
        late_t = rng.uniform(1.01, 2.5, n_late)
        noisy = EventStream.from_arrays(s.width, s.height, np.concatenate([s.t[keep], late_t]),
                                        np.concatenate([s.x[keep], rng.integers(0, s.width, n_late)]),
                                        np.concatenate([s.y[keep], rng.integers(0, s.height, n_late)]),
                                        np.concatenate([s.p[keep], rng.choice([-1, 1], n_late)]), span=s.span)
        for a, b in zip(ref, enhance(B_i, other, noisy, qs, scene.c)):
            assert np.array_equal(a.intensity, b.intensity)

    def test_query_out_of_range(self, scene):
        with pytest.raises(OutOfRangeError):
            enhance(*scene.blurry, scene.stream, [2.6], scene.c)

    def test_windows_out_of_order(self, scene):
        with pytest.raises(InvalidInputError):
            enhance(scene.blurry[1], scene.blurry[0], scene.stream, [1.2], scene.c)

    def test_output_order_follows_queries(self, scene):
        qs = [2.0, 0.2, 1.25]
        out = enhance(*scene.blurry, scene.stream, qs, scene.c)
        assert [f.exposure.t_s for f in out] == qs
