import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_stream
from evrecon.errors import BoundsError, CoverageError, InvalidInputError, InvalidIntervalError
from evrecon.events import (Event, EventStream, ExposureWindow, event_count_map, preprocess, signed_count,
                            signed_count_map, slice_stream, to_bins)


def one_pixel(times, pols, span=(0.0, 1.0)):
    n = len(times)
    return EventStream.from_arrays(1, 1, times, [0] * n, [0] * n, pols, span=span)


@pytest.fixture
def five():
    return one_pixel([1.0, 2.0, 3.0, 4.0, 5.0], [1, 1, -1, 1, -1], span=(0.0, 6.0))


class TestStream:
    def test_rejects_unsorted(self):
        with pytest.raises(InvalidInputError):
            EventStream(1, 1, [0.5, 0.1], [0, 0], [0, 0], [1, 1], (0, 1))

    def test_rejects_bad_polarity(self):
        with pytest.raises(InvalidInputError):
            one_pixel([0.5], [0])

    def test_rejects_out_of_sensor(self):
        with pytest.raises(InvalidInputError):
            EventStream.from_arrays(2, 2, [0.5], [2], [0], [1], span=(0, 1))

    def test_rejects_events_outside_span(self):
        with pytest.raises(InvalidInputError):
            one_pixel([1.5], [1], span=(0, 1))

    def test_from_events_sorts_stably(self):
        evs = [Event(0.3, 0, 0, 1), Event(0.1, 1, 0, -1), Event(0.3, 1, 0, -1)]
        s = EventStream.from_events(2, 1, evs, span=(0, 1))
        assert list(s) == [evs[1], evs[0], evs[2]]

    def test_arrays_are_read_only(self, five):
        with pytest.raises(ValueError):
            five.t[0] = 9.0

    def test_exposure_window(self):
        w = ExposureWindow(1.0, 0.5)
        assert w.contains(1.0) and w.contains(1.5) and not w.contains(1.6)
        assert ExposureWindow(2.0).is_sharp
        with pytest.raises(InvalidInputError):
            ExposureWindow(0.0, -1.0)


class TestSlice:
    def test_zero_width(self, five):
        s = slice_stream(five, 3.0, 3.0)
        assert len(s) == 0 and s.span == (3.0, 3.0)

    def test_full_span(self, five):
        assert len(slice_stream(five, *five.span)) == len(five)

    def test_half_open(self, five):
        s = slice_stream(five, 2.0, 4.0)
        assert s.t.tolist() == [3.0, 4.0]
        assert s.span == (2.0, 4.0)
        assert len(five) == 5

    def test_reversed_interval(self, five):
        with pytest.raises(InvalidIntervalError):
            slice_stream(five, 4.0, 2.0)


class TestSignedCount:
    def test_no_events(self):
        assert signed_count(one_pixel([], []), (0, 0), 0.0, 1.0) == 0

    def test_manual_sum(self):
        s = one_pixel([0.2, 0.5, 0.7], [1, -1, 1])
        assert signed_count(s, (0, 0), 0.0, 0.6) == 0
        assert signed_count(s, (0, 0), 0.0, 0.7) == 1
        # an event exactly at the start belongs to the past
        assert signed_count(s, (0, 0), 0.2, 0.6) == -1

    def test_antisymmetry(self, five):
        for a, b in [(0.5, 3.5), (2.0, 5.0), (4.2, 1.0)]:
            assert signed_count(five, (0, 0), a, b) == -signed_count(five, (0, 0), b, a)

    def test_bounds(self, five):
        with pytest.raises(BoundsError):
            signed_count(five, (1, 0), 0.0, 1.0)

    def test_coverage(self, five):
        with pytest.raises(CoverageError):
            signed_count(five, (0, 0), 0.0, 7.0)

    def test_map_matches_per_pixel(self, rng):
        s = random_stream(rng, 5, 4, 300)
        for a, b in [(0.1, 0.7), (0.9, 0.2)]:
            cm = signed_count_map(s, a, b)
            for y in range(4):
                for x in range(5):
                    assert cm[y, x] == signed_count(s, (x, y), a, b)

    def test_event_count_map(self):
        s = one_pixel([0.2, 0.5, 0.7], [1, -1, 1])
        assert event_count_map(s, 0.0, 0.6)[0, 0] == 2

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.lists(st.floats(0, 1), min_size=3, max_size=3))
    def test_additivity(self, seed, abc):
        s = random_stream(np.random.default_rng(seed), 3, 3, 40)
        a, b, c = abc
        for px in [(0, 0), (1, 2), (2, 1)]:
            assert signed_count(s, px, a, c) == signed_count(s, px, a, b) + signed_count(s, px, b, c)


class TestPreprocess:
    def test_degenerate(self, five):
        s = preprocess(five, 2.5, 2.5)
        assert len(s) == 0 and s.span == (0.0, 0.0)

    def test_shift(self):
        m = 0.2
        s = preprocess(one_pixel([m + 0.3], [1]), m, 0.9)
        assert s.t.tolist() == pytest.approx([0.3]) and s.p.tolist() == [1]
        assert s.span == pytest.approx((0.0, 0.7))

    def test_reverse(self):
        m = 0.8
        src = one_pixel([m - 0.4, m - 0.1], [-1, 1])
        s = preprocess(src, m, 0.2)
        assert s.t.tolist() == pytest.approx([0.1, 0.4])
        assert s.p.tolist() == [-1, 1]
        assert s.span == pytest.approx((0.0, 0.6))

    def test_reverse_includes_event_at_m(self):
        s = preprocess(one_pixel([0.5], [1]), 0.5, 0.1)
        assert s.t.tolist() == [0.0] and s.p.tolist() == [-1]
        assert len(preprocess(one_pixel([0.5], [1]), 0.5, 0.9)) == 0

    def test_coverage_error(self, five):
        with pytest.raises(CoverageError):
            preprocess(five, 1.0, 8.0)

    def test_identity_on_canonical(self, rng):
        s = random_stream(rng, 4, 4, 200, span=(0.0, 2.0))
        s = slice_stream(s, 0.0, 2.0)  # drop any event stamped exactly 0
        out = preprocess(s, 0.0, 2.0)
        assert np.array_equal(out.t, s.t) and np.array_equal(out.p, s.p)
        assert np.array_equal(out.x, s.x) and np.array_equal(out.y, s.y)

    def test_double_reversal(self, rng):
        s = random_stream(rng, 4, 4, 200, span=(0.0, 2.0))
        m, t_r = 1.7, 0.4
        once = preprocess(s, m, t_r)  # t -> m - t, p -> -p
        D = once.span[1]
        twice = preprocess(once, D, 0.0)  # t' -> D - t' = t - t_r, p restored
        want = slice_stream(s, t_r, m)
        assert len(twice) == len(want)
        assert np.allclose(t_r + twice.t, want.t, atol=1e-12)
        assert np.array_equal(twice.p, want.p)
        assert np.array_equal(twice.x, want.x) and np.array_equal(twice.y, want.y)


class TestBins:
    def test_empty(self):
        g = to_bins(EventStream.empty(3, 2, (0.0, 1.0)), 4)
        assert g.data.shape == (8, 2, 3) and not g.data.any()

    def test_single_bin(self, rng):
        s = random_stream(rng, 3, 3, 100)
        g = to_bins(s, 1)
        assert g.positive.sum() == np.sum(s.p == 1) and g.negative.sum() == np.sum(s.p == -1)

    def test_bin_formula(self):
        g = to_bins(one_pixel([0.1, 0.3, 0.9], [1, -1, 1]), 4)
        assert g.positive[:, 0, 0].tolist() == [1, 0, 0, 1]
        assert g.negative[:, 0, 0].tolist() == [0, 1, 0, 0]

    def test_last_instant_clamped(self):
        g = to_bins(one_pixel([1.0], [1]), 4)
        assert g.positive[3, 0, 0] == 1

    def test_degenerate_span(self):
        g = to_bins(one_pixel([0.5, 0.5], [1, -1], span=(0.5, 0.5)), 3)
        assert g.positive[0, 0, 0] == 1 and g.negative[0, 0, 0] == 1

    def test_bad_n(self, five):
        with pytest.raises(InvalidInputError):
            to_bins(five, 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 32))
    def test_conservation(self, seed, N):
        s = random_stream(np.random.default_rng(seed), 4, 3, 150)
        g = to_bins(s, N)
        pos = (s.p == 1)
        want_pos = np.bincount(s.pixel_index[pos], minlength=12).reshape(3, 4)
        want_neg = np.bincount(s.pixel_index[~pos], minlength=12).reshape(3, 4)
        assert np.array_equal(g.positive.sum(0), want_pos)
        assert np.array_equal(g.negative.sum(0), want_neg)
