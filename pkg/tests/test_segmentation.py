import json

import numpy as np
import pytest
from pytest import approx

from windbridge.errors import EstimationError, InputError, SimulationError
from windbridge.power import PowerSeries
from windbridge.segmentation import (
    RenewalPoint,
    SemiMarkovKernel,
    backward_times,
    estimate_kernel,
    extract_segments,
    step_states,
)


def series_pair(e, eb):
    return PowerSeries(generated=np.asarray(e, float), corrected=np.asarray(eb, float))


def make_points(transitions, final_state=0):
    """Build renewal points from (state, sojourn) pairs plus a censored tail."""
    points, t = [], 0
    for n, (state, x) in enumerate(transitions):
        points.append(RenewalPoint(index=n, state=state, time=t, sojourn=x))
        t += x
    points.append(RenewalPoint(index=len(transitions), state=final_state, time=t, sojourn=None))
    return points


class TestExtractSegments:
    def test_equal_series_single_idle_segment(self):
        e = [0.5, 0.5, 0.5, 0.5]
        points, segments = extract_segments(series_pair(e, e))
        assert len(segments) == 1
        seg = segments[0]
        assert seg.i == 0 and seg.censored and seg.x == 4
        assert points[0].time == 0 and points[0].sojourn is None

    def test_hand_built_sign_pattern(self):
        # signs over 5 steps: +, +, 0, 0, -
        e = [1.0, 1.1, 0.5, 0.6, 0.2]
        eb = [0.9, 1.0, 0.5, 0.6, 0.4]
        points, segments = extract_segments(series_pair(e, eb))
        assert [p.time for p in points] == [0, 2, 4]
        assert [p.state for p in points] == [1, 0, -1]
        assert [p.sojourn for p in points] == [2, 2, None]
        assert [s.x for s in segments] == [2, 2, 1]
        np.testing.assert_allclose(segments[0].charges, [0.1, 0.1])
        assert segments[0].entry_power == 0.9

    def test_alternating_signs(self):
        e = [1.0, 0.0, 1.0, 0.0, 1.0]
        eb = [0.5, 0.5, 0.5, 0.5, 0.5]
        points, segments = extract_segments(series_pair(e, eb))
        assert all(s.x == 1 for s in segments)
        assert [s.i for s in segments] == [1, -1, 1, -1, 1]

    def test_misaligned_rejected(self):
        a = PowerSeries(generated=np.zeros(3))
        b = PowerSeries(generated=np.zeros(4))
        with pytest.raises(InputError, match="misaligned"):
            extract_segments(a, b)

    def test_too_short(self):
        with pytest.raises(InputError):
            extract_segments(series_pair([1.0], [1.0]))

    def test_sign_tolerance(self):
        e = [0.5, 0.5 + 1e-12, 0.8]
        eb = [0.5, 0.5, 0.5]
        points, _ = extract_segments(series_pair(e, eb))
        assert [p.state for p in points] == [0, 1]
        assert [p.time for p in points] == [0, 2]

    def test_segments_partition_timeline(self, renewal_data):
        _, segments = renewal_data
        assert segments[0].start == 0
        for prev, nxt in zip(segments, segments[1:]):
            assert prev.start + prev.x == nxt.start

    def test_sign_constant_within_segments(self, corrected_series, renewal_data):
        diff = corrected_series.generated - corrected_series.corrected
        _, segments = renewal_data
        for seg in segments:
            window = diff[seg.start : seg.start + seg.x]
            if seg.i == 0:
                assert np.all(np.abs(window) <= 1e-9)
            else:
                assert np.all(np.sign(window) == seg.i)


class TestEstimateKernel:
    def test_counting_oracle(self):
        # transitions from +1: (j=0, x=2) three times and (j=-1, x=2) once
        points = make_points(
            [(1, 2), (0, 3), (1, 2), (0, 3), (1, 2), (0, 3), (1, 2)], final_state=-1
        )
        kernel = estimate_kernel(points)
        assert kernel.q[1][0][2] == approx(0.75)
        assert kernel.q[1][-1][2] == approx(0.25)
        assert kernel.h[1][2] == approx(1.0)
        assert kernel.p[1][0] == approx(0.75)

    def test_identities(self, fitted_kernel):
        k = fitted_kernel
        for i in k.states:
            total = sum(v for jj in k.q[i].values() for v in jj.values())
            assert total == approx(1.0, abs=1e-12)
            for dur, hval in k.h[i].items():
                assert hval == approx(
                    sum(k.q[i][j].get(dur, 0.0) for j in k.q[i]), abs=1e-12
                )
            for j, pval in k.p[i].items():
                assert pval == approx(sum(k.q[i][j].values()), abs=1e-12)
            for dur, cond in k.p_cond[i].items():
                assert sum(cond.values()) == approx(1.0, abs=1e-12)
                for j, c in cond.items():
                    assert c == approx(k.q[i][j].get(dur, 0.0) / k.h[i][dur], abs=1e-12)

    def test_censored_tail_excluded(self):
        points = make_points([(1, 5)], final_state=0)
        kernel = estimate_kernel(points)
        assert kernel.visits == {1: 1}
        assert 0 not in kernel.q  # the censored visit to 0 contributes nothing

    def test_unseen_state_errors_on_use(self):
        points = make_points([(1, 2), (0, 1), (1, 3)], final_state=0)
        kernel = estimate_kernel(points)
        with pytest.raises(EstimationError, match="-1"):
            kernel.sojourn_pmf(-1)
        with pytest.raises(EstimationError, match="-1"):
            kernel.sample_sojourn(-1, np.random.default_rng(0))

    def test_no_transitions_at_all(self):
        points = [RenewalPoint(index=0, state=0, time=0, sojourn=None)]
        with pytest.raises(EstimationError):
            estimate_kernel(points)

    def test_conditioned_sojourn_sampling(self):
        points = make_points([(0, 2), (1, 1), (0, 5), (1, 1), (0, 9), (1, 1)], 0)
        kernel = estimate_kernel(points)
        rng = np.random.default_rng(3)
        draws = {kernel.sample_sojourn(0, rng, longer_than=2) for _ in range(200)}
        assert draws <= {5, 9}
        with pytest.raises(SimulationError):
            kernel.sample_sojourn(0, rng, longer_than=9)

    def test_round_trip_recovery(self):
        q = {
            1: {0: {1: 0.3, 3: 0.3}, -1: {2: 0.4}},
            0: {1: {1: 0.5, 4: 0.2}, -1: {2: 0.3}},
            -1: {0: {1: 0.6}, 1: {2: 0.4}},
        }
        kernel = SemiMarkovKernel(q, {1: 100, 0: 100, -1: 100})
        rng = np.random.default_rng(11)
        points = kernel.simulate(20_000, initial_state=0, rng=rng)
        back = estimate_kernel(points)
        err = {
            i: sum(
                abs(back.q.get(i, {}).get(j, {}).get(k, 0.0) - q[i][j][k])
                for j in q[i]
                for k in q[i][j]
            )
            for i in q
        }
        assert max(err.values()) < 0.05


class TestKernelJson:
    def test_exact_round_trip(self, fitted_kernel, tmp_path):
        path = tmp_path / "kernel.json"
        fitted_kernel.to_json(path, limit_mw=0.02)
        back = SemiMarkovKernel.from_json(path)
        assert back == fitted_kernel
        assert back.visits == fitted_kernel.visits
        doc = json.loads(path.read_text())
        assert doc["limit_mw"] == 0.02


class TestStepHelpers:
    def test_step_states_and_backward(self):
        points = make_points([(1, 2), (0, 3)], final_state=-1)
        z = step_states(points, 7)
        b = backward_times(points, 7)
        np.testing.assert_array_equal(z, [1, 1, 0, 0, 0, -1, -1])
        np.testing.assert_array_equal(b, [0, 1, 0, 1, 2, 0, 1])
