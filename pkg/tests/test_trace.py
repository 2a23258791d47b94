import io

import numpy as np
import pytest

from specmab.trace import RunTrace


def make_trace():
    return RunTrace(num_players=2, horizon=100, optimal_profile=(0, 1), j1=1.5)


class TestCheckpoints:
    def test_constant_segment_checkpoints_exact(self):
        trace = make_trace()
        trace.add_exploit(1, (0, 1), 20, 0.5)
        # checkpoints at 1, 2, 4, 8, 16 inside the segment
        assert trace.checkpoints == [(1, 0.5), (2, 1.0), (4, 2.0), (8, 4.0), (16, 8.0)]
        assert trace.total_regret == pytest.approx(10.0)

    def test_vector_segment_checkpoints_exact(self):
        trace = make_trace()
        per_unit = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        actions = np.zeros((5, 2), dtype=int)
        trace.add_exploration(1, actions, per_unit)
        assert trace.checkpoints == [(1, 1.0), (2, 3.0), (4, 10.0)]
        assert trace.total_regret == pytest.approx(15.0)

    def test_checkpoint_spanning_segments(self):
        trace = make_trace()
        trace.add_play(1, (0, 1), 3, 1.0)
        trace.add_play(1, (1, 0), 10, 0.2)
        # t=4 falls one unit into the second segment: 3.0 + 0.2
        assert (4, pytest.approx(3.2)) in [
            (t, pytest.approx(r)) for t, r in trace.checkpoints
        ]

    def test_cumulative_regret_monotone(self):
        trace = make_trace()
        rng = np.random.default_rng(0)
        for i in range(30):
            trace.add_play(1, (0, 0), int(rng.integers(1, 5)), float(rng.uniform(0, 1)))
        values = [r for _, r in trace.checkpoints]
        assert all(b >= a for a, b in zip(values, values[1:]))


class TestRows:
    def test_row_count_matches_elapsed(self):
        trace = make_trace()
        trace.add_exploration(1, np.array([[0, 1], [1, 1]]), np.array([0.0, 1.15]))
        trace.add_play(1, (0, 1), 3, 0.0)
        trace.add_exploit(1, (0, 1), 4, 0.0)
        rows = list(trace.iter_rows())
        assert len(rows) == trace.elapsed == 9
        times = [r[0] for r in rows]
        assert times == list(range(9))

    def test_csv_round_trip(self):
        trace = make_trace()
        trace.add_exploration(1, np.array([[0, 1]]), np.array([0.35]))
        trace.add_play(1, (1, 0), 2, 0.2)
        buffer = io.StringIO()
        trace.write_csv(buffer)
        lines = buffer.getvalue().strip().split("\n")
        assert lines[0] == "time,epoch,phase,action_0,action_1,regret"
        assert lines[1] == "0,1,explore,0,1,0.35"
        assert lines[2] == "1,1,match,1,0,0.2"
        assert lines[3] == "2,1,match,1,0,0.2"

    def test_csv_deterministic_bytes(self):
        def build():
            trace = make_trace()
            trace.add_exploration(1, np.array([[0, 1], [1, 0]]), np.array([0.1, 0.9]))
            trace.add_exploit(1, (0, 1), 3, 1 / 3)
            buffer = io.StringIO()
            trace.write_csv(buffer)
            return buffer.getvalue()

        assert build() == build()


class TestSummary:
    def test_final_completed_epoch(self):
        trace = make_trace()
        trace.record_epoch(1, (1, 0), True, [np.array([1, 0])] * 2, [np.zeros((2, 2))] * 2)
        trace.record_epoch(2, (0, 1), True, [np.array([0, 2])] * 2, [np.zeros((2, 2))] * 2)
        trace.record_epoch(3, (0, 0), False, [np.array([0, 0])] * 2, [np.zeros((2, 2))] * 2)
        final = trace.final_completed_epoch()
        assert final["epoch"] == 2
        assert final["matched_optimal"]

    def test_summary_fields(self):
        trace = make_trace()
        trace.add_exploit(1, (0, 1), 8, 0.25)
        trace.record_epoch(1, (0, 1), True, [np.zeros(2)] * 2, [np.zeros((2, 2))] * 2)
        trace.finish([np.zeros((2, 2)), np.zeros((2, 2))])
        summary = trace.summary()
        assert summary["total_regret"] == pytest.approx(2.0)
        assert summary["regret_per_unit"] == pytest.approx(0.25)
        assert summary["final_completed_epoch"] == 1
        assert summary["final_matched_optimal"] is True
        assert summary["regret_checkpoints"] == [[1, 0.25], [2, 0.5], [4, 1.0], [8, 2.0]]
        assert summary["truncated"] is None

    def test_empty_trace_summary(self):
        trace = make_trace()
        trace.finish([None, None])
        summary = trace.summary()
        assert summary["total_regret"] == 0.0
        assert summary["final_completed_epoch"] is None

    def test_phase_boundaries_merge_plays(self):
        trace = make_trace()
        trace.add_exploration(1, np.zeros((4, 2), dtype=int), np.zeros(4))
        trace.add_play(1, (0, 1), 3, 0.1)
        trace.add_play(1, (1, 0), 3, 0.2)
        trace.add_exploit(1, (0, 1), 5, 0.0)
        trace.add_exploration(2, np.zeros((4, 2), dtype=int), np.zeros(4))
        boundaries = trace.phase_boundaries()
        assert boundaries == [
            {"epoch": 1, "phase": "explore", "t_start": 0, "t_end": 4},
            {"epoch": 1, "phase": "match", "t_start": 4, "t_end": 10},
            {"epoch": 1, "phase": "exploit", "t_start": 10, "t_end": 15},
            {"epoch": 2, "phase": "explore", "t_start": 15, "t_end": 19},
        ]
