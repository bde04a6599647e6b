import math

import numpy as np
import pytest

from bellsim.core import SettingPair, enumerate_postselected
from bellsim.errors import (
    NonMonotonicTimestamps,
    ParseError,
    SettingConflict,
    UnsortedStream,
)
from bellsim.estimators import estimate_postselected
from bellsim.scenarios import build_scenario, lf_scenario, scenario_names
from bellsim.streams import (
    ClickEvent,
    ClickStream,
    CoincidenceRecord,
    FixedSettings,
    RandomSettings,
    RoundRobinSettings,
    Schedule,
    generate_streams,
    ingest_timetag_file,
    pair_coincidences,
    read_coincidence_csv,
    schedule_settings,
    write_coincidence_csv,
    write_timetag_file,
)

from helpers import mc_tolerance


def stream(station, *events):
    return ClickStream(station, tuple(ClickEvent(*e) for e in events))


class TestGenerate:
    def test_zero_detection_rate_gives_empty_streams(self):
        model = lf_scenario().model
        sched = Schedule.for_windows(50, 10, FixedSettings(1, 1))
        sa, sb = generate_streams(model, sched, 0.0, 7)
        assert len(sa) == 0 and len(sb) == 0

    def test_lf_fixed_pair_all_plus_one(self):
        model = lf_scenario().model
        sched = Schedule.for_windows(10, 10, FixedSettings(1, 1))
        sa, sb = generate_streams(model, sched, 1.0, 7)
        assert len(sa) == 10 and len(sb) == 10
        assert all(e.value == 1 for e in sa.events)
        assert all(e.value == 1 for e in sb.events)
        assert [e.t for e in sa.events] == [10 * k for k in range(10)]

    def test_round_robin_cycles_pairs(self):
        model = lf_scenario().model
        sched = Schedule.for_windows(8, 5, RoundRobinSettings())
        assignment = schedule_settings(model, sched, 0)
        assert assignment[:4] == [SettingPair(1, 1), SettingPair(1, -1),
                                  SettingPair(-1, 1), SettingPair(-1, -1)]
        assert assignment[4:] == assignment[:4]

    def test_workers_do_not_change_output(self):
        model = build_scenario("m2-demo").model
        sched = Schedule.for_windows(10_000, 100, RandomSettings())
        base = generate_streams(model, sched, 0.9, 13, workers=1)
        threaded = generate_streams(model, sched, 0.9, 13, workers=4)
        assert base[0].events == threaded[0].events
        assert base[1].events == threaded[1].events

    def test_schedule_settings_matches_generated_events(self):
        model = build_scenario("lhvm-socks").model
        sched = Schedule.for_windows(2_000, 10, RandomSettings())
        assignment = schedule_settings(model, sched, 3)
        sa, sb = generate_streams(model, sched, 1.0, 3)
        for e in sa.events:
            assert e.setting == assignment[e.t // 10].x
        for e in sb.events:
            assert e.setting == assignment[e.t // 10].y


class TestPairing:
    def test_empty_streams_empty_records(self):
        result = pair_coincidences(stream("A"), stream("B"), 10)
        assert result.records == []

    def test_lone_click_gets_zero_partner(self):
        result = pair_coincidences(stream("A", (5, 1, 1)), stream("B"), 10)
        assert result.records == [CoincidenceRecord(0, SettingPair(1, None), 1, 0)]

    def test_hand_worked_example(self):
        # A clicks at t=3 (+1) and t=7 (-1) in window 0; B clicks at t=12 (-1).
        sa = stream("A", (3, 1, 1), (7, 1, -1))
        sb = stream("B", (12, 2, -1))
        result = pair_coincidences(sa, sb, 10)
        assert result.records == [
            CoincidenceRecord(0, SettingPair(1, None), 1, 0),
            CoincidenceRecord(1, SettingPair(None, 2), 0, -1),
        ]
        assert result.dropped_a == 1 and result.dropped_b == 0

    def test_unsorted_stream_rejected(self):
        sa = stream("A", (9, 1, 1), (3, 1, 1))
        with pytest.raises(UnsortedStream):
            pair_coincidences(sa, stream("B"), 10)

    def test_same_window_setting_conflict(self):
        sa = stream("A", (1, 1, 1), (2, 2, 1))
        with pytest.raises(SettingConflict):
            pair_coincidences(sa, stream("B"), 10)

    def test_hint_fills_silent_side_and_cross_checks(self):
        sa = stream("A", (5, 1, 1))
        result = pair_coincidences(sa, stream("B"), 10, settings_hint=lambda k: (1, 2))
        assert result.records == [CoincidenceRecord(0, SettingPair(1, 2), 1, 0)]
        with pytest.raises(SettingConflict):
            pair_coincidences(sa, stream("B"), 10, settings_hint=lambda k: (2, 2))

    def test_never_produces_double_zero(self):
        gen = np.random.Generator(np.random.PCG64(2))
        ts = np.cumsum(gen.integers(1, 30, size=200))
        sa = stream("A", *[(int(t), 1, 1) for t in ts[::2]])
        sb = stream("B", *[(int(t), 1, -1) for t in ts[1::2]])
        for w in (7, 13, 104):
            for r in pair_coincidences(sa, sb, w).records:
                assert (r.a, r.b) != (0, 0)

    def test_fine_windows_never_merge_and_doubling_never_splits(self):
        gen = np.random.Generator(np.random.PCG64(5))
        ts = np.cumsum(gen.integers(5, 50, size=100))
        sa = stream("A", *[(int(t), 1, 1) for t in ts[:50]])
        sb = stream("B", *[(int(t), 1, -1) for t in ts[50:]])
        fine = pair_coincidences(sa, sb, 1)
        assert fine.dropped_a == 0 and fine.dropped_b == 0
        assert len(fine.records) == 100
        previous = len(fine.records)
        for w in (2, 4, 8, 16, 32):
            n = len(pair_coincidences(sa, sb, w).records)
            assert n <= previous
            previous = n

    def test_deterministic_on_reruns(self):
        sa = stream("A", (0, 1, 1), (1, 1, -1), (25, 2, 1))
        sb = stream("B", (3, 1, -1), (26, 1, -1))
        first = pair_coincidences(sa, sb, 10)
        second = pair_coincidences(sa, sb, 10)
        assert first.records == second.records

    def test_record_count_bounded_by_windows(self):
        model = lf_scenario().model
        sched = Schedule.for_windows(500, 10, RandomSettings())
        sa, sb = generate_streams(model, sched, 0.7, 19)
        result = pair_coincidences(sa, sb, 10)
        assert len(result.records) <= math.ceil(sched.duration_ns / sched.window_ns)


class TestRoundTrip:
    @pytest.mark.parametrize("name", scenario_names())
    def test_pipeline_converges_to_enumeration(self, name):
        scenario = build_scenario(name)
        model = scenario.model
        sched = Schedule.for_windows(20_000, 10, RandomSettings())
        sa, sb = generate_streams(model, sched, 1.0, 23)
        assignment = schedule_settings(model, sched, 23)
        pairing = pair_coincidences(sa, sb, 10, settings_hint=lambda k: assignment[k])
        cs = estimate_postselected(pairing.records)
        for sp in model.pairs():
            exact = enumerate_postselected(model, sp)
            got = cs.stats(*sp)
            assert abs(got.e_ab - float(exact.e_ab)) <= mc_tolerance(got.se_ab)
            assert abs(got.e_a - float(exact.e_a)) <= mc_tolerance(got.se_a)
            assert abs(got.e_b - float(exact.e_b)) <= mc_tolerance(got.se_b)


class TestFiles:
    def test_timetag_round_trip(self, tmp_path):
        model = lf_scenario().model
        sched = Schedule.for_windows(200, 10, RandomSettings())
        sa, _ = generate_streams(model, sched, 0.8, 29)
        path = tmp_path / "a.txt"
        write_timetag_file(sa, path)
        assert ingest_timetag_file(path, station="A") == sa

    def test_empty_file_gives_empty_stream(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("# nothing here\n")
        assert len(ingest_timetag_file(path)) == 0

    def test_three_lines_parsed_in_order(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("0\t1\t+1\n5\t1\t-1\n9\t2\t+1\n")
        got = ingest_timetag_file(path, station="B")
        assert got == stream("B", (0, 1, 1), (5, 1, -1), (9, 2, 1))

    def test_bad_outcome_names_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0\t1\t+1\n5\t1\t2\n")
        with pytest.raises(ParseError) as excinfo:
            ingest_timetag_file(path)
        assert excinfo.value.line_number == 2

    def test_nonmonotonic_timestamps_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("9\t1\t+1\n5\t1\t-1\n")
        with pytest.raises(NonMonotonicTimestamps):
            ingest_timetag_file(path)

    def test_coincidence_csv_round_trip(self, tmp_path):
        records = [
            CoincidenceRecord(0, SettingPair(1, 2), 1, -1),
            CoincidenceRecord(3, SettingPair(1, None), 1, 0),
            CoincidenceRecord(5, SettingPair(None, 2), 0, -1),
        ]
        path = tmp_path / "c.csv"
        write_coincidence_csv(records, path)
        assert read_coincidence_csv(path) == records

    def test_csv_rejects_double_zero(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("window,x,y,a,b\n0,1,1,0,0\n")
        with pytest.raises(ParseError):
            read_coincidence_csv(path)
