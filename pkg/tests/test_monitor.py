"""Trial monitor: transition semantics, stream integrity, durable formats,
and agreement of the induced stopping law with the closed forms."""

import json
import math

import numpy as np
import pytest

from curtail.characteristics import power
from curtail.design import TestDesign
from curtail.distributions import binom_tail, negbin_cdf
from curtail.monitor import (
    Decision,
    DuplicateSequenceError,
    EventLogError,
    MonitorState,
    Observation,
    SequenceGapError,
    SnapshotCorruptionError,
    SnapshotVersionError,
    Status,
    TerminalStateError,
    decision,
    feed_outcomes,
    monitor_new,
    observe,
    persist,
    read_event_log,
    restore,
)
from curtail.simulation import replication_rng


def make_design(n, k, theta0=0.1, theta1=0.2):
    return TestDesign(n, k, binom_tail(k, n, theta0),
                      1 - binom_tail(k, n, theta1), "exact", theta0, theta1)


def obs_batch(outcomes, start=1):
    return [Observation(f"s{start + i}", o, start + i) for i, o in enumerate(outcomes)]


class TestTransitions:
    def test_stop_at_k_plus_one(self):
        design = make_design(5, 1)
        result = feed_outcomes(monitor_new(design), [0, 1, 1])
        assert result.state.status is Status.STOPPED_REJECTED
        assert result.state.m_star == 3
        assert result.state.s_n == 2
        assert decision(result.state) is Decision.REJECT_H0

    def test_batch_truncates_after_stop(self):
        design = make_design(5, 1)
        result = feed_outcomes(monitor_new(design), [0, 1, 1, 0, 0])
        assert result.consumed == 3
        assert result.unconsumed == 2
        assert result.state.n == 3

    def test_complete_without_rejection(self):
        design = make_design(5, 1)
        result = feed_outcomes(monitor_new(design), [0, 1, 0, 0, 0])
        assert result.state.status is Status.COMPLETED_NOT_REJECTED
        assert result.state.m_star == 5
        assert result.state.s_n == 1
        assert decision(result.state) is Decision.NOT_REJECT_H0

    def test_truncates_at_n_star(self):
        design = make_design(4, 3)
        result = feed_outcomes(monitor_new(design), [0, 0, 0, 0, 0, 0])
        assert result.state.status is Status.COMPLETED_NOT_REJECTED
        assert result.consumed == 4
        assert result.unconsumed == 2

    def test_incremental_feeding(self):
        design = make_design(6, 1)
        state = monitor_new(design)
        state = feed_outcomes(state, [0, 1]).state
        assert state.status is Status.RUNNING
        assert decision(state) is Decision.CONTINUE
        state = feed_outcomes(state, [1]).state
        assert state.status is Status.STOPPED_REJECTED
        assert state.m_star == 3

    def test_terminal_reuse_rejected(self):
        design = make_design(3, 0)
        state = feed_outcomes(monitor_new(design), [1]).state
        with pytest.raises(TerminalStateError):
            feed_outcomes(state, [0])
        with pytest.raises(TerminalStateError):
            observe(state, obs_batch([0], start=1))


class TestSequenceIntegrity:
    def test_contiguous_batches_ok(self):
        design = make_design(6, 2)
        state = observe(monitor_new(design), obs_batch([0, 0, 1])).state
        state = observe(state, obs_batch([0, 1], start=4)).state
        assert state.n == 5

    def test_gap_raises(self):
        design = make_design(6, 2)
        with pytest.raises(SequenceGapError):
            observe(monitor_new(design), [Observation("a", 0, 2)])

    def test_duplicate_in_batch_raises(self):
        design = make_design(6, 2)
        batch = [Observation("a", 0, 1), Observation("b", 0, 1)]
        with pytest.raises(DuplicateSequenceError):
            observe(monitor_new(design), batch)

    def test_replayed_old_sequence_raises(self):
        design = make_design(6, 2)
        state = observe(monitor_new(design), obs_batch([0, 0])).state
        with pytest.raises(DuplicateSequenceError):
            observe(state, [Observation("x", 0, 2)])

    def test_observation_validation(self):
        with pytest.raises(EventLogError):
            Observation("a", 2, 1)
        with pytest.raises(EventLogError):
            Observation("a", 0, 0)


class TestSnapshots:
    def test_round_trip_and_idempotent_bytes(self):
        design = make_design(10, 2)
        state = feed_outcomes(monitor_new(design), [0, 1, 0]).state
        blob = persist(state)
        assert persist(state) == blob  # canonical, byte-stable
        restored = restore(blob)
        assert restored == state
        assert persist(restored) == blob

    def test_terminal_round_trip(self):
        design = make_design(4, 0)
        state = feed_outcomes(monitor_new(design), [0, 1]).state
        restored = restore(persist(state))
        assert restored.status is Status.STOPPED_REJECTED
        assert restored.m_star == 2

    def test_corruption_detected(self):
        blob = persist(monitor_new(make_design(10, 2)))
        tampered = blob.replace(b'"n":0', b'"n":1')
        with pytest.raises(SnapshotCorruptionError):
            restore(tampered)
        with pytest.raises(SnapshotCorruptionError):
            restore(b"not json at all")
        with pytest.raises(SnapshotCorruptionError):
            restore(b'{"no": "checksum"}')

    def test_unknown_version_rejected(self):
        import hashlib
        body = json.loads(persist(monitor_new(make_design(10, 2))))
        del body["checksum"]
        body["format_version"] = 99
        canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
        body["checksum"] = hashlib.sha256(canon.encode()).hexdigest()
        blob = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
        with pytest.raises(SnapshotVersionError):
            restore(blob)


class TestEventLog:
    def test_parses_records(self):
        lines = [
            '{"seq": 1, "subject": "a", "outcome": 0}',
            "",
            '{"seq": 2, "subject": "b", "outcome": 1, "ts": "2021-03-01T00:00:00Z"}',
        ]
        obs = list(read_event_log(lines))
        assert [o.sequence_no for o in obs] == [1, 2]
        assert obs[1].ts == "2021-03-01T00:00:00Z"

    def test_rejects_unknown_keys(self):
        with pytest.raises(EventLogError):
            list(read_event_log(['{"seq": 1, "subject": "a", "outcome": 0, "extra": 1}']))

    def test_rejects_bad_json_and_types(self):
        with pytest.raises(EventLogError):
            list(read_event_log(["{not json"]))
        with pytest.raises(EventLogError):
            list(read_event_log(["[1, 2]"]))
        with pytest.raises(EventLogError):
            list(read_event_log(['{"seq": 1, "subject": "a", "outcome": 5}']))
        with pytest.raises(EventLogError):
            list(read_event_log(['{"subject": "a", "outcome": 0}']))


class TestStoppingLaw:
    def test_empirical_law_matches_closed_form(self):
        # Stream Bernoulli data through the monitor and compare the induced
        # M* law with the curtailed negative binomial, plus rejection rate
        # with the power formula.
        design = make_design(50, 4, theta0=0.1, theta1=0.3)
        theta, reps = 0.2, 20000
        m_stars = np.empty(reps, dtype=np.int64)
        rejected = np.empty(reps, dtype=bool)
        for i in range(reps):
            rng = replication_rng(606, i)
            draws = (rng.integers(0, 2**64, size=design.n_star, dtype=np.uint64)
                     / 2.0**64 < theta).astype(np.int64)
            state = feed_outcomes(monitor_new(design), draws).state
            m_stars[i] = state.m_star
            rejected[i] = state.status is Status.STOPPED_REJECTED

        # rejection frequency within 3 MC standard errors of the power
        p = power(design, theta)
        se = math.sqrt(p * (1 - p) / reps)
        assert abs(rejected.mean() - p) <= 3 * se

        # KS-style sup distance on the lattice against the exact law
        sup = 0.0
        for j in range(design.k_star + 1, design.n_star):
            exact = negbin_cdf(j, design.k_star + 1, theta)
            emp = float((m_stars <= j).mean())
            sup = max(sup, abs(emp - exact))
        assert sup < 0.02
