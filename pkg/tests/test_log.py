import json

import pytest

from predkit.errors import CorruptLogError
from predkit.service.log import DecisionLog, read_log, scan_log


def record_bytes(records) -> bytes:
    return b"".join(json.dumps(r).encode() + b"\n" for r in records)


def sample_records(count):
    return [{"seq": i, "kind": "faulty", "image_id": f"img{i}", "object_idx": 0} for i in range(count)]


class TestReadLog:
    def test_empty(self):
        assert read_log(b"") == []

    def test_replay_round_trip(self):
        records = sample_records(10)
        assert read_log(record_bytes(records)) == records

    def test_torn_final_record_discarded(self):
        data = record_bytes(sample_records(100))
        truncated = data[: len(data) - 7]  # cut into the last record
        assert read_log(truncated) == sample_records(99)

    def test_truncation_at_every_byte_keeps_a_prefix(self):
        records = sample_records(5)
        data = record_bytes(records)
        for cut in range(len(data)):
            kept = read_log(data[:cut])
            assert kept == records[: len(kept)]

    def test_corruption_before_end_is_refused(self):
        data = record_bytes(sample_records(3))
        clobbered = data.replace(b'"seq": 1', b'"seq" 1', 1)
        with pytest.raises(CorruptLogError):
            read_log(clobbered)

    def test_sequence_gap_is_refused(self):
        records = sample_records(3)
        records[2]["seq"] = 7
        with pytest.raises(CorruptLogError):
            read_log(record_bytes(records))

    def test_scan_reports_committed_prefix_length(self):
        data = record_bytes(sample_records(2))
        records, offset = scan_log(data + b'{"seq": 2')
        assert len(records) == 2
        assert offset == len(data)


class TestDecisionLog:
    def test_append_assigns_sequence(self, tmp_path):
        log = DecisionLog(tmp_path / "d.log", fsync=False)
        log.append({"kind": "faulty", "image_id": "a", "object_idx": 0})
        log.append({"kind": "faulty", "image_id": "b", "object_idx": 1})
        log.close()
        records = read_log((tmp_path / "d.log").read_bytes())
        assert [r["seq"] for r in records] == [0, 1]

    def test_reopen_continues_sequence(self, tmp_path):
        path = tmp_path / "d.log"
        log = DecisionLog(path, fsync=False)
        log.append({"kind": "faulty", "image_id": "a", "object_idx": 0})
        log.close()
        log = DecisionLog(path, fsync=False)
        assert log.next_seq == 1
        log.append({"kind": "faulty", "image_id": "b", "object_idx": 1})
        log.close()
        assert [r["seq"] for r in read_log(path.read_bytes())] == [0, 1]

    def test_append_after_torn_tail_truncates_first(self, tmp_path):
        path = tmp_path / "d.log"
        log = DecisionLog(path, fsync=False)
        log.append({"kind": "faulty", "image_id": "a", "object_idx": 0})
        log.close()
        with open(path, "ab") as handle:
            handle.write(b'{"seq": 1, "kind"')  # simulate crash mid-append
        log = DecisionLog(path, fsync=False)
        assert log.next_seq == 1
        log.append({"kind": "faulty", "image_id": "b", "object_idx": 1})
        log.close()
        records = read_log(path.read_bytes())
        assert len(records) == 2
        assert records[1]["image_id"] == "b"
