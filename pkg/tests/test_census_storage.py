import csv
import json
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import cubic_census.census_storage as census_storage
from cubic_census.census_errors import MalformedInputError
from cubic_census.census_storage import (
    default_report_path,
    export_histogram_csv,
    load_checkpoint,
    load_json_file,
    load_report,
    report_without_metadata,
    write_checkpoint,
    write_report,
)


def make_report(line_histogram=None):
    return {
        "q": 2,
        "mode": "exhaustive",
        "total_indexed": 5,
        "visited": 5,
        "smooth_count": 3,
        "point_sum": 27,
        "trace_histogram": {"-1": 1, "0": 1, "3": 1},
        "line_histogram": line_histogram,
        "all_forms_point_sum": 41,
        "findings": [],
        "disagreement_count": 0,
        "nonintegral_count": 0,
        "run_metadata": {"created_at": "2026-01-01T00:00:00+00:00", "duration_seconds": 1.5},
    }


class CensusStorageTests(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.data_dir = Path(self.temp_dir.name)

        self.patches = [
            patch.object(census_storage, "DATA_DIR", self.data_dir),
        ]
        for active_patch in self.patches:
            active_patch.start()

    def tearDown(self):
        for active_patch in reversed(self.patches):
            active_patch.stop()
        self.temp_dir.cleanup()

    def test_default_report_path_lives_in_the_data_directory(self):
        self.assertEqual(default_report_path(4, "sample"), self.data_dir / "census_q4_sample.json")

    def test_report_round_trip(self):
        path = write_report(make_report(), default_report_path(2, "exhaustive"))

        self.assertEqual(load_report(path), make_report())
        self.assertFalse(path.with_name(path.name + ".tmp").exists())

    def test_unreadable_reports_are_rejected(self):
        garbage = self.data_dir / "garbage.json"
        garbage.write_text("{not json", encoding="utf-8")
        partial = self.data_dir / "partial.json"
        partial.write_text(json.dumps({"q": 2, "mode": "exhaustive"}), encoding="utf-8")

        with self.assertRaises(MalformedInputError):
            load_report(garbage)
        with self.assertRaisesRegex(MalformedInputError, "smooth_count"):
            load_report(partial)
        with self.assertRaises(MalformedInputError):
            load_report(self.data_dir / "missing.json")

    def test_reports_missing_verification_fields_are_rejected(self):
        for key in ("total_indexed", "findings", "all_forms_point_sum", "disagreement_count", "nonintegral_count"):
            with self.subTest(key=key):
                report = make_report()
                del report[key]
                path = self.data_dir / f"without_{key}.json"
                path.write_text(json.dumps(report), encoding="utf-8")

                with self.assertRaisesRegex(MalformedInputError, key):
                    load_report(path)

    def test_reports_with_mistyped_fields_are_rejected(self):
        for key, value in (("point_sum", "27"), ("findings", {}), ("visited", True), ("line_histogram", [1])):
            with self.subTest(key=key):
                report = make_report()
                report[key] = value
                path = self.data_dir / f"mistyped_{key}.json"
                path.write_text(json.dumps(report), encoding="utf-8")

                with self.assertRaisesRegex(MalformedInputError, f"wrong type: {key}"):
                    load_report(path)

    def test_load_json_file_returns_a_copy_of_the_default(self):
        default = {"items": []}
        loaded = load_json_file(self.data_dir / "missing.json", default)
        loaded["items"].append(1)

        self.assertEqual(default, {"items": []})

    def test_metadata_is_dropped_for_comparison(self):
        stripped = report_without_metadata(make_report())

        self.assertNotIn("run_metadata", stripped)
        self.assertEqual(stripped["point_sum"], 27)

    def test_checkpoint_round_trip_keeps_large_integers(self):
        path = self.data_dir / "run.ckpt.json"
        big = 3**40
        tally = {"visited": 10, "trace_histogram": {"0": 10}}
        write_checkpoint(path, "abc123", [{"start": big, "stop": big + 100, "next_index": big + 10, "tally": tally}])

        checkpoint = load_checkpoint(path)

        self.assertEqual(checkpoint["config_hash"], "abc123")
        self.assertEqual(
            checkpoint["partitions"], [{"start": big, "stop": big + 100, "next_index": big + 10, "tally": tally}]
        )
        self.assertEqual(json.loads(path.read_text(encoding="utf-8"))["partitions"][0]["start"], str(big))

    def test_reports_are_not_checkpoints(self):
        path = write_report(make_report(), self.data_dir / "report.json")

        with self.assertRaisesRegex(MalformedInputError, "not a census checkpoint"):
            load_checkpoint(path)

    def test_histograms_export_as_csv_in_numeric_order(self):
        report = make_report(line_histogram={"3": 2, "15": 1})
        written = export_histogram_csv(report, self.data_dir / "exports" / "census_q2")

        self.assertEqual([path.name for path in written], ["census_q2_traces.csv", "census_q2_lines.csv"])
        with written[0].open(encoding="utf-8", newline="") as handle:
            self.assertEqual(list(csv.reader(handle)), [["t", "count"], ["-1", "1"], ["0", "1"], ["3", "1"]])
        with written[1].open(encoding="utf-8", newline="") as handle:
            self.assertEqual(list(csv.reader(handle)), [["lines", "count"], ["3", "2"], ["15", "1"]])

    def test_line_csv_is_skipped_without_line_counts(self):
        written = export_histogram_csv(make_report(), self.data_dir / "census_q2")

        self.assertEqual(len(written), 1)


if __name__ == "__main__":
    unittest.main()
