import json
import os
import tempfile
import unittest
from collections import Counter
from decimal import Decimal
from pathlib import Path
from unittest.mock import patch

import numpy as np

import cubic_census.census_run as census_run
from cubic_census.census_errors import (
    ConfigMismatchError,
    MalformedInputError,
    NonIntegralTraceError,
    ResumeMismatchError,
    UnsupportedCharacteristicError,
    UnsupportedFieldError,
)
from cubic_census.census_forms import CubicForm, form_from_dict
from cubic_census.census_gf import field_create
from cubic_census.census_ledger import predict
from cubic_census.census_run import (
    CensusConfig,
    CensusTally,
    census_chunk,
    coefficients_to_index,
    confidence_interval,
    enum_monic_forms,
    index_to_coefficients,
    merge_tallies,
    run_census,
    sample_indices,
    split_range,
    trace_from_count,
    trace_of,
)
from cubic_census.census_smoothness import ClassifiedBatch, classify_batch
from cubic_census.census_storage import load_checkpoint, report_without_metadata
from cubic_census.census_utils import class_count
from cubic_census.census_verify import verify_report

FIXTURES_DIR = Path(__file__).parent / "fixtures"


def load_fixture(name):
    return json.loads((FIXTURES_DIR / name).read_text(encoding="utf-8"))


class ClassIndexTests(unittest.TestCase):
    def test_block_boundaries(self):
        ctx = field_create(2)
        q = ctx.q
        coeffs = index_to_coefficients(ctx, [0, q**19 - 1, q**19, class_count(q) - 1])

        self.assertEqual(coeffs[0].tolist(), [1] + [0] * 19)
        self.assertEqual(coeffs[1].tolist(), [1] * 20)
        self.assertEqual(coeffs[2].tolist(), [0, 1] + [0] * 18)
        self.assertEqual(coeffs[3].tolist(), [0] * 19 + [1])

    def test_every_row_is_monic(self):
        ctx = field_create(3)
        coeffs = index_to_coefficients(ctx, np.arange(0, class_count(3), 7_654_321))
        leading = coeffs[np.arange(len(coeffs)), (coeffs != 0).argmax(axis=1)]

        self.assertTrue(np.all(leading == 1))

    def test_round_trip_through_the_index(self):
        ctx = field_create(2, 2)
        indices = [0, 5, 4**19 + 17, class_count(4) - 2]
        for index, row in zip(indices, index_to_coefficients(ctx, indices)):
            self.assertEqual(coefficients_to_index(CubicForm(ctx, tuple(int(v) for v in row))), index)

    def test_scalar_multiples_share_an_index(self):
        ctx = field_create(3)
        form = CubicForm(ctx, (0, 1, 2) + (0,) * 16 + (1,))
        doubled = CubicForm(ctx, tuple(ctx.mul(2, value) for value in form.coeffs))

        self.assertEqual(coefficients_to_index(form), coefficients_to_index(doubled))
        self.assertEqual(coefficients_to_index(doubled), 3**19 + 2 * 3**17 + 1)

    def test_large_fields_use_exact_integers(self):
        ctx = field_create(11)
        total = class_count(11)
        coeffs = index_to_coefficients(ctx, [total - 1, total - 2])

        self.assertEqual(coeffs[0].tolist(), [0] * 19 + [1])
        self.assertEqual(coeffs[1].tolist(), [0] * 18 + [1, 10])

    def test_out_of_range_indices_are_rejected(self):
        for ctx in (field_create(2), field_create(11)):
            with self.subTest(q=ctx.q):
                with self.assertRaises(MalformedInputError):
                    index_to_coefficients(ctx, [class_count(ctx.q)])
                with self.assertRaises(MalformedInputError):
                    index_to_coefficients(ctx, [-1])
        with self.assertRaises(MalformedInputError):
            coefficients_to_index(CubicForm(field_create(2), (0,) * 20))

    def test_enum_monic_forms_follows_the_index(self):
        ctx = field_create(2)
        forms = list(enum_monic_forms(ctx, 3, 6))

        self.assertEqual([coefficients_to_index(form) for form in forms], [3, 4, 5])


class TraceTests(unittest.TestCase):
    def test_trace_from_point_count(self):
        self.assertEqual(trace_from_count(13, 2), 3)
        self.assertEqual(trace_from_count(15, 2), 4)
        self.assertEqual(trace_from_count(7, 2), 0)
        with self.assertRaises(NonIntegralTraceError):
            trace_from_count(8, 2)

    def test_trace_of_fermat_over_gf2(self):
        ctx = field_create(2)
        form = form_from_dict(ctx, {(3, 0, 0, 0): 1, (0, 3, 0, 0): 1, (0, 0, 3, 0): 1, (0, 0, 0, 3): 1})

        self.assertEqual(trace_of(form), 0)


class SamplingTests(unittest.TestCase):
    def test_samples_depend_only_on_seed_and_position(self):
        full = sample_indices(4, 42, 0, 12)

        self.assertEqual(sample_indices(4, 42, 3, 9), full[3:9])
        self.assertNotEqual(sample_indices(4, 43, 0, 12), full)
        self.assertTrue(all(0 <= index < class_count(4) for index in full))

    def test_sample_config_needs_count_and_seed(self):
        ctx = field_create(5)
        with self.assertRaises(MalformedInputError):
            CensusConfig(ctx, mode="sample", samples=10)
        with self.assertRaises(MalformedInputError):
            CensusConfig(ctx, mode="sample", seed=1)
        with self.assertRaises(MalformedInputError):
            CensusConfig(ctx, mode="sample", samples=10, seed=-1)


class ConfigTests(unittest.TestCase):
    def test_unknown_mode_and_strategy(self):
        ctx = field_create(2)
        with self.assertRaisesRegex(ValueError, "mode must be one of"):
            CensusConfig(ctx, mode="guess")
        with self.assertRaisesRegex(ValueError, "strategy must be one of"):
            CensusConfig(ctx, strategy="guess")

    def test_exhaustive_mode_needs_a_64_bit_index(self):
        with self.assertRaises(UnsupportedFieldError):
            CensusConfig(field_create(11))
        self.assertEqual(CensusConfig(field_create(11), mode="sample", samples=5, seed=1).total, 5)

    def test_window_must_fit_the_class_range(self):
        ctx = field_create(2)
        with self.assertRaises(MalformedInputError):
            CensusConfig(ctx, window=(10, 5))
        with self.assertRaises(MalformedInputError):
            CensusConfig(ctx, window=(0, class_count(2) + 1))
        self.assertEqual(CensusConfig(ctx, window=(5, 10)).span, (5, 10))

    def test_only_result_fields_enter_the_hash(self):
        ctx = field_create(2)
        first = CensusConfig(ctx, window=(0, 100), partitions=1, workers=1)
        second = CensusConfig(ctx, window=(0, 100), partitions=4, workers=2, chunk_size=7)

        self.assertEqual(census_run.census_config_hash(first), census_run.census_config_hash(second))
        self.assertNotEqual(
            census_run.census_config_hash(first),
            census_run.census_config_hash(CensusConfig(ctx, window=(0, 100), strategy="search")),
        )

    def test_stored_gf2_report_carries_the_default_configuration_hash(self):
        config = CensusConfig(field_create(2))
        stored = load_fixture("census_q2_exhaustive.json")

        self.assertEqual(stored["config"], config.echo())
        self.assertEqual(stored["config_hash"], census_run.census_config_hash(config))

    def test_split_range_covers_the_span(self):
        self.assertEqual(split_range(0, 10, 3), [(0, 3), (3, 6), (6, 10)])
        self.assertEqual(split_range(5, 7, 4), [(5, 6), (6, 7)])


class TallyTests(unittest.TestCase):
    def setUp(self):
        self.config = CensusConfig(field_create(2), window=(0, 400), compute_lines=True)

    def test_merge_has_an_identity(self):
        tally = census_chunk(self.config, 0, 200)

        self.assertEqual(merge_tallies(CensusTally(), tally), tally)
        self.assertEqual(merge_tallies(tally, CensusTally()), tally)

    def test_merge_is_commutative_and_additive(self):
        first = census_chunk(self.config, 0, 150)
        second = census_chunk(self.config, 150, 400)
        merged = merge_tallies(first, second)

        self.assertEqual(merged, merge_tallies(second, first))
        self.assertEqual(merged, census_chunk(self.config, 0, 400))
        self.assertEqual(merged.visited, 400)
        self.assertEqual(sum(merged.trace_histogram.values()), merged.smooth_count)
        self.assertEqual(sum(merged.line_histogram.values()), merged.smooth_count)

    def test_tallies_from_other_configurations_do_not_merge(self):
        with self.assertRaises(ConfigMismatchError):
            merge_tallies(CensusTally(config_hash="a"), CensusTally(config_hash="b"))

    def test_dict_round_trip(self):
        tally = census_chunk(self.config, 0, 200)

        self.assertEqual(CensusTally.from_dict(tally.to_dict()), tally)

    def test_confidence_interval(self):
        tally = CensusTally(smooth_count=4, point_sum=28, point_square_sum=204, trace_histogram=Counter({0: 4}))
        interval = confidence_interval(tally)
        half_width = Decimal(interval["half_width"])

        self.assertEqual(interval["level"], "0.99")
        self.assertEqual(interval["centre"], {"num": 7, "den": 1})
        self.assertTrue(Decimal("2.1031") < half_width < Decimal("2.1032"))
        self.assertEqual(half_width.as_tuple().exponent, -6)
        self.assertIsNone(confidence_interval(CensusTally(smooth_count=1, point_sum=7, point_square_sum=49)))


class RunCensusTests(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.work_dir = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_partitioning_does_not_change_the_report(self):
        ctx = field_create(2)
        single = run_census(CensusConfig(ctx, window=(0, 3000), chunk_size=700, compute_lines=True), progress=False)
        split = run_census(
            CensusConfig(ctx, window=(0, 3000), chunk_size=700, partitions=3, compute_lines=True), progress=False
        )

        self.assertEqual(report_without_metadata(single), report_without_metadata(split))
        self.assertEqual(single["visited"], 3000)
        self.assertEqual(single["window"], [0, 3000])
        self.assertEqual(single["findings"], [])

    def test_thread_workers_match_inline_run(self):
        ctx = field_create(2)
        config = CensusConfig(ctx, window=(0, 1200), chunk_size=300, partitions=2, workers=2)
        inline = run_census(CensusConfig(ctx, window=(0, 1200), chunk_size=300), progress=False)

        with patch.object(census_run, "_make_executor", lambda workers: census_run.ThreadPoolExecutor(workers)):
            pooled = run_census(config, progress=False)

        self.assertEqual(report_without_metadata(inline), report_without_metadata(pooled))

    def test_stop_and_resume_matches_an_uninterrupted_run(self):
        ctx = field_create(2)
        checkpoint = self.work_dir / "census.ckpt.json"
        common = {"window": (0, 2800), "chunk_size": 700, "partitions": 2}

        stopped = run_census(CensusConfig(ctx, checkpoint_path=checkpoint, stop_after=1400, **common), progress=False)
        saved = load_checkpoint(checkpoint)
        resumed = run_census(CensusConfig(ctx, checkpoint_path=checkpoint, resume_path=checkpoint, **common), progress=False)
        uninterrupted = run_census(CensusConfig(ctx, **common), progress=False)

        self.assertIsNone(stopped)
        self.assertEqual(sum(item["next_index"] - item["start"] for item in saved["partitions"]), 1400)
        self.assertEqual(report_without_metadata(resumed), report_without_metadata(uninterrupted))
        self.assertEqual(resumed["run_metadata"]["resumed_from"], str(checkpoint))

    def test_resume_rejects_a_different_configuration(self):
        ctx = field_create(2)
        checkpoint = self.work_dir / "census.ckpt.json"
        run_census(CensusConfig(ctx, window=(0, 700), checkpoint_path=checkpoint), progress=False)

        with self.assertRaises(ResumeMismatchError):
            run_census(CensusConfig(ctx, window=(0, 700), strategy="search", resume_path=checkpoint), progress=False)

    def test_characteristic_three_needs_the_override(self):
        ctx = field_create(3)
        with self.assertRaises(UnsupportedCharacteristicError):
            run_census(CensusConfig(ctx, window=(0, 50)), progress=False)

        with self.assertLogs("cubic_census.census_run", level="WARNING"):
            report = run_census(CensusConfig(ctx, window=(0, 50), allow_char_3=True), progress=False)

        self.assertEqual(report["visited"], 50)

    def test_sample_runs_are_reproducible_across_partitions(self):
        ctx = field_create(2, 2)
        first = run_census(CensusConfig(ctx, mode="sample", samples=24, seed=7, chunk_size=5), progress=False)
        second = run_census(
            CensusConfig(ctx, mode="sample", samples=24, seed=7, chunk_size=9, partitions=3), progress=False
        )

        self.assertEqual(report_without_metadata(first), report_without_metadata(second))
        self.assertEqual(first["visited"], 24)
        self.assertEqual(first["confidence_interval"] is None, first["smooth_count"] < 2)

    def test_nonintegral_traces_become_findings(self):
        ctx = field_create(2)
        config = CensusConfig(ctx, window=(0, 200))
        coeffs = index_to_coefficients(ctx, range(200))
        smooth = int(classify_batch(ctx, coeffs, "cross_check").smooth.sum())

        with patch.object(census_run, "count_points_batch", side_effect=lambda ctx, rows: np.full(len(rows), 8)):
            with self.assertLogs("cubic_census.census_run", level="WARNING"):
                report = run_census(config, progress=False)

        self.assertEqual(report["nonintegral_count"], smooth)
        self.assertEqual(report["smooth_count"], 0)
        self.assertEqual(report["all_forms_point_sum"], 8 * 200)
        self.assertEqual({finding["kind"] for finding in report["findings"]}, {"nonintegral_trace"})
        indices = [finding["index"] for finding in report["findings"]]
        self.assertEqual(indices, sorted(indices))

    def test_oracle_disagreements_become_findings(self):
        ctx = field_create(2)

        def disagree_on_first(ctx, rows, strategy, depth):
            flags = np.zeros(len(rows), dtype=bool)
            flags[0] = True
            return ClassifiedBatch(smooth=np.ones(len(rows), dtype=bool), disagreement=flags)

        with patch.object(census_run, "classify_batch", side_effect=disagree_on_first):
            with self.assertLogs("cubic_census.census_run", level="WARNING"):
                report = run_census(CensusConfig(ctx, window=(0, 50)), progress=False)

        self.assertEqual(report["disagreement_count"], 1)
        self.assertEqual(report["findings"][0]["kind"], "oracle_disagreement")
        self.assertEqual(report["findings"][0]["index"], 0)
        self.assertEqual(report["smooth_count"], 50)


@unittest.skipUnless(os.environ.get("CUBIC_CENSUS_FULL_SWEEP"), "set CUBIC_CENSUS_FULL_SWEEP=1 for the full GF(2) census")
class FullSweepTests(unittest.TestCase):
    def test_gf2_census_matches_the_stored_report_and_the_predictions(self):
        workers = max(1, min(8, os.cpu_count() or 1))
        config = CensusConfig(field_create(2), partitions=workers, workers=workers)

        report = run_census(config, progress=False)

        self.assertEqual(report_without_metadata(report), report_without_metadata(load_fixture("census_q2_exhaustive.json")))
        self.assertEqual(report["smooth_count"], 322560)
        self.assertEqual(report["point_sum"], 2257920)
        self.assertTrue(verify_report(report, predict(2))["passed"])


if __name__ == "__main__":
    unittest.main()
