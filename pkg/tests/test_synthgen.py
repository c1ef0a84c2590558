import unittest
import warnings
from datetime import timedelta
from pathlib import Path

from fixtures import DAY, TempRoot, small_scenario
from wave_archive.extract.bundle import parse_extract_day, validate_row_counts
from wave_archive.extract.manifest import verify_bundle
from wave_archive.linkage import BedLabelMap, link_day, sanitize_adt
from wave_archive.synthgen import (
    AdtNoise,
    LinkageScore,
    ScenarioConfig,
    device_bed_label,
    emr_bed_label,
    generate_day,
    load_truth,
    score_linkage,
    summarize_scores,
)
from wave_archive.utils.errors import ConfigInvalid

CONFIG_DIR = Path(__file__).resolve().parents[1] / "config"


def parse(bundle_dir):
    return parse_extract_day(verify_bundle(bundle_dir))


def stays_of(truth):
    return sorted((s.mrn, s.visit_id, s.bed_label, s.start, s.end) for s in truth.segments)


class TestGeneration(unittest.TestCase):
    def setUp(self):
        self.root = TempRoot()

    def tearDown(self):
        self.root.cleanup()

    def test_same_seed_same_bytes(self):
        """
        Generating a day twice with one scenario writes byte-identical files
        """
        config = small_scenario(seed=5)
        first, _ = generate_day(config, DAY, self.root.path / "a")
        second, _ = generate_day(config, DAY, self.root.path / "b")
        names = sorted(p.name for p in first.iterdir())
        self.assertEqual(names, sorted(p.name for p in second.iterdir()))
        for name in names:
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), name)
        self.assertEqual((self.root.path / "a" / "2021-03-01.truth.json").read_bytes(),
                         (self.root.path / "b" / "2021-03-01.truth.json").read_bytes())

    def test_other_seed_other_day(self):
        """
        A different seed draws different patients
        """
        _, first = generate_day(small_scenario(seed=5), DAY, self.root.path / "a")
        _, second = generate_day(small_scenario(seed=6), DAY, self.root.path / "b")
        self.assertNotEqual([p.mrn for p in first.patients], [p.mrn for p in second.patients])

    def test_bundle_verifies_and_counts_match(self):
        """
        The written bundle passes its manifest and its row counts agree with the truth
        """
        bundle_dir, truth = generate_day(small_scenario(seed=7), DAY, self.root.extracts)
        bundle = parse(bundle_dir)
        self.assertTrue(validate_row_counts(bundle).ok)
        self.assertEqual(len(bundle.numerics), truth.row_counts["numerics"])
        self.assertEqual(load_truth(self.root.extracts, DAY).to_dict(), truth.to_dict())

    def test_truth_describes_the_day(self):
        """
        Stays fit in the day, patients are minors and wave counts are positive
        """
        _, truth = generate_day(small_scenario(seed=8), DAY, self.root.extracts)
        self.assertEqual(len(truth.patients), 4)
        self.assertEqual(set(truth.birthdates()), {p.mrn for p in truth.patients})
        for segment in truth.segments:
            self.assertTrue(segment.start <= segment.data_start < segment.data_end <= segment.end)
            self.assertEqual(segment.start.date(), DAY)
            self.assertTrue(all(n > 0 for n in segment.waves.values()))
        for patient in truth.patients:
            self.assertLess((DAY - patient.birth_date).days, 18 * 365)
        expected = truth.expected_stats()
        self.assertEqual(expected["studies"], len(truth.segments))
        self.assertEqual(expected["patients"], 4)

    def test_clean_adt_sanitizes_to_the_stays(self):
        """
        Without noise the sanitized ADT stays are exactly the generated stays
        """
        bundle_dir, truth = generate_day(small_scenario(seed=9), DAY, self.root.extracts)
        bundle = parse(bundle_dir)
        stays = sanitize_adt(bundle.adt_events(), bundle.bounds)
        self.assertEqual(sorted((s.mrn, s.visit_id, s.bed, s.start, s.end) for s in stays), stays_of(truth))
        self.assertEqual(truth.noise, {"zero_length_pairs": 0, "duplicates": 0, "readmit_chains": 0})

    def test_sanitizer_removes_injected_noise(self):
        """
        Zero-length pairs, duplicates and readmit chains all disappear in sanitizing
        """
        injected = 0
        for seed in range(1, 6):
            config = ScenarioConfig.noisy(seed, adt_jitter_seconds=0, adt_missing_fraction=0.0)
            bundle_dir, truth = generate_day(config, DAY, self.root.extracts / str(seed))
            bundle = parse(bundle_dir)
            stays = sanitize_adt(bundle.adt_events(), bundle.bounds,
                                 readmit_gap=timedelta(seconds=config.readmit_gap_seconds))
            self.assertEqual(sorted((s.mrn, s.visit_id, s.bed, s.start, s.end) for s in stays),
                             stays_of(truth))
            self.assertFalse(any(s.unpaired for s in stays))
            injected += sum(truth.noise.values())
        self.assertGreater(injected, 0)

    def test_bed_labels(self):
        """
        Device and EMR labels of one bed index correspond under the NATO rule
        """
        self.assertEqual((device_bed_label(0), emr_bed_label(0)), ("01ALPHA", "A01"))
        self.assertEqual((device_bed_label(27), emr_bed_label(27)), ("02BRAVO", "B02"))
        bed_map = BedLabelMap()
        for index in (0, 9, 23, 25, 51):
            self.assertEqual(bed_map.normalize(device_bed_label(index)), emr_bed_label(index))


class TestLinkageScoring(unittest.TestCase):
    def setUp(self):
        self.root = TempRoot()

    def tearDown(self):
        self.root.cleanup()

    def score(self, config, out):
        bundle_dir, truth = generate_day(config, DAY, out)
        bundle = parse(bundle_dir)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            results, _ = link_day(bundle, BedLabelMap(),
                                  readmit_gap=timedelta(seconds=config.readmit_gap_seconds))
        return score_linkage(results, truth)

    def test_clean_corpus_links_perfectly(self):
        """
        On clean days every stay without a lifetime id is linked to the right patient
        """
        for seed in (21, 22, 23):
            score = self.score(small_scenario(seed=seed, missing_lifetime_id_fraction=1.0),
                               self.root.extracts / str(seed))
            self.assertGreater(score.missing_id, 0)
            self.assertEqual(score.coverage, 1.0)
            self.assertEqual(score.accuracy, 1.0)

    def test_noisy_corpus_meets_targets(self):
        """
        Over seeds 1..20 the noisy profile averages coverage >= 0.75 and accuracy >= 0.92
        """
        scores = []
        for seed in range(1, 21):
            config = ScenarioConfig.noisy(seed, waves=["Resp"], waves_per_patient=(1, 1))
            scores.append(self.score(config, self.root.extracts / str(seed)))
        summary = summarize_scores(scores)
        self.assertEqual(summary["coverage"]["n"], 20)
        self.assertGreaterEqual(summary["coverage"]["mean"], 0.75)
        self.assertGreaterEqual(summary["accuracy"]["mean"], 0.92)

    def test_withheld_evidence_links_nothing(self):
        """
        With no device logs and no ADT rows, coverage is 0 and accuracy is undefined
        """
        config = small_scenario(seed=4, device_log_fraction=0.0, adt_missing_fraction=1.0,
                                missing_lifetime_id_fraction=1.0)
        score = self.score(config, self.root.extracts)
        self.assertEqual(score.coverage, 0.0)
        self.assertIsNone(score.accuracy)
        self.assertEqual(score.assigned, 0)

    def test_lifetime_ids_everywhere(self):
        """
        When every stream carries a lifetime id, coverage is vacuously 1.0
        """
        config = small_scenario(seed=4, missing_lifetime_id_fraction=0.0, or_shared_stream_fraction=0.0)
        score = self.score(config, self.root.extracts)
        self.assertEqual(score.missing_id, 0)
        self.assertEqual(score.coverage, 1.0)
        self.assertIsNone(score.accuracy)

    def test_summary_interval(self):
        """
        The 95% interval brackets the mean; days without inferred links are left out of accuracy
        """
        scores = [
            LinkageScore(coverage=c, accuracy=a, missing_id=10, covered=int(c * 10), assigned=4, correct=4,
                         unscored=0)
            for c, a in ((0.8, 1.0), (0.9, 0.9), (1.0, None), (0.7, 0.95))
        ]
        summary = summarize_scores(scores)
        low, high = summary["coverage"]["ci_95"]
        self.assertAlmostEqual(summary["coverage"]["mean"], 0.85)
        self.assertTrue(low < 0.85 < high)
        self.assertEqual(summary["accuracy"]["n"], 3)
        self.assertEqual(summarize_scores(scores[:1])["coverage"]["ci_95"], (0.8, 0.8))
        self.assertIsNone(summarize_scores([])["coverage"]["mean"])


class TestScenarioConfig(unittest.TestCase):
    def test_invalid_values(self):
        """
        Out-of-range rates, unknown waves and short stays are refused
        """
        bad = [
            dict(transfer_rate=1.5),
            dict(adt_noise=AdtNoise(duplicates=-0.1)),
            dict(waves=["II", "Bogus"]),
            dict(waves=["II", "II"]),
            dict(waves=["II"], waves_per_patient=(1, 2)),
            dict(stay_minutes=(10, 60)),
            dict(adt_jitter_seconds=601),
            dict(readmit_gap_seconds=0),
            dict(beds=0),
        ]
        for overrides in bad:
            with self.subTest(overrides=overrides):
                with self.assertRaises(ConfigInvalid):
                    ScenarioConfig.clean(1, **overrides)

    def test_profiles(self):
        """
        The clean profile injects no noise; the noisy one does and withholds evidence
        """
        clean = ScenarioConfig.clean(3)
        noisy = ScenarioConfig.noisy(3, beds=4)
        self.assertTrue(clean.adt_noise.silent)
        self.assertFalse(noisy.adt_noise.silent)
        self.assertLess(noisy.device_log_fraction, 1.0)
        self.assertEqual(noisy.beds, 4)
        self.assertEqual(clean.day_list, [DAY])

    def test_from_dict(self):
        """
        Scenario mappings pick a profile and reject unknown keys
        """
        config = ScenarioConfig.from_dict({
            "profile": "noisy", "seed": 4, "days": 2, "start_day": "2021-03-01",
            "stay_minutes": [40, 50], "adt_noise": {"duplicates": 0.2},
        })
        self.assertEqual(config.stay_minutes, (40, 50))
        self.assertEqual(config.adt_noise, AdtNoise(duplicates=0.2))
        self.assertEqual(config.day_list[-1], DAY + timedelta(days=1))
        for data in ({"seed": 1, "profile": "loud"}, {"seed": 1, "colour": "red"}, {"days": 2}):
            with self.subTest(data=data):
                with self.assertRaises(ConfigInvalid):
                    ScenarioConfig.from_dict(data)

    def test_shipped_scenarios_load(self):
        """
        The scenario files in config/ are valid
        """
        clean = ScenarioConfig.load(str(CONFIG_DIR / "scenario_clean.yaml"))
        noisy = ScenarioConfig.load(str(CONFIG_DIR / "scenario_noisy.yaml"))
        self.assertTrue(clean.adt_noise.silent)
        self.assertEqual(noisy.days, 3)
        self.assertEqual(noisy.adt_noise, AdtNoise(zero_length_pairs=0.05, duplicates=0.1, readmit_chains=0.1))


if __name__ == '__main__':
    unittest.main()
