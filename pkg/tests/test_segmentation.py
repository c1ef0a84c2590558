import unittest
from collections import Counter

import numpy as np
import pandas as pd

from fixtures import DAY, TempRoot, adt_rows, build_bundle, numeric_rows, small_scenario, ts, wave_row
from wave_archive.extract.bundle import parse_extract_day
from wave_archive.extract.manifest import verify_bundle
from wave_archive.extract.schema import AdtEventKind
from wave_archive.linkage import BedLabelMap, LinkageMethod, link_day
from wave_archive.pipeline.runner import has_data
from wave_archive.segmentation import (
    StudySkeleton,
    fill_day,
    fill_study,
    plan_studies,
    study_identifier,
)
from wave_archive.synthgen import generate_day
from wave_archive.utils.errors import OrphanData

ADMIT = AdtEventKind.ADMISSION
DISCHARGE = AdtEventKind.DISCHARGE


def skeleton(start, end, bed="A13", device_bed="13ALPHA", mrn="M1"):
    return StudySkeleton(
        study_id=study_identifier("MP1", bed, ts(start)),
        mrn=mrn,
        monitor_patient_id="MP1",
        device_bed_label=device_bed,
        bed_label=bed,
        start=ts(start),
        end=ts(end),
        linkage_method=LinkageMethod.LIFETIME_ID,
    )


class TestStudyPlanning(unittest.TestCase):
    def test_identifier_format(self):
        """
        Study ids read <monitor id>_<bed>_<UTC start>
        """
        self.assertEqual(study_identifier("p42", "A13", ts("08:12")), "p42_A13_20210301T081200Z")

    def test_transfer_starts_new_study(self):
        """
        A transfer from A13 to A14 at 10:30 yields two studies meeting at 10:30
        """
        numerics = (numeric_rows("MP1", "13ALPHA", "08:00", "10:30", lifetime_id="M1")
                    + numeric_rows("MP1", "14ALPHA", "10:30", "12:00", lifetime_id="M1"))
        adt = adt_rows("M1", "V1", "John Doe", [
            (ADMIT, "A13", "08:00"),
            (AdtEventKind.TRANSFER_OUT, "A13", "10:30"),
            (AdtEventKind.TRANSFER_IN, "A14", "10:30"),
            (DISCHARGE, "A14", "12:00"),
        ])
        bundle = build_bundle(numerics=numerics, adt_events=adt)
        linkage, _ = link_day(bundle, BedLabelMap())
        studies = plan_studies(linkage, bundle)
        self.assertEqual([(s.bed_label, s.start, s.end) for s in studies],
                         [("A13", ts("08:00"), ts("10:30")), ("A14", ts("10:30"), ts("12:00"))])
        self.assertEqual({s.mrn for s in studies}, {"M1"})
        self.assertTrue(all(s.lifetime_id_source for s in studies))

    def test_return_to_earlier_bed_is_a_new_study(self):
        """
        A13 08:00-10:00, A14 10:00-11:00, back to A13 11:00-12:00 gives three studies, not one long A13 study
        """
        numerics = (numeric_rows("MP1", "13ALPHA", "08:00", "10:00", lifetime_id="M1")
                    + numeric_rows("MP1", "14ALPHA", "10:00", "11:00", lifetime_id="M1")
                    + numeric_rows("MP1", "13ALPHA", "11:00", "12:00", lifetime_id="M1"))
        bundle = build_bundle(numerics=numerics)
        studies = plan_studies(link_day(bundle, BedLabelMap())[0], bundle)
        self.assertEqual([(s.bed_label, s.start, s.end) for s in studies],
                         [("A13", ts("08:00"), ts("09:59:01")), ("A14", ts("10:00"), ts("10:59:01")),
                          ("A13", ts("11:00"), ts("11:59:01"))])

    def test_window_clamps_to_emr_stay(self):
        """
        Data from 08:15 to 19:45 under an ADT stay of 08:12 to 19:47 gives a study of 08:12 to 19:47
        """
        numerics = numeric_rows("MP1", "13ALPHA", "08:15", "19:45")
        adt = adt_rows("M1", "V1", "John Doe", [(ADMIT, "A13", "08:12"), (DISCHARGE, "A13", "19:47")])
        bundle = build_bundle(numerics=numerics, adt_events=adt)
        [study] = plan_studies(link_day(bundle, BedLabelMap())[0], bundle)
        self.assertEqual((study.start, study.end), (ts("08:12"), ts("19:47")))
        self.assertEqual(study.linkage_method, LinkageMethod.ADT_OVERLAP)
        self.assertEqual(study.study_id, "MP1_A13_20210301T081200Z")

    def test_window_never_leaves_the_day(self):
        """
        A stay reaching into the next day is cut at midnight
        """
        numerics = numeric_rows("MP1", "13ALPHA", "22:00", "23:59")
        adt = adt_rows("M1", "V1", "John Doe", [(ADMIT, "A13", "21:00")])
        bundle = build_bundle(numerics=numerics, adt_events=adt)
        [study] = plan_studies(link_day(bundle, BedLabelMap())[0], bundle)
        self.assertEqual((study.start, study.end), (ts("21:00"), ts("2021-03-02T00:00:00Z")))

    def test_skeleton_rejects_long_or_empty_ranges(self):
        """
        Studies are non-empty and at most 24 hours long
        """
        with self.assertRaises(ValueError):
            skeleton("10:00", "10:00")
        with self.assertRaises(ValueError):
            skeleton("00:00", "2021-03-02T00:00:01Z")
        self.assertEqual(skeleton("00:00", "2021-03-02T00:00:00Z").end, ts("2021-03-02T00:00:00Z"))


class TestStudyFilling(unittest.TestCase):
    def setUp(self):
        self.first = skeleton("08:00", "10:30")
        self.second = skeleton("10:30", "12:00")

    def test_point_at_study_end_belongs_to_next_study(self):
        """
        Ranges are half-open: a numeric at exactly 10:30 goes to the later study
        """
        numerics = numeric_rows("MP1", "13ALPHA", "10:29", "10:31")
        bundle = build_bundle(numerics=numerics)
        studies, orphans = fill_day([self.first, self.second], bundle)
        self.assertEqual(list(studies[0].numerics["observed_at"]), [ts("10:29")])
        self.assertEqual(list(studies[1].numerics["observed_at"]), [ts("10:30")])
        self.assertTrue(orphans.empty)

    def test_wave_block_split_at_cut(self):
        """
        A 2 s lead II block starting half a second before 10:30 splits 250 / 750
        """
        samples = np.linspace(-1.0, 1.0, 1000)
        bundle = build_bundle(wave_samples=[wave_row("MP1", "13ALPHA", "II", 500, "10:29:59.5", samples)])
        studies, orphans = fill_day([self.first, self.second], bundle)
        [before] = studies[0].waves["II"]
        [after] = studies[1].waves["II"]
        self.assertEqual((before.n_samples, after.n_samples), (250, 750))
        self.assertEqual(after.block_start, ts("10:30"))
        self.assertEqual(before.block_end, ts("10:30"))
        np.testing.assert_allclose(np.concatenate([before.samples, after.samples]), samples, atol=1e-4)
        self.assertEqual(orphans.wave_samples, {})

    def test_cut_between_two_samples(self):
        """
        A cut 0.63 sample periods into a Resp block leaves the first sample before it and the rest after
        """
        samples = np.arange(126.0)
        bundle = build_bundle(wave_samples=[wave_row("MP1", "13ALPHA", "Resp", 63, "10:29:59.99", samples)])
        studies, orphans = fill_day([self.first, self.second], bundle)
        [before] = studies[0].waves["Resp"]
        [after] = studies[1].waves["Resp"]
        self.assertEqual((before.n_samples, after.n_samples), (1, 125))
        self.assertLess(before.block_start, ts("10:30"))
        self.assertGreaterEqual(after.block_start, ts("10:30"))
        self.assertLess(after.block_start - ts("10:30"), pd.Timedelta(seconds=1 / 63))
        np.testing.assert_array_equal(np.concatenate([before.samples, after.samples]), samples)
        self.assertEqual(orphans.wave_samples, {})

    def test_records_outside_every_study_are_reported(self):
        """
        Data on a bed no study covers raises an OrphanData warning and is counted
        """
        numerics = (numeric_rows("MP1", "02BRAVO", "09:00", "09:05")
                    + numeric_rows("MP1", "13ALPHA", "09:00", "09:05"))
        bundle = build_bundle(numerics=numerics)
        with self.assertWarns(OrphanData):
            studies, orphans = fill_day([self.first], bundle)
        self.assertEqual(len(studies[0].numerics), 5)
        self.assertEqual(orphans.rows["numerics"], 5)
        self.assertEqual(orphans.to_dict()["beds"], ["02BRAVO"])

    def test_fill_study_ignores_other_data(self):
        """
        Filling one study alone does not warn about the rest of the day
        """
        numerics = numeric_rows("MP1", "13ALPHA", "07:00", "12:00")
        study = fill_study(self.second, build_bundle(numerics=numerics))
        self.assertEqual(len(study.numerics), 90)
        self.assertTrue(has_data(study))

    def test_overlapping_windows_are_refused(self):
        """
        Two windows on the same monitor and bed may not overlap
        """
        with self.assertRaises(ValueError):
            fill_day([self.first, skeleton("10:00", "11:00")], build_bundle())


def minute(m):
    return ts("00:00") + pd.Timedelta(minutes=m)


def random_day(rng):
    """
    One to three patients hopping between their own beds, sometimes back to
    an earlier one. Returns the table rows and the true (monitor id, bed,
    start, end) stays.
    """
    numerics, waves, adt, stays = [], [], [], []
    for p in range(int(rng.integers(1, 4))):
        monitor, mrn = f"MP{p}", f"M{p}"
        pool = [10 * (p + 1) + k for k in range(3)]
        start, bed = int(rng.integers(0, 120)) * 5, int(rng.choice(pool))
        hops = []
        for _ in range(int(rng.integers(1, 5))):
            end = min(start + int(rng.integers(6, 120)) * 5, 1440)
            hops.append((bed, start, end))
            if end == 1440:
                break
            start, bed = end, int(rng.choice([b for b in pool if b != bed]))

        chain = [(ADMIT, f"A{hops[0][0]}", minute(hops[0][1]).isoformat())]
        for (bed, _, end), (next_bed, _, _) in zip(hops, hops[1:]):
            chain += [(AdtEventKind.TRANSFER_OUT, f"A{bed}", minute(end).isoformat()),
                      (AdtEventKind.TRANSFER_IN, f"A{next_bed}", minute(end).isoformat())]
        if hops[-1][2] < 1440:
            chain.append((DISCHARGE, f"A{hops[-1][0]}", minute(hops[-1][2]).isoformat()))
        adt += adt_rows(mrn, f"V{p}", f"Patient {p}", chain)

        for bed, start, end in hops:
            label = f"{bed}ALPHA"
            stays.append((monitor, f"A{bed}", minute(start), minute(end)))
            numerics += numeric_rows(monitor, label, minute(start).isoformat(), minute(end).isoformat(),
                                     step_seconds=300, lifetime_id=mrn)
            slots = rng.choice(np.arange(start, end - 5, 5), size=min(3, (end - start) // 5 - 1), replace=False)
            for slot in slots:
                waves.append(wave_row(monitor, label, "Resp", 63, minute(int(slot)).isoformat(),
                                      rng.normal(size=63), lifetime_id=mrn))
            last = minute(end) - pd.Timedelta(seconds=1)
            waves.append(wave_row(monitor, label, "Resp", 63, last.isoformat(), rng.normal(size=63),
                                  lifetime_id=mrn))
    return {"numerics": numerics, "wave_samples": waves, "adt_events": adt}, stays


class TestRandomizedSegmentation(unittest.TestCase):
    def test_randomized_days_match_brute_force(self):
        """
        Over 500 random days, studies equal the true stays, never cross a transfer or
        exceed 24 hours, and keep every wave sample
        """
        for seed in range(500):
            rng = np.random.default_rng(seed)
            tables, stays = random_day(rng)
            with self.subTest(seed=seed):
                bundle = build_bundle(**tables)
                skeletons = plan_studies(link_day(bundle, BedLabelMap())[0], bundle)
                self.assertEqual(sorted((s.monitor_patient_id, s.bed_label, s.start, s.end) for s in skeletons),
                                 sorted(stays))

                transfers = {(monitor, end) for monitor, _, _, end in stays}
                for study in skeletons:
                    self.assertLessEqual(study.end - study.start, pd.Timedelta(hours=24))
                    crossed = [t for m, t in transfers
                               if m == study.monitor_patient_id and study.start < t < study.end]
                    self.assertEqual(crossed, [])

                studies, orphans = fill_day(skeletons, bundle)
                self.assertTrue(orphans.empty)
                self.assertEqual(sum(s.sample_counts().get("Resp", 0) for s in studies),
                                 sum(b.n_samples for b in bundle.wave_blocks()))
                for study in studies:
                    for piece in study.waves.get("Resp", []):
                        self.assertTrue(study.start <= piece.block_start and piece.block_end <= study.end)


class TestClosedLoop(unittest.TestCase):
    """Clean synthetic days segment back into exactly the generated stays."""

    @classmethod
    def setUpClass(cls):
        cls.root = TempRoot()
        cls.days = []
        for seed in (11, 12, 13):
            bundle_dir, truth = generate_day(small_scenario(seed=seed), DAY, cls.root.extracts / str(seed))
            bundle = parse_extract_day(verify_bundle(bundle_dir))
            linkage, _ = link_day(bundle, BedLabelMap())
            skeletons = plan_studies(linkage, bundle)
            studies, orphans = fill_day(skeletons, bundle)
            cls.days.append((truth, bundle, [s for s in studies if has_data(s)], orphans))

    @classmethod
    def tearDownClass(cls):
        cls.root.cleanup()

    def test_studies_match_generated_stays(self):
        """
        Study ids and windows equal the generator's stays
        """
        for truth, _, studies, _ in self.days:
            expected = sorted((s.study_id, s.start, s.end) for s in truth.segments)
            actual = sorted((s.study_id, s.start, s.end) for s in studies)
            self.assertEqual(actual, expected)

    def test_samples_are_conserved(self):
        """
        Every wave sample of the bundle lands in exactly one study
        """
        for truth, bundle, studies, orphans in self.days:
            in_bundle = Counter()
            for block in bundle.wave_blocks():
                in_bundle[block.wave.symbol] += block.n_samples
            in_studies = Counter()
            for study in studies:
                in_studies.update(study.sample_counts())
            self.assertEqual(in_studies, in_bundle)
            self.assertTrue(orphans.empty)
            by_id = {s.study_id: s for s in studies}
            for segment in truth.segments:
                self.assertEqual(by_id[segment.study_id].sample_counts(), segment.waves)

    def test_membership_matches_brute_force(self):
        """
        Each numeric row sits in the single study whose key and window contain it
        """
        for _, bundle, studies, _ in self.days:
            for row in bundle.numerics.itertuples(index=False):
                key = (row.monitor_patient_id, row.bed_label)
                matching = [s for s in studies if s.skeleton.key == key and s.start <= row.observed_at < s.end]
                self.assertEqual(len(matching), 1)
            self.assertEqual(sum(len(s.numerics) for s in studies), len(bundle.numerics))

    def test_studies_stay_within_a_day_and_a_bed(self):
        """
        No study exceeds 24 hours or holds data from a second bed
        """
        for _, _, studies, _ in self.days:
            for study in studies:
                self.assertLessEqual(study.end - study.start, pd.Timedelta(hours=24))
                self.assertEqual(set(study.numerics["bed_label"]), {study.skeleton.device_bed_label})
                for blocks in study.waves.values():
                    self.assertTrue(all(study.start <= b.block_start < study.end for b in blocks))


if __name__ == '__main__':
    unittest.main()
