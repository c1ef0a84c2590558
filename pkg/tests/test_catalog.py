import shutil
import tempfile
import unittest
from datetime import date
from pathlib import Path

from fixtures import ts
from wave_archive.catalog import (
    CATALOG_TABLES,
    STUDY_DETAILS,
    STUDY_MAP,
    WAVEFORM_MANIFEST,
    BedUnitMap,
    CatalogEntry,
    CatalogKind,
    StudyDetailRow,
    StudyFilter,
    StudyMapRow,
    age_group,
    check_integrity,
    publish_day,
    query_frame,
    query_studies,
    read_table,
    summarize,
)
from wave_archive.catalog.visualizer import ArchiveVisualizer
from wave_archive.extract.waves import lookup_wave
from wave_archive.signals import PackedStudy
from wave_archive.utils.errors import ConfigError, PartialDay, UnknownWaveSymbol
from wave_archive.utils.utils import sha256_file

# study id, mrn, bed, unit, start, end, waves
STUDIES = [
    ("S1", "M1", "A13", "PICU", "08:00", "10:30", ["II"]),
    ("S2", "M1", "A14", "CVICU", "10:30", "12:00", ["II", "Resp"]),
    ("S3", "M2", "B01", "PICU", "09:00", "11:00", ["Pleth"]),
    ("S4", None, "A13", "PICU", "12:00", "13:00", ["Resp"]),
]
PARTITION = "2021-03-01"


class CatalogCase(unittest.TestCase):
    def setUp(self):
        self.dir = Path(tempfile.mkdtemp(prefix="wave-archive-catalog-"))
        self.storage = self.dir / "identified"
        self.catalog = self.dir / "catalog"
        self.entries = [self.entry(*study) for study in STUDIES]

    def tearDown(self):
        shutil.rmtree(self.dir, ignore_errors=True)

    def entry(self, study_id, mrn, bed, unit, start, end, waves):
        zip_path = self.storage / PARTITION / "studies" / f"{study_id}.zip"
        zip_path.parent.mkdir(parents=True, exist_ok=True)
        zip_path.write_bytes(study_id.encode("utf-8") * 100)
        pack = PackedStudy(study_id, zip_path, zip_path.stat().st_size, sha256_file(zip_path))
        details = []
        for symbol in waves:
            wave = lookup_wave(symbol)
            n_samples = wave.rate * 60
            details.append(StudyDetailRow(study_id, symbol, wave.unit, wave.rate, n_samples,
                                          f"{study_id}_{symbol}.dat", 2 * n_samples))
        row = StudyMapRow(study_id=study_id, bed=bed, clinical_unit=unit, start=ts(start), end=ts(end),
                          storage_path=str(zip_path.relative_to(self.storage)),
                          linkage_method="lifetime_id" if mrn else "unmatched",
                          lifetime_id_source=mrn is not None, mrn=mrn, monitor_patient_id=f"MP{study_id}")
        return CatalogEntry(study=row, details=details, pack=pack)

    def publish(self, entries=None, kind=CatalogKind.IDENTIFIED, partition=PARTITION):
        return publish_day(self.catalog, kind, partition, self.entries if entries is None else entries,
                           self.storage)

    def ids(self, study_filter):
        return list(query_frame(self.catalog, study_filter)["study_id"])


class TestPublish(CatalogCase):
    def test_republish_is_byte_identical(self):
        """
        Publishing the same day twice, in any entry order, writes the same bytes
        """
        first = {t: p.read_bytes() for t, p in self.publish().items()}
        second = {t: p.read_bytes() for t, p in self.publish(self.entries[::-1]).items()}
        self.assertEqual(first, second)
        self.assertEqual(sorted(first), sorted(CATALOG_TABLES))
        header = first[STUDY_MAP].decode("utf-8").splitlines()[0]
        self.assertEqual(header, "study_id,mrn,monitor_patient_id,lifetime_id_source,bed,clinical_unit,"
                                 "start,end,storage_path,linkage_method")

    def test_partition_layout(self):
        """
        Tables land in <catalog>/<kind>/<table>/day=<day>/part.csv
        """
        written = self.publish()
        self.assertEqual(written[STUDY_DETAILS],
                         self.catalog / "identified" / "study_details" / "day=2021-03-01" / "part.csv")
        studies = read_table(self.catalog, CatalogKind.IDENTIFIED, STUDY_MAP)
        self.assertEqual(list(studies["study_id"]), ["S1", "S3", "S2", "S4"])
        self.assertEqual(list(studies["lifetime_id_source"]), [True, True, True, False])
        self.assertEqual(set(studies["partition"]), {PARTITION})

    def test_empty_day_is_header_only(self):
        """
        A day without studies still publishes three header-only partitions
        """
        written = self.publish([])
        for table, path in written.items():
            self.assertEqual(len(path.read_text(encoding="utf-8").splitlines()), 1, table)
        self.assertTrue(read_table(self.catalog, CatalogKind.IDENTIFIED, STUDY_MAP).empty)
        self.assertTrue(check_integrity(self.catalog).ok)

    def test_unpacked_study_blocks_the_day(self):
        """
        A study whose zip is missing makes the whole day partial; nothing is written
        """
        (self.storage / self.entries[1].study.storage_path).unlink()
        with self.assertRaises(PartialDay):
            self.publish()
        self.assertFalse((self.catalog / "identified").exists())

    def test_deid_partition_has_no_identified_columns(self):
        """
        The de-identified study map carries the pseudo id and no MRN or monitor id
        """
        entries = [CatalogEntry(study=StudyMapRow(**{**e.study.__dict__, "mrn": None, "monitor_patient_id": None,
                                                      "pseudo_id": f"D{e.study.study_id}"}),
                                details=e.details, pack=e.pack)
                   for e in self.entries]
        written = self.publish(entries, CatalogKind.DEID, "abc123")
        self.assertEqual(written[WAVEFORM_MANIFEST].parent.name, "batch=abc123")
        header = written[STUDY_MAP].read_text(encoding="utf-8").splitlines()[0].split(",")
        self.assertIn("pseudo_id", header)
        self.assertNotIn("mrn", header)
        self.assertNotIn("monitor_patient_id", header)

    def test_bed_unit_map(self):
        """
        Unlisted beds fall into UNASSIGNED; duplicate beds are refused
        """
        path = self.dir / "units.csv"
        path.write_text("bed,unit\nA13,PICU\n", encoding="utf-8")
        units = BedUnitMap.from_csv(path)
        self.assertEqual((units.unit_of("A13"), units.unit_of("Z99")), ("PICU", "UNASSIGNED"))
        path.write_text("bed,unit\nA13,PICU\nA13,NICU\n", encoding="utf-8")
        with self.assertRaises(ConfigError):
            BedUnitMap.from_csv(path)


class TestQuery(CatalogCase):
    def setUp(self):
        super().setUp()
        self.publish()

    def test_filter_by_patient_and_unit(self):
        """
        Patient and unit filters combine; results are ordered by start
        """
        self.assertEqual(self.ids(StudyFilter(patients=["M1"])), ["S1", "S2"])
        self.assertEqual(self.ids(StudyFilter(units=["PICU"])), ["S1", "S3", "S4"])
        self.assertEqual(self.ids(StudyFilter(patients=["M1"], units=["PICU"])), ["S1"])
        self.assertEqual(self.ids(StudyFilter(beds=["A13"])), ["S1", "S4"])

    def test_filter_by_waves(self):
        """
        A study must hold every requested wave
        """
        self.assertEqual(self.ids(StudyFilter(wave_symbols=["II"])), ["S1", "S2"])
        self.assertEqual(self.ids(StudyFilter(wave_symbols=["II", "Resp"])), ["S2"])
        with self.assertRaises(UnknownWaveSymbol):
            StudyFilter(wave_symbols=["EEG"])

    def test_time_range_spanning_a_transfer(self):
        """
        A window across the 10:30 transfer returns both sides; ranges are half-open
        """
        self.assertEqual(self.ids(StudyFilter(time_range=(ts("10:00"), ts("10:45")))), ["S1", "S3", "S2"])
        self.assertEqual(self.ids(StudyFilter(time_range=(ts("10:30"), ts("11:00")))), ["S3", "S2"])
        self.assertEqual(self.ids(StudyFilter(time_range=(ts("13:00"), ts("14:00")))), [])
        with self.assertRaises(ValueError):
            StudyFilter(time_range=(ts("11:00"), ts("10:00")))

    def test_query_studies_rows(self):
        """
        Typed rows come back with MRN unset for unmatched studies
        """
        rows = query_studies(self.catalog, StudyFilter(beds=["A13"]))
        self.assertEqual([r.mrn for r in rows], ["M1", None])
        self.assertEqual(rows[0].start, ts("08:00"))
        self.assertTrue(rows[0].lifetime_id_source)
        self.assertEqual(rows[1].patient_key, None)

    def test_integrity(self):
        """
        A published day is consistent; a detail row for an unknown study is an orphan
        """
        self.assertTrue(check_integrity(self.catalog).ok)
        stray = self.catalog / "identified" / "study_details" / "day=2021-03-02" / "part.csv"
        stray.parent.mkdir(parents=True)
        stray.write_text("study_id,symbol,unit,rate,n_samples,file,size_bytes\nS9,II,mV,500,10,S9_II.dat,20\n",
                         encoding="utf-8")
        report = check_integrity(self.catalog)
        self.assertFalse(report.ok)
        self.assertEqual(report.orphan_details, ["S9"])


class TestStats(CatalogCase):
    def setUp(self):
        super().setUp()
        self.publish()

    def test_totals(self):
        """
        Unmatched studies count as studies but not as patients
        """
        stats = summarize(self.catalog)
        self.assertEqual((stats.days, stats.studies, stats.patients), (1, 4, 2))
        self.assertEqual(stats.total_size_bytes, sum(e.pack.size_bytes for e in self.entries))
        self.assertEqual(stats.studies_per_day, 4.0)
        self.assertEqual(stats.patients_per_day, 2.0)

    def test_per_wave_follows_registry(self):
        """
        Lead II 500/s in mV, Pleth 125/s, Resp 63/s in Ohm
        """
        per_wave = summarize(self.catalog).per_wave.set_index("symbol")
        self.assertEqual(list(per_wave.index), ["II", "Pleth", "Resp"])
        self.assertEqual((per_wave.loc["II", "rate"], per_wave.loc["II", "unit"]), (500, "mV"))
        self.assertEqual(per_wave.loc["Pleth", "rate"], 125)
        self.assertEqual((per_wave.loc["Resp", "rate"], per_wave.loc["Resp", "unit"]), (63, "Ohm"))
        self.assertEqual(per_wave.loc["II", "studies"], 2)
        self.assertEqual(per_wave.loc["II", "patients"], 1)
        self.assertEqual(per_wave.loc["Resp", "patients"], 1)
        self.assertEqual(per_wave.loc["II", "n_samples"], 2 * 500 * 60)

    def test_unit_by_age_table(self):
        """
        Patients are counted per clinical unit and age group at study start
        """
        stats = summarize(self.catalog, birthdates={"M1": date(2021, 2, 20), "M2": date(2015, 6, 1)})
        rows = [tuple(r) for r in stats.unit_age[["clinical_unit", "age_group", "patients", "studies"]]
                .itertuples(index=False)]
        self.assertEqual(rows, [("CVICU", "neonate", 1, 1), ("PICU", "neonate", 1, 1), ("PICU", "5-9", 1, 1)])
        self.assertIsNone(summarize(self.catalog).unit_age)

    def test_age_groups(self):
        """
        Neonates up to 28 days, infants below a year, then whole years
        """
        birth = date(2020, 3, 1)
        self.assertEqual(age_group(birth, date(2020, 3, 29)), "neonate")
        self.assertEqual(age_group(birth, date(2020, 3, 30)), "infant")
        self.assertEqual(age_group(birth, date(2021, 3, 1)), "1-4")
        self.assertEqual(age_group(date(2006, 3, 2), date(2021, 3, 1)), "10-14")
        self.assertEqual(age_group(date(2006, 3, 1), date(2021, 3, 1)), "15+")
        with self.assertRaises(ValueError):
            age_group(birth, date(2020, 2, 28))

    def test_plots_are_written(self):
        """
        Each configured plot with data becomes a PNG
        """
        stats = summarize(self.catalog, birthdates={"M1": date(2021, 2, 20)})
        visualizer = ArchiveVisualizer({"plot_types": ["daily_studies", "wave_sizes", "unit_age"]})
        written = visualizer.create_visualizations(stats, self.dir / "plots")
        self.assertEqual([p.name for p in written], ["daily_studies.png", "wave_sizes.png", "unit_age.png"])
        self.assertTrue(all(p.stat().st_size > 0 for p in written))
        with self.assertRaises(ValueError):
            ArchiveVisualizer({"plot_types": ["pie"]})


if __name__ == '__main__':
    unittest.main()
