import importlib.util
import shutil
import tempfile
import unittest
import zipfile
from pathlib import Path

import numpy as np
import pandas as pd

from fixtures import build_bundle, numeric_rows, ts, wave_row
from wave_archive.extract.schema import WaveSampleRecord
from wave_archive.extract.waves import lookup_wave
from wave_archive.linkage import LinkageMethod
from wave_archive.segmentation import StudySkeleton, fill_study, study_identifier
from wave_archive.signals import (
    DETAILS_FILE,
    INVALID,
    checksum16,
    choose_quantization,
    dequantize,
    pack_study,
    quantize,
    read_record,
    verify_pack,
    write_record,
    write_study_folder,
)
from wave_archive.signals.records import renamed_header
from wave_archive.utils.errors import (
    ChecksumMismatch,
    DurationMismatch,
    IncompleteStudyFolder,
    IntegrityFailure,
    NoFiniteSamples,
    OverlappingBlocks,
)
from wave_archive.utils.utils import read_json


def block(symbol, start, samples):
    wave = lookup_wave(symbol)
    return WaveSampleRecord(monitor_patient_id="MP1", bed_label="13ALPHA", wave=wave, block_start=ts(start),
                            sample_rate=wave.rate, samples=np.asarray(samples, dtype=np.float64))


class TestQuantization(unittest.TestCase):
    def test_quantize_within_half_step(self):
        """
        Dequantized values are within half an ADC step of the input
        """
        rng = np.random.default_rng(1)
        for scale in (1e-3, 1.0, 250.0):
            samples = rng.normal(0.0, scale, 5000)
            q = choose_quantization(samples)
            back = dequantize(quantize(samples, q), q)
            self.assertLessEqual(float(np.max(np.abs(back - samples))), q.max_error * (1 + 1e-9))

    def test_constant_signal(self):
        """
        A flat signal gets the fixed gain and round-trips
        """
        samples = np.full(100, 3.25)
        q = choose_quantization(samples)
        self.assertEqual(q.gain, 200.0)
        np.testing.assert_allclose(dequantize(quantize(samples, q), q), samples, atol=q.max_error)

    def test_nan_is_invalid(self):
        """
        NaN samples are stored as the INVALID value and come back as NaN
        """
        samples = np.array([0.0, np.nan, 1.0])
        q = choose_quantization(samples)
        adu = quantize(samples, q)
        self.assertEqual(int(adu[1]), INVALID)
        self.assertTrue(np.isnan(dequantize(adu, q)[1]))
        with self.assertRaises(NoFiniteSamples):
            choose_quantization(np.array([np.nan, np.inf]))

    def test_checksum_wraps_to_signed_16_bit(self):
        """
        The checksum is the sample sum folded into int16
        """
        self.assertEqual(checksum16(np.array([32767, 1], dtype=np.int16)), -32768)
        self.assertEqual(checksum16(np.array([-5, 2], dtype=np.int16)), -3)


class TestSignalRecords(unittest.TestCase):
    def setUp(self):
        self.dir = Path(tempfile.mkdtemp(prefix="wave-archive-records-"))

    def tearDown(self):
        shutil.rmtree(self.dir, ignore_errors=True)

    def test_round_trip_per_registered_rate(self):
        """
        Lead II, Pleth and Resp records read back within 0.5/gain with a valid checksum
        """
        rng = np.random.default_rng(2)
        for symbol in ("II", "Pleth", "Resp"):
            rate = lookup_wave(symbol).rate
            samples = np.sin(np.linspace(0, 20, 4 * rate)) + rng.normal(0, 0.05, 4 * rate)
            record = write_record("MP1_A13_20210301T100000Z", lookup_wave(symbol),
                                  [block(symbol, "10:00", samples)], self.dir)
            data = read_record(self.dir / f"{record.record_name}.hea")
            self.assertEqual(data.rate, rate)
            self.assertEqual(data.record.n_samples, 4 * rate)
            self.assertFalse(data.gap_mask.any())
            self.assertLessEqual(float(np.max(np.abs(data.samples - samples))), 0.5 / data.record.gain + 1e-9)
            self.assertEqual((self.dir / record.file_name).stat().st_size, 2 * record.n_samples)
            self.assertEqual(data.record.checksum16, checksum16(data.record.samples))
            self.assertEqual(data.record.base_time, ts("10:00"))

    def test_gap_between_blocks_is_invalid(self):
        """
        Two Resp blocks 2 s apart leave 126 INVALID samples between them
        """
        first = block("Resp", "10:00:00", np.linspace(0, 1, 252))
        second = block("Resp", "10:00:06", np.linspace(1, 0, 252))
        record = write_record("S", lookup_wave("Resp"), [second, first], self.dir)
        self.assertEqual(record.n_samples, 630)
        data = read_record(self.dir / f"{record.record_name}.hea")
        self.assertEqual(int(data.gap_mask.sum()), 126)
        self.assertTrue(data.gap_mask[252:378].all())
        self.assertEqual(int(np.count_nonzero(data.record.samples == INVALID)), 126)

    def test_record_is_bounded_by_its_blocks(self):
        """
        Data from 10:00:02 to 10:00:06 inside a 10:00 to 10:01 study gives a 4 s record based at 10:00:02
        """
        study = StudySkeleton(study_id=study_identifier("MP1", "A13", ts("10:00")), mrn="M1",
                              monitor_patient_id="MP1", device_bed_label="13ALPHA", bed_label="A13",
                              start=ts("10:00"), end=ts("10:01"), linkage_method=LinkageMethod.LIFETIME_ID)
        filled = fill_study(study, build_bundle(wave_samples=[
            wave_row("MP1", "13ALPHA", "Resp", 63, "10:00:02", np.linspace(0, 1, 252))]))
        record = write_record(study.study_id, lookup_wave("Resp"), filled.waves["Resp"], self.dir)
        data = read_record(self.dir / f"{record.record_name}.hea")
        self.assertEqual(data.record.n_samples, 252)
        self.assertEqual(data.record.base_time, ts("10:00:02"))
        self.assertFalse(data.gap_mask.any())

    def test_all_nan_block_is_an_invalid_record(self):
        """
        A block without a finite sample is written as INVALID samples, not refused
        """
        record = write_record("S", lookup_wave("Pleth"), [block("Pleth", "10:00", np.full(125, np.nan))], self.dir)
        self.assertEqual(record.n_samples, 125)
        data = read_record(self.dir / f"{record.record_name}.hea")
        self.assertTrue(data.gap_mask.all())
        self.assertTrue((data.record.samples == INVALID).all())
        self.assertEqual(data.record.checksum16, checksum16(np.full(125, INVALID, dtype=np.int16)))

        mixed = write_record("T", lookup_wave("Pleth"), [block("Pleth", "10:00", np.full(125, np.nan)),
                                                         block("Pleth", "10:00:02", np.ones(125))], self.dir)
        back = read_record(self.dir / f"{mixed.record_name}.hea")
        self.assertEqual(int(back.gap_mask.sum()), 250)
        np.testing.assert_allclose(back.samples[250:], 1.0, atol=0.5 / back.record.gain)

    def test_overlapping_blocks_are_refused(self):
        """
        Blocks of one wave may not overlap in time
        """
        with self.assertRaises(OverlappingBlocks):
            write_record("S", lookup_wave("Resp"), [block("Resp", "10:00:00", np.zeros(126)),
                                                    block("Resp", "10:00:01", np.zeros(126))], self.dir)

    def test_empty_block_list_writes_nothing(self):
        """
        No blocks, no record
        """
        self.assertIsNone(write_record("S", lookup_wave("II"), [], self.dir))
        self.assertEqual(list(self.dir.iterdir()), [])

    def test_fractional_base_time(self):
        """
        A block starting between seconds keeps its microseconds in the header
        """
        record = write_record("S", lookup_wave("Pleth"), [block("Pleth", "10:00:00.25", np.arange(125.0))], self.dir)
        header = (self.dir / f"{record.record_name}.hea").read_text(encoding="utf-8")
        self.assertIn("10:00:00.25 01/03/2021", header.splitlines()[0])
        self.assertEqual(read_record(self.dir / f"{record.record_name}.hea").record.base_time, ts("10:00:00.25"))

    def test_corruption_is_detected(self):
        """
        Truncated data, flipped bytes and a wrong header rate all fail the read
        """
        record = write_record("S", lookup_wave("Resp"), [block("Resp", "10:00", np.linspace(-1, 1, 252))], self.dir)
        hea = self.dir / f"{record.record_name}.hea"
        dat = self.dir / record.file_name
        original = dat.read_bytes()

        dat.write_bytes(original[:-2])
        with self.assertRaises(DurationMismatch):
            read_record(hea)

        flipped = bytearray(original)
        flipped[11] ^= 0x10
        dat.write_bytes(bytes(flipped))
        with self.assertRaises(ChecksumMismatch):
            read_record(hea)

        dat.write_bytes(original)
        text = hea.read_text(encoding="utf-8")
        hea.write_text(text.replace(" 1 63 252 ", " 1 64 252 ", 1), encoding="utf-8")
        with self.assertRaises(DurationMismatch):
            read_record(hea)

    def test_renamed_header_moves_base_time(self):
        """
        Renaming rewrites the record name, the data file and the base time only
        """
        record = write_record("S", lookup_wave("Resp"), [block("Resp", "10:00", np.linspace(-1, 1, 252))], self.dir)
        text = renamed_header(self.dir / f"{record.record_name}.hea", "X_Resp", pd.Timedelta(days=100))
        first, second = text.splitlines()
        self.assertEqual(first, "X_Resp 1 63 252 10:00:00 21/11/2020")
        self.assertTrue(second.startswith("X_Resp.dat 16 "))
        self.assertTrue(second.endswith(f" {record.checksum16} 0 {lookup_wave('Resp').name}"))

    @unittest.skipUnless(importlib.util.find_spec("wfdb"), "wfdb is not installed")
    def test_records_open_with_wfdb(self):
        """
        The standard reader sees the same samples, rate and gaps
        """
        import wfdb

        first = block("Resp", "10:00:00", np.linspace(0, 1, 252))
        second = block("Resp", "10:00:06", np.linspace(1, 0, 252))
        record = write_record("S", lookup_wave("Resp"), [first, second], self.dir)
        ours = read_record(self.dir / f"{record.record_name}.hea")
        theirs = wfdb.rdrecord(str(self.dir / record.record_name))
        self.assertEqual(theirs.fs, 63)
        self.assertEqual(theirs.sig_len, 630)
        np.testing.assert_allclose(theirs.p_signal[:, 0], ours.samples, atol=1e-6, equal_nan=True)


class TestStudyFolder(unittest.TestCase):
    def setUp(self):
        self.dir = Path(tempfile.mkdtemp(prefix="wave-archive-folder-"))
        start = ts("10:00")
        skeleton = StudySkeleton(study_id=study_identifier("MP1", "A13", start), mrn="M1",
                                 monitor_patient_id="MP1", device_bed_label="13ALPHA", bed_label="A13",
                                 start=start, end=ts("11:00"), linkage_method=LinkageMethod.DEVICE_LOG)
        bundle = build_bundle(
            numerics=numeric_rows("MP1", "13ALPHA", "10:00", "10:30"),
            wave_samples=[wave_row("MP1", "13ALPHA", "Resp", 63, "10:00", np.linspace(-1, 1, 252)),
                          wave_row("MP1", "13ALPHA", "Pleth", 125, "10:05", np.linspace(0, 2, 500))],
        )
        self.study = fill_study(skeleton, bundle)
        self.folder = self.dir / self.study.study_id

    def tearDown(self):
        shutil.rmtree(self.dir, ignore_errors=True)

    def test_folder_contents(self):
        """
        One record per wave, three sidecars and the details descriptor
        """
        written = write_study_folder(self.study, self.folder)
        names = sorted(p.name for p in self.folder.iterdir())
        stem = self.study.study_id
        self.assertEqual(names, sorted([
            DETAILS_FILE, "alerts.csv", "enumerations.csv", "numerics.csv",
            f"{stem}_Pleth.dat", f"{stem}_Pleth.hea", f"{stem}_Resp.dat", f"{stem}_Resp.hea",
        ]))
        details = read_json(self.folder / DETAILS_FILE)
        self.assertEqual(details, written.details)
        self.assertEqual([w["symbol"] for w in details["waves"]], ["Pleth", "Resp"])
        self.assertEqual(details["numerics_rows"], 30)
        self.assertTrue(details["mrn_present"])
        self.assertEqual(details["linkage_method"], "device_log")
        header = (self.folder / "numerics.csv").read_text(encoding="utf-8").splitlines()[0]
        self.assertEqual(header, "observed_at,metric,value,unit")

    def test_pack_is_deterministic_and_verifiable(self):
        """
        Packing twice gives identical bytes; the recorded digest verifies the zip
        """
        write_study_folder(self.study, self.folder)
        first = pack_study(self.folder)
        second = pack_study(self.folder)
        self.assertEqual(first, second)
        verify_pack(first.zip_path, first.size_bytes, first.sha256)
        with zipfile.ZipFile(first.zip_path) as archive:
            members = archive.namelist()
        self.assertEqual(members, sorted(members))
        self.assertTrue(all(m.startswith(f"{self.study.study_id}/") for m in members))

    def test_pack_corruption_is_detected(self):
        """
        A flipped byte or a truncated zip fails verification
        """
        write_study_folder(self.study, self.folder)
        packed = pack_study(self.folder)
        data = bytearray(packed.zip_path.read_bytes())
        data[len(data) // 2] ^= 0x01
        packed.zip_path.write_bytes(bytes(data))
        with self.assertRaises(IntegrityFailure) as ctx:
            verify_pack(packed.zip_path, packed.size_bytes, packed.sha256)
        self.assertEqual(ctx.exception.kind, "checksum")
        packed.zip_path.write_bytes(bytes(data[:-1]))
        with self.assertRaises(IntegrityFailure) as ctx:
            verify_pack(packed.zip_path, packed.size_bytes, packed.sha256)
        self.assertEqual(ctx.exception.kind, "size")

    def test_incomplete_folder_is_not_packed(self):
        """
        Without its details descriptor a folder is refused
        """
        write_study_folder(self.study, self.folder)
        (self.folder / DETAILS_FILE).unlink()
        with self.assertRaises(IncompleteStudyFolder):
            pack_study(self.folder)
        self.assertFalse((self.dir / f"{self.study.study_id}.zip").exists())


if __name__ == '__main__':
    unittest.main()
