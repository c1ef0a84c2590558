import copy
import json
import os
import unittest
from pathlib import Path
from unittest import mock

from fixtures import TempRoot
from wave_archive.utils.config import PipelineConfig, load_config, validate_config
from wave_archive.utils.errors import ConfigError
from wave_archive.utils.logger import RunLogger

CONFIG_DIR = Path(__file__).resolve().parents[1] / "config"
SEED_ENV = "WAVE_ARCHIVE_DEID_SEED"


class TestPipelineConfig(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.raw = load_config(str(CONFIG_DIR / "pipeline.yaml"))

    def variant(self, **sections):
        config = copy.deepcopy(self.raw)
        for section, values in sections.items():
            config[section].update(values)
        return config

    def test_shipped_config_is_valid(self):
        """
        config/pipeline.yaml validates and resolves paths next to itself
        """
        self.assertTrue(validate_config(self.raw))
        with mock.patch.dict(os.environ, {}, clear=False):
            os.environ.pop(SEED_ENV, None)
            config = PipelineConfig.load(str(CONFIG_DIR / "pipeline.yaml"))
        self.assertEqual(config.bed_map_path, CONFIG_DIR / "bed_map.csv")
        self.assertEqual(config.extracts_root, CONFIG_DIR / "../data/extracts")
        self.assertEqual(config.readmit_gap_seconds, 300)
        self.assertFalse(config.strict_labels)
        self.assertEqual(config.deid_seed, "desk-only-secret")

    def test_seed_from_environment_wins(self):
        """
        deid.seed_env overrides the inline desk seed when the variable is set
        """
        with mock.patch.dict(os.environ, {SEED_ENV: "from-the-vault"}):
            config = PipelineConfig.from_dict(self.raw, CONFIG_DIR)
        self.assertEqual(config.deid_seed, "from-the-vault")
        self.assertNotIn("from-the-vault", repr(config))

    def test_missing_seed(self):
        """
        A config naming an unset seed variable and no inline seed is refused
        """
        config = copy.deepcopy(self.raw)
        config["deid"] = {"seed_env": "WAVE_ARCHIVE_UNSET_SEED"}
        with mock.patch.dict(os.environ, {}, clear=False):
            os.environ.pop("WAVE_ARCHIVE_UNSET_SEED", None)
            with self.assertRaises(ConfigError):
                PipelineConfig.from_dict(config, CONFIG_DIR)

    def test_invalid_sections(self):
        """
        Missing sections, missing roots and bad values fail validation
        """
        missing = copy.deepcopy(self.raw)
        del missing["linkage"]
        bad = [
            missing,
            self.variant(paths={"catalog_root": ""}),
            self.variant(execution={"worker_count": 0}),
            self.variant(linkage={"label_mode": "fuzzy"}),
        ]
        for config in bad:
            with self.assertRaises(ConfigError):
                validate_config(config)

    def test_roots_must_be_disjoint(self):
        """
        An output root inside another root is refused
        """
        config = self.variant(paths={"deid_root": "../data/identified/deid"})
        with self.assertRaises(ConfigError):
            PipelineConfig.from_dict(config, CONFIG_DIR)
        root = TempRoot()
        self.addCleanup(root.cleanup)
        with self.assertRaises(ConfigError):
            root.config(catalog_root=root.extracts)

    def test_non_mapping_file(self):
        """
        A YAML file whose top level is not a mapping is refused
        """
        root = TempRoot()
        self.addCleanup(root.cleanup)
        path = root.path / "list.yaml"
        path.write_text("- a\n- b\n", encoding="utf-8")
        with self.assertRaises(ConfigError):
            load_config(str(path))
        empty = root.path / "empty.yaml"
        empty.write_text("", encoding="utf-8")
        self.assertEqual(load_config(str(empty)), {})


class TestRunLogger(unittest.TestCase):
    def test_json_lines_carry_day_phase_and_fields(self):
        """
        Each run log line is a JSON object with the day, phase and keyword fields
        """
        root = TempRoot()
        self.addCleanup(root.cleanup)
        log = RunLogger("2021-03-01", root.path / "logs", console=False)
        log.phase = "linked"
        log.info("streams linked", streams=3)
        log.warning("records outside every study", beds=["02BRAVO"])
        log.close()
        lines = [json.loads(line) for line in (root.path / "logs" / "run.jsonl").read_text().splitlines()]
        self.assertEqual([line["message"] for line in lines], ["streams linked", "records outside every study"])
        self.assertEqual(lines[0]["day"], "2021-03-01")
        self.assertEqual(lines[0]["phase"], "linked")
        self.assertEqual(lines[0]["streams"], 3)
        self.assertEqual(lines[1]["level"], "WARNING")
        self.assertEqual(lines[1]["beds"], ["02BRAVO"])


if __name__ == '__main__':
    unittest.main()
