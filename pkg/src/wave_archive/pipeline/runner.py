"""
Day-at-a-time archive pipeline.

``run_day`` walks one extract bundle through verify, parse, link, segment,
write, de-identify and publish. Each phase writes to its own directory and
is checkpointed with a content digest, so a rerun picks up after the last
completed phase and a finished day is left untouched.
"""

import json
import os
import shutil
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Set, Tuple

import pandas as pd

from ..catalog import (
    CatalogEntry,
    CatalogKind,
    StudyMapRow,
    detail_rows,
    publish_day,
)
from ..catalog.tables import BedUnitMap
from ..deid.deidentifier import StudyIdentity, deidentify_study, resolve_entry
from ..deid.mapping import batch_token, update_map
from ..extract.bundle import parse_extract_day, validate_row_counts
from ..extract.manifest import VerifiedBundle, verify_bundle
from ..extract.schema import MANIFEST_FILE, ExtractBundle
from ..linkage.bed_labels import BedLabelMap
from ..linkage.matcher import LinkageMethod, LinkageResult, audit_entries, link_day
from ..segmentation.filler import Study, fill_day
from ..segmentation.planner import StudySkeleton, plan_studies
from ..signals.study_folder import DETAILS_FILE, PackedStudy, pack_study, verify_pack, write_study_folder
from ..utils.config import PipelineConfig
from ..utils.errors import OrphanData, PhaseFailure, SchemaViolation
from ..utils.logger import RunLogger
from ..utils.utils import (
    TMP_PREFIX,
    atomic_write_text,
    day_range,
    dump_json,
    format_ts,
    read_json,
    sha256_bytes,
    sha256_file,
    staged_directory,
    tree_digest,
    utc,
    write_json,
)
from .state import PHASES, DayRunState, Phase, clear_failure, read_failure, state_dir, write_failure
from .workers import run_parallel

PLAN_FILE = "plan.json"
PACKS_FILE = "packs.json"
DEID_FILE = "deid.json"
AUDIT_FILE = "audit.jsonl"
REPORT_FILE = "report.json"
DEID_MAP_FILE = "deid_map.csv"

IDENTIFIED_SCRATCH = {"state", "logs", "quarantine"}


@dataclass(frozen=True)
class ArchiveLayout:
    """Where every output of the pipeline lives."""
    config: PipelineConfig

    def bundle_dir(self, day: date) -> Path:
        return self.config.extracts_root / day.isoformat()

    def state_dir(self, day: date) -> Path:
        return state_dir(self.config.identified_root, day)

    def linkage_dir(self, day: date) -> Path:
        return self.config.identified_root / "linkage" / f"day={day.isoformat()}"

    def studies_dir(self, day: date) -> Path:
        return self.config.identified_root / "studies" / f"day={day.isoformat()}"

    def log_dir(self, day: date) -> Path:
        return self.config.identified_root / "logs" / f"day={day.isoformat()}"

    @property
    def deid_map_path(self) -> Path:
        return self.config.identified_root / DEID_MAP_FILE

    def batch(self, day: date) -> str:
        return batch_token(self.config.deid_seed, day)

    def deid_dir(self, day: date) -> Path:
        return self.config.deid_root / "studies" / f"batch={self.batch(day)}"

    def quarantine_dir(self, root: Path, day: date, phase: Phase) -> Path:
        base = root / "quarantine" / f"day={day.isoformat()}"
        attempt = 1
        while (base / f"{phase.value}-{attempt}").exists():
            attempt += 1
        return base / f"{phase.value}-{attempt}"


def skeleton_to_dict(skeleton: StudySkeleton) -> Dict[str, Any]:
    return {
        "study_id": skeleton.study_id,
        "mrn": skeleton.mrn,
        "monitor_patient_id": skeleton.monitor_patient_id,
        "device_bed_label": skeleton.device_bed_label,
        "bed_label": skeleton.bed_label,
        "start": format_ts(skeleton.start),
        "end": format_ts(skeleton.end),
        "linkage_method": skeleton.linkage_method.value,
    }


def skeleton_from_dict(data: Dict[str, Any]) -> StudySkeleton:
    return StudySkeleton(
        study_id=data["study_id"],
        mrn=data["mrn"],
        monitor_patient_id=data["monitor_patient_id"],
        device_bed_label=data["device_bed_label"],
        bed_label=data["bed_label"],
        start=utc(data["start"]),
        end=utc(data["end"]),
        linkage_method=LinkageMethod(data["linkage_method"]),
    )


def has_data(study: Study) -> bool:
    return bool(study.waves) or not (study.numerics.empty and study.alerts.empty and study.enumerations.empty)


def _identifiers(bundle: ExtractBundle) -> Tuple[List[str], List[str]]:
    """(identifier deny list, patient names) seen anywhere in the bundle."""
    tables = bundle.tables

    def values(table: str, column: str) -> Set[str]:
        return set(tables[table][column].dropna().astype(str))

    deny = values("adt_events", "mrn") | values("adt_events", "visit_id") | values("device_logs", "encounter_id")
    for table in ("numerics", "wave_samples", "enumerations", "alerts"):
        deny |= values(table, "lifetime_id") | values(table, "monitor_patient_id")
    names = sorted(values("adt_events", "patient_name") - {""})
    return sorted(deny - {""}), names


class _DayRun:
    """One attempt at one day; intermediate results are rebuilt on demand."""

    def __init__(self, pipeline: 'ArchivePipeline', day: date, log: RunLogger):
        self.pipeline = pipeline
        self.config = pipeline.config
        self.layout = pipeline.layout
        self.day = day
        self.log = log
        self._verified: Optional[VerifiedBundle] = None
        self._bundle: Optional[ExtractBundle] = None
        self._linkage: Optional[List[LinkageResult]] = None

    @property
    def verified(self) -> VerifiedBundle:
        if self._verified is None:
            self._verified = verify_bundle(self.layout.bundle_dir(self.day), self.day)
        return self._verified

    @property
    def bundle(self) -> ExtractBundle:
        if self._bundle is None:
            self._bundle = parse_extract_day(self.verified)
        return self._bundle

    @property
    def linkage(self) -> List[LinkageResult]:
        if self._linkage is None:
            self._linkage, _ = self._link()
        return self._linkage

    def _link(self) -> Tuple[List[LinkageResult], Any]:
        return link_day(
            self.bundle,
            self.pipeline.bed_map,
            max_gap=timedelta(seconds=self.config.max_gap_seconds),
            readmit_gap=timedelta(seconds=self.config.readmit_gap_seconds),
        )

    def plan(self) -> List[StudySkeleton]:
        data = read_json(self.layout.state_dir(self.day) / PLAN_FILE)
        return [skeleton_from_dict(s) for s in data["studies"]]

    def _fill(self, skeletons: Sequence[StudySkeleton]) -> Tuple[List[Study], Any]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OrphanData)
            return fill_day(skeletons, self.bundle)

    # phases

    def verify(self) -> str:
        bundle = self.verified
        self.log.info("bundle verified", files=len(bundle.manifest))
        return sha256_file(self.layout.bundle_dir(self.day) / MANIFEST_FILE)

    def parse(self) -> str:
        report = validate_row_counts(self.bundle)
        if report.ok is False:
            bad = report.mismatched()
            raise SchemaViolation(bad[0], f"row count differs from counts.csv for {', '.join(bad)}")
        self.log.info("bundle parsed", rows={t: c.actual for t, c in report.tables.items()},
                      counts_declared=report.ok is not None)
        return sha256_bytes(dump_json(report.to_dict()).encode("utf-8"))

    def link(self) -> str:
        results, report = self._link()
        self._linkage = results
        target = self.layout.linkage_dir(self.day)
        with staged_directory(target) as staging:
            lines = [json.dumps(entry, sort_keys=True) + "\n" for entry in audit_entries(results)]
            atomic_write_text(staging / AUDIT_FILE, "".join(lines))
            write_json(staging / REPORT_FILE, report.to_dict())
        self.log.info("streams linked", streams=report.total_streams,
                      missing_lifetime_id=report.total_streams_missing_id,
                      coverage=round(report.coverage_fraction, 4), tie_breaks=report.tie_breaks,
                      unpaired_stays=report.unpaired_stays)
        return tree_digest(target)

    def segment(self) -> str:
        skeletons = plan_studies(self.linkage, self.bundle)
        studies, orphans = self._fill(skeletons)
        kept = [s.skeleton for s in studies if has_data(s)]
        if not orphans.empty:
            self.log.warning("records outside every study", **orphans.to_dict())
        path = self.layout.state_dir(self.day) / PLAN_FILE
        write_json(path, {
            "studies": [skeleton_to_dict(s) for s in kept],
            "dropped_empty": len(skeletons) - len(kept),
            "orphans": orphans.to_dict(),
        })
        self.log.info("studies planned", studies=len(kept), dropped_empty=len(skeletons) - len(kept))
        return sha256_file(path)

    def write(self) -> str:
        studies, _ = self._fill(self.plan())
        target = self.layout.studies_dir(self.day)

        with staged_directory(target) as staging:
            def write_one(study: Study) -> Dict[str, Any]:
                folder = write_study_folder(study, staging / study.study_id)
                return pack_study(folder.path).to_dict()

            packs = run_parallel(write_one, studies, self.config.worker_count)

        write_json(self.layout.state_dir(self.day) / PACKS_FILE, packs)
        self.log.info("studies written", studies=len(packs), bytes=sum(p["size_bytes"] for p in packs))
        return tree_digest(target)

    def deidentify(self) -> str:
        skeletons = self.plan()
        deid_map = update_map(self.layout.deid_map_path, self.config.deid_seed,
                              [s.mrn for s in skeletons if s.mrn is not None])
        deny, names = _identifiers(self.bundle)
        source = self.layout.studies_dir(self.day)
        target = self.layout.deid_dir(self.day)

        with staged_directory(target) as staging:
            def deid_one(skeleton: StudySkeleton) -> Dict[str, Any]:
                identity = StudyIdentity(study_id=skeleton.study_id, mrn=skeleton.mrn,
                                         monitor_patient_id=skeleton.monitor_patient_id,
                                         bed_label=skeleton.bed_label, start=skeleton.start)
                entry = resolve_entry(identity, deid_map)
                folder = deidentify_study(source / skeleton.study_id, identity, deid_map, staging, deny, names)
                pack = pack_study(folder)
                return {"source": skeleton.study_id, "pseudo_id": entry.pseudo_id,
                        "shift_days": entry.shift_days, **pack.to_dict()}

            records = run_parallel(deid_one, skeletons, self.config.worker_count)

        write_json(self.layout.state_dir(self.day) / DEID_FILE, records)
        self.log.info("studies de-identified", studies=len(records), batch=self.layout.batch(self.day))
        return tree_digest(target)

    def publish(self) -> str:
        skeletons = self.plan()
        units = self.pipeline.bed_units
        day_text = self.day.isoformat()
        studies_dir = self.layout.studies_dir(self.day)
        packs = {p["study_id"]: p for p in read_json(self.layout.state_dir(self.day) / PACKS_FILE)}
        deid_records = {r["source"]: r for r in read_json(self.layout.state_dir(self.day) / DEID_FILE)}
        batch = self.layout.batch(self.day)
        deid_dir = self.layout.deid_dir(self.day)

        identified: List[CatalogEntry] = []
        deidentified: List[CatalogEntry] = []
        for skeleton in skeletons:
            unit = units.unit_of(skeleton.bed_label)
            pack = _packed(packs[skeleton.study_id], studies_dir)
            identified.append(CatalogEntry(
                study=StudyMapRow(
                    study_id=skeleton.study_id, bed=skeleton.bed_label, clinical_unit=unit,
                    start=skeleton.start, end=skeleton.end,
                    storage_path=f"studies/day={day_text}/{pack.zip_path.name}",
                    linkage_method=skeleton.linkage_method.value,
                    lifetime_id_source=skeleton.lifetime_id_source,
                    mrn=skeleton.mrn, monitor_patient_id=skeleton.monitor_patient_id,
                ),
                details=detail_rows(skeleton.study_id, read_json(studies_dir / skeleton.study_id / DETAILS_FILE)),
                pack=pack,
            ))

            record = deid_records[skeleton.study_id]
            deid_pack = _packed(record, deid_dir)
            shift = pd.Timedelta(days=int(record["shift_days"]))
            deidentified.append(CatalogEntry(
                study=StudyMapRow(
                    study_id=record["study_id"], bed=skeleton.bed_label, clinical_unit=unit,
                    start=skeleton.start - shift, end=skeleton.end - shift,
                    storage_path=f"studies/batch={batch}/{deid_pack.zip_path.name}",
                    linkage_method=skeleton.linkage_method.value,
                    lifetime_id_source=skeleton.lifetime_id_source,
                    pseudo_id=record["pseudo_id"],
                ),
                details=detail_rows(record["study_id"], read_json(deid_dir / record["study_id"] / DETAILS_FILE)),
                pack=deid_pack,
            ))

        for entry in identified + deidentified:
            assert entry.pack is not None
            verify_pack(entry.pack.zip_path, entry.pack.size_bytes, entry.pack.sha256)

        catalog = self.config.catalog_root
        written = publish_day(catalog, CatalogKind.IDENTIFIED, day_text, identified, self.config.identified_root)
        written_deid = publish_day(catalog, CatalogKind.DEID, batch, deidentified, self.config.deid_root)
        parts = sorted(list(written.values()) + list(written_deid.values()))
        self.log.info("catalogs published", studies=len(identified))
        return sha256_bytes("".join(f"{p.relative_to(catalog).as_posix()}:{sha256_file(p)}\n"
                                    for p in parts).encode("utf-8"))

    # bookkeeping

    def outputs(self, phase: Phase) -> List[Tuple[Path, Path]]:
        """(root, path) of everything the phase writes; partial copies get quarantined."""
        identified = self.config.identified_root
        state = self.layout.state_dir(self.day)
        if phase is Phase.LINKED:
            return [(identified, self.layout.linkage_dir(self.day))]
        if phase is Phase.SEGMENTED:
            return [(identified, state / PLAN_FILE)]
        if phase is Phase.WRITTEN:
            return [(identified, self.layout.studies_dir(self.day)), (identified, state / PACKS_FILE)]
        if phase is Phase.DEIDENTIFIED:
            return [(self.config.deid_root, self.layout.deid_dir(self.day)), (identified, state / DEID_FILE)]
        return []

    def quarantine(self, phase: Phase, include_outputs: bool) -> List[str]:
        moved: List[str] = []
        for root, path in self.outputs(phase):
            candidates = sorted(path.parent.glob(f"{TMP_PREFIX}{path.name}*")) if path.parent.exists() else []
            if include_outputs and path.exists():
                candidates.append(path)
            if not candidates:
                continue
            destination = self.layout.quarantine_dir(root, self.day, phase)
            destination.mkdir(parents=True, exist_ok=True)
            for candidate in candidates:
                shutil.move(str(candidate), str(destination / candidate.name))
                moved.append(candidate.relative_to(root).as_posix())
        return moved

    def handlers(self) -> Dict[Phase, Callable[[], str]]:
        return {
            Phase.VERIFIED: self.verify,
            Phase.PARSED: self.parse,
            Phase.LINKED: self.link,
            Phase.SEGMENTED: self.segment,
            Phase.WRITTEN: self.write,
            Phase.DEIDENTIFIED: self.deidentify,
            Phase.PUBLISHED: self.publish,
        }


def _packed(record: Dict[str, Any], directory: Path) -> PackedStudy:
    return PackedStudy(study_id=record["study_id"], zip_path=directory / record["zip"],
                       size_bytes=int(record["size_bytes"]), sha256=record["sha256"])


@dataclass
class DayOutcome:
    day: date
    status: str
    phase: Optional[str] = None
    digests: Dict[str, str] = field(default_factory=dict)
    error: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"day": self.day.isoformat(), "status": self.status, "phase": self.phase,
                "digests": dict(self.digests), "error": self.error}


@dataclass
class RangeSummary:
    outcomes: List[DayOutcome] = field(default_factory=list)

    def count(self, status: str) -> int:
        return sum(1 for o in self.outcomes if o.status == status)

    @property
    def exit_code(self) -> int:
        """0 when no day failed, 1 when no processed day published, 2 otherwise. Skipped days do not count."""
        if not self.count("failed"):
            return 0
        return 2 if self.count("published") else 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "days": [o.to_dict() for o in self.outcomes],
            "published": self.count("published"),
            "failed": self.count("failed"),
            "skipped": self.count("skipped"),
            "exit_code": self.exit_code,
        }


class ArchivePipeline:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.layout = ArchiveLayout(config)
        self.bed_map = BedLabelMap.from_csv(config.bed_map_path, strict=config.strict_labels)
        self.bed_units = BedUnitMap.from_csv(config.bed_units_path)

    def run_day(self, day: date, stop_after: Optional[Phase] = None, console: bool = True) -> DayRunState:
        """
        Run the phases of ``day`` that have not completed yet.

        ``stop_after`` ends the run once that phase is checkpointed. A failing
        phase has its partial outputs moved to quarantine, a ``failure.json``
        written next to the state file, and is raised as PhaseFailure.
        """
        root = self.config.identified_root
        state = DayRunState.load(root, day)
        log = RunLogger(day.isoformat(), self.layout.log_dir(day), console=console)
        run = _DayRun(self, day, log)
        handlers = run.handlers()
        try:
            if state.published:
                log.info("day already published")
                return state
            for phase in PHASES:
                if state.done(phase):
                    continue
                log.phase = phase.value
                stale = run.quarantine(phase, include_outputs=False)
                if stale:
                    log.warning("stale staging output quarantined", paths=stale)
                try:
                    digest = handlers[phase]()
                except Exception as e:
                    moved = run.quarantine(phase, include_outputs=True)
                    write_failure(root, day, phase, e)
                    log.error("phase failed", error_type=type(e).__name__, error=str(e), quarantined=moved)
                    raise PhaseFailure(phase.value, e) from e
                state.advance(phase, digest)
                state.save(root)
                if stop_after is phase:
                    log.info("stopping as requested")
                    break
            if state.published:
                clear_failure(root, day)
                log.phase = None
                log.info("day complete", digests=state.digests)
            return state
        finally:
            log.close()

    def run_range(self, day_from: date, day_to: date, parallelism: Optional[int] = None) -> RangeSummary:
        """
        Run every day in ``[day_from, day_to]`` whose bundle exists, at most
        ``parallelism`` at once. Days without a bundle are skipped and one
        failing day never stops the others.
        """
        days = day_range(day_from, day_to)
        present = [d for d in days if self.layout.bundle_dir(d).is_dir()]
        workers = parallelism or self.config.parallelism
        if workers <= 1 or len(present) <= 1:
            ran = [_run_one(self.config, d) for d in present]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                ran = list(pool.map(_run_one, [self.config] * len(present), present))
        by_day = {o.day: o for o in ran}
        return RangeSummary([by_day.get(d) or DayOutcome(day=d, status="skipped") for d in days])

    def study_audit(self, study_id: str, day: Optional[date] = None) -> Dict[str, Any]:
        """The study's plan entry and the linkage audit rows of its stream and bed."""
        if day is None:
            day = datetime.strptime(study_id.rsplit("_", 1)[-1][:8], "%Y%m%d").date()
        plan_path = self.layout.state_dir(day) / PLAN_FILE
        if not plan_path.is_file():
            raise KeyError(f"no segmented run for {day.isoformat()}")
        matches = [s for s in read_json(plan_path)["studies"] if s["study_id"] == study_id]
        if not matches:
            raise KeyError(f"study {study_id} is not in the plan for {day.isoformat()}")
        study = matches[0]
        start, end = utc(study["start"]), utc(study["end"])
        audit_path = self.layout.linkage_dir(day) / AUDIT_FILE
        lines = audit_path.read_text(encoding="utf-8").splitlines() if audit_path.is_file() else []
        entries = [json.loads(line) for line in lines if line]
        rows = [
            e for e in entries
            if e["monitor_patient_id"] == study["monitor_patient_id"]
            and e["device_bed_label"] == study["device_bed_label"]
            and utc(e["start"]) < end and utc(e["end"]) > start
        ]
        return {"study": study, "linkage": rows}

    def day_status(self, day: date) -> Dict[str, Any]:
        state = DayRunState.load(self.config.identified_root, day)
        return {**state.to_dict(), "failure": read_failure(self.config.identified_root, day)}


def _run_one(config: PipelineConfig, day: date) -> DayOutcome:
    try:
        state = ArchivePipeline(config).run_day(day, console=False)
    except PhaseFailure as e:
        state = DayRunState.load(config.identified_root, day)
        return DayOutcome(day=day, status="failed", phase=e.phase, digests=state.digests,
                          error={"error_type": type(e.cause).__name__, "message": str(e.cause)})
    except Exception as e:
        return DayOutcome(day=day, status="failed",
                          error={"error_type": type(e).__name__, "message": str(e)})
    return DayOutcome(day=day, status="published" if state.published else "stopped",
                      phase=state.phase.value if state.phase else None, digests=state.digests)


def run_day(config: PipelineConfig, day: date, stop_after: Optional[Phase] = None,
            console: bool = True) -> DayRunState:
    return ArchivePipeline(config).run_day(day, stop_after=stop_after, console=console)


def run_range(config: PipelineConfig, day_from: date, day_to: date,
              parallelism: Optional[int] = None) -> RangeSummary:
    return ArchivePipeline(config).run_range(day_from, day_to, parallelism)


def archive_digest(config: PipelineConfig) -> Dict[str, str]:
    """Content digests of the three output roots, leaving out run bookkeeping."""
    return {
        "identified": tree_digest(config.identified_root, exclude=IDENTIFIED_SCRATCH),
        "deid": tree_digest(config.deid_root, exclude={"quarantine"}),
        "catalog": tree_digest(config.catalog_root, exclude={"reports"}),
    }


def stray_staging(root: Path) -> List[Path]:
    """Leftover staging paths under ``root``."""
    if not root.exists():
        return []
    return sorted(p for p in root.rglob(f"{TMP_PREFIX}*") if os.sep + "quarantine" + os.sep not in str(p))
