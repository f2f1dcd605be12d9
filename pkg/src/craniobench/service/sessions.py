"""Session state for the interactive workbench service.

Each session stages a config against one target case and executes pipeline
stages one at a time. Changing a parameter resets every stage downstream of
the earliest one it affects; exactly one stage may run per session.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

from ..pipeline.cache import CaseRecord, Repository
from ..pipeline.config import PipelineConfig
from ..pipeline.run import STAGES, ReconstructionRun

# earliest stage invalidated when a config field changes
FIELD_RESETS = {
    "selection": "selection",
    "seed": "selection",
    "roi": "alignment",
    "clipping": "alignment",
    "icp": "alignment",
    "voxel_size": "fusion",
    "threshold": "fusion",
    "offset": "postprocess",
    "operators": "postprocess",
}

# which stage owns each fetchable artifact
ARTIFACT_STAGES = {
    "ratio_histogram": "fusion",
    "implant": "postprocess",
    "report": "metrics",
    "implant_distances": "metrics",
}


@dataclass
class StageStatus:
    status: str = "pending"  # pending | running | done | failed
    progress: float = 0.0
    reason: str | None = None

    def as_dict(self) -> dict:
        d = {"status": self.status, "progress": self.progress}
        if self.reason is not None:
            d["reason"] = self.reason
        return d


@dataclass
class Session:
    case: CaseRecord
    repository: Repository
    config: PipelineConfig
    session_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    stages: dict[str, StageStatus] = field(
        default_factory=lambda: {name: StageStatus() for name in STAGES})
    artifacts: dict[str, tuple[bytes, str]] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)
    running_stage: str | None = None

    def __post_init__(self):
        self.run = ReconstructionRun(self.config, self.case, self.repository)

    def stage_order_ok(self, stage: str) -> bool:
        idx = STAGES.index(stage)
        return all(self.stages[s].status == "done" for s in STAGES[:idx])

    def apply_patch(self, new_config: PipelineConfig, changed_fields: set[str]) -> None:
        self.config = new_config
        stages_hit = [FIELD_RESETS[f] for f in changed_fields if f in FIELD_RESETS]
        if not stages_hit:
            return
        earliest = min(stages_hit, key=STAGES.index)
        self.reset_from(earliest)
        self.run.set_config(new_config, earliest)

    def reset_from(self, stage: str) -> None:
        idx = STAGES.index(stage)
        for name in STAGES[idx:]:
            self.stages[name] = StageStatus()
        for artifact, owner in ARTIFACT_STAGES.items():
            if STAGES.index(owner) >= idx:
                self.artifacts.pop(artifact, None)

    def as_dict(self) -> dict:
        d = {
            "session_id": self.session_id,
            "case_id": self.case.case_id,
            "has_ground_truth": self.case.has_ground_truth,
            "config": self.config.to_dict(),
            "stages": {name: st.as_dict() for name, st in self.stages.items()},
        }
        if self.run.candidates is not None:
            d["candidates"] = list(self.run.candidates)
        if self.run.alignments is not None:
            d["alignments"] = [
                {"case_id": cid, "fitness_mse": res.fitness_mse,
                 "iterations": res.iterations, "converged": res.converged}
                for cid, res in self.run.alignments]
        return d
