"""Pydantic models for confusion counts, per-case metrics and experiment tables."""
from typing import Optional

from pydantic import BaseModel, Field, NonNegativeInt, computed_field


class ConfusionCounts(BaseModel):
    """Per-class pixel tallies."""

    tp: NonNegativeInt = 0
    fp: NonNegativeInt = 0
    fn: NonNegativeInt = 0

    @property
    def gt_positives(self) -> int:
        return self.tp + self.fn

    @property
    def pred_positives(self) -> int:
        return self.tp + self.fp


class ClassMetrics(BaseModel):
    class_id: int = Field(..., ge=1)
    dsc: float = Field(..., ge=0.0, le=1.0)
    hd95: float = Field(..., ge=0.0)
    recall: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    iou: Optional[float] = Field(default=None, ge=0.0, le=1.0)


class CaseMetrics(BaseModel):
    """Foreground-class metrics of one test case."""

    case: int = Field(..., ge=0)
    classes: list[ClassMetrics]

    @property
    def mean_dsc(self) -> float:
        return sum(c.dsc for c in self.classes) / len(self.classes)

    @property
    def mean_hd95(self) -> float:
        return sum(c.hd95 for c in self.classes) / len(self.classes)


class MetricReport(BaseModel):
    """Per-case metrics plus aggregates (mean over classes within a case, then over cases)."""

    num_classes: int = Field(..., ge=2)
    cases: list[CaseMetrics] = Field(default_factory=list)

    def _class_mean(self, class_id: int, field: str) -> Optional[float]:
        values = [
            getattr(c, field) for case in self.cases for c in case.classes if c.class_id == class_id
        ]
        values = [v for v in values if v is not None]
        return sum(values) / len(values) if values else None

    @computed_field
    @property
    def per_class_dsc(self) -> dict[int, float]:
        return {k: self._class_mean(k, "dsc") or 0.0 for k in range(1, self.num_classes)}

    @computed_field
    @property
    def mean_dsc(self) -> float:
        return sum(case.mean_dsc for case in self.cases) / len(self.cases) if self.cases else 0.0

    @computed_field
    @property
    def mean_hd95(self) -> float:
        return sum(case.mean_hd95 for case in self.cases) / len(self.cases) if self.cases else 0.0

    @computed_field
    @property
    def mean_recall(self) -> Optional[float]:
        values = [c.recall for case in self.cases for c in case.classes if c.recall is not None]
        return sum(values) / len(values) if values else None

    @computed_field
    @property
    def mean_iou(self) -> Optional[float]:
        values = [c.iou for case in self.cases for c in case.classes if c.iou is not None]
        return sum(values) / len(values) if values else None

    def rows(self) -> list[dict]:
        """One row per foreground class followed by the aggregate row."""
        rows = []
        for k in range(1, self.num_classes):
            row = {
                "class": k,
                "dsc_percent": 100.0 * self.per_class_dsc[k],
                "hd95": self._class_mean(k, "hd95") or 0.0,
            }
            recall, iou = self._class_mean(k, "recall"), self._class_mean(k, "iou")
            if recall is not None:
                row.update(recall=recall, iou=iou)
            rows.append(row)
        aggregate = {"class": "mean", "dsc_percent": 100.0 * self.mean_dsc, "hd95": self.mean_hd95}
        if self.mean_recall is not None:
            aggregate.update(recall=self.mean_recall, iou=self.mean_iou)
        rows.append(aggregate)
        return rows


class AblationRow(BaseModel):
    """One encoder/bridge switch combination and its held-out score."""

    local: bool
    global_: bool = Field(..., alias="global")
    lgff: bool
    pmi: bool
    pga: bool
    dsc_percent: float = Field(..., ge=0.0, le=100.0)
    hd95: float = Field(..., ge=0.0)
    seeds: list[int] = Field(default_factory=list)

    model_config = {"populate_by_name": True}


class SweepRow(BaseModel):
    alpha: float = Field(..., ge=0.0, le=1.0)
    dsc_percent: float = Field(..., ge=0.0, le=100.0)
    hd95: float = Field(..., ge=0.0)
