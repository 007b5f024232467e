"""Check reports and their JSON / markdown renderings."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

VERDICTS = ("pass", "fail", "not_applicable")


@dataclass
class CheckReport:
    id: str
    anchor: str
    group: str
    kind: str
    hypotheses: dict
    hypothesis_tolerances: dict
    residual: float | None
    tolerance: float
    verdict: str
    metadata: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}")


def decide(residual, tol, hypotheses, hypothesis_tols):
    """pass iff every hypothesis and the conclusion are within tolerance; n/a iff a hypothesis is not."""
    for name, value in hypotheses.items():
        if not value <= hypothesis_tols[name]:
            return "not_applicable"
    if residual is not None and residual <= tol:
        return "pass"
    return "fail"


@dataclass
class RunReport:
    fixture: str
    resolution: int
    seed: int
    sample_points: int
    grid_points: int
    checks: list

    @property
    def exit_status(self):
        return 1 if any(c.verdict == "fail" for c in self.checks) else 0

    def to_dict(self):
        return {
            "fixture": self.fixture,
            "resolution": self.resolution,
            "seed": self.seed,
            "sample_points": self.sample_points,
            "grid_points": self.grid_points,
            "checks": [asdict(c) for c in self.checks],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            data["fixture"],
            data["resolution"],
            data["seed"],
            data["sample_points"],
            data["grid_points"],
            [CheckReport(**c) for c in data["checks"]],
        )


def to_json(runs):
    """JSON text for fixture runs; floats use the shortest exact repr.

    A single run is emitted as one object (fixture, checks, ...); several
    runs are wrapped as ``{"runs": [...]}``.
    """
    if len(runs) == 1:
        data = runs[0].to_dict()
    else:
        data = {"runs": [r.to_dict() for r in runs]}
    return json.dumps(data, indent=2, ensure_ascii=False)


def from_json(text):
    data = json.loads(text)
    if "runs" in data:
        return [RunReport.from_dict(r) for r in data["runs"]]
    return [RunReport.from_dict(data)]


def _fmt(x):
    if x is None:
        return "-"
    return f"{x:.3e}"


def to_markdown(runs):
    lines = []
    for run in runs:
        lines.append(f"## {run.fixture}")
        lines.append("")
        lines.append(
            f"resolution {run.resolution}, seed {run.seed}, {run.sample_points} sampled points, "
            f"{run.grid_points} quadrature points"
        )
        lines.append("")
        lines.append("| check | anchor | hypotheses | residual | verdict |")
        lines.append("|---|---|---|---|---|")
        for c in run.checks:
            hyp = ", ".join(f"{k}={_fmt(v)}" for k, v in c.hypotheses.items()) or "none"
            anchor = c.anchor.replace("|", "\\|")
            lines.append(f"| {c.id} | {anchor} | {hyp} | {_fmt(c.residual)} (tol {c.tolerance:.0e}) | {c.verdict} |")
        lines.append("")
    counts = {v: sum(c.verdict == v for r in runs for c in r.checks) for v in VERDICTS}
    lines.append(f"pass {counts['pass']}, fail {counts['fail']}, not applicable {counts['not_applicable']}")
    return "\n".join(lines) + "\n"
