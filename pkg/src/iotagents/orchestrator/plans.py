"""Task plans, visualization payloads, and conversation sessions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema

from ..store import register_record_type

INTENTS = (
    "predict",
    "locate_sensors",
    "similarity",
    "cluster",
    "compare_clusters",
    "inspect_node",
    "hpo",
)

VISUALIZATIONS = (
    "line",
    "scatter_map",
    "force_graph",
    "heatmap",
    "parallel_coords",
    "cluster_map",
)

DEFAULT_VISUALIZATION = {
    "predict": "line",
    "locate_sensors": "scatter_map",
    "similarity": "force_graph",
    "cluster": "cluster_map",
    "compare_clusters": "heatmap",
    "inspect_node": "line",
    "hpo": "line",
}

# Parameters each intent is allowed to carry (beyond these, validation fails).
_COMMON_PARAMS = {"dataset", "seed", "round_ref"}
INTENT_PARAMS = {
    "predict": _COMMON_PARAMS | {"node", "date", "epochs", "hidden_size"},
    "locate_sensors": _COMMON_PARAMS,
    "similarity": _COMMON_PARAMS | {"blend", "damping", "theta", "k_neighbors"},
    "cluster": _COMMON_PARAMS | {"k", "blend", "damping", "theta", "k_neighbors"},
    "compare_clusters": _COMMON_PARAMS | {"k", "view", "damping", "theta"},
    "inspect_node": _COMMON_PARAMS | {"node", "date"},
    "hpo": _COMMON_PARAMS | {"islands", "population", "outer_iterations",
                             "inner_iterations", "epochs"},
}


class PlanValidationError(ValueError):
    pass


@dataclass
class TaskPlan:
    intent: str
    parameters: dict = field(default_factory=dict)
    visualization: str = ""
    provenance: str = "rules"  # rules | llm

    def __post_init__(self):
        if not self.visualization:
            self.visualization = DEFAULT_VISUALIZATION.get(self.intent, "line")
        validate_plan(self)

    def as_dict(self) -> dict:
        return {
            "intent": self.intent,
            "parameters": dict(self.parameters),
            "visualization": self.visualization,
            "provenance": self.provenance,
        }


@dataclass
class ClarificationNeeded:
    """Parse outcome when no executable intent can be extracted."""

    message: str
    original_text: str = ""


@dataclass
class VisualizationPayload:
    kind: str
    title: str
    data: dict
    narrative: str
    agent: str
    narrative_source: str = "template"

    def __post_init__(self):
        validate_payload(self)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "title": self.title,
            "data": self.data,
            "narrative": self.narrative,
            "agent": self.agent,
            "narrative_source": self.narrative_source,
        }


@dataclass
class Round:
    text: str
    plan: TaskPlan | None
    payloads: list
    result_summary: dict = field(default_factory=dict)


@dataclass
class Session:
    id: str
    rounds: list = field(default_factory=list)
    bindings: dict = field(default_factory=dict)  # role -> store record id

    def append_round(self, round_: Round) -> None:
        self.rounds.append(round_)

    @property
    def last_round(self) -> Round | None:
        return self.rounds[-1] if self.rounds else None


def _load_schema(name: str) -> dict:
    text = resources.files("iotagents.orchestrator").joinpath(
        f"schemas/{name}.schema.json"
    ).read_text(encoding="utf-8")
    return json.loads(text)


_SCHEMA_CACHE: dict[str, dict] = {}


def get_schema(name: str) -> dict:
    if name not in _SCHEMA_CACHE:
        _SCHEMA_CACHE[name] = _load_schema(name)
    return _SCHEMA_CACHE[name]


def validate_plan(plan: TaskPlan) -> None:
    try:
        jsonschema.validate(plan.as_dict() if isinstance(plan, TaskPlan) else plan,
                            get_schema("task_plan"))
    except jsonschema.ValidationError as exc:
        raise PlanValidationError(f"invalid plan: {exc.message}") from exc
    allowed = INTENT_PARAMS[plan.intent]
    unknown = set(plan.parameters) - allowed
    if unknown:
        raise PlanValidationError(
            f"intent {plan.intent!r} does not accept parameters {sorted(unknown)}"
        )


def validate_payload(payload: VisualizationPayload) -> None:
    body = payload.as_dict() if isinstance(payload, VisualizationPayload) else payload
    try:
        jsonschema.validate(body, get_schema("payload"))
        jsonschema.validate(body["data"], get_schema(f"payload_{body['kind']}"))
    except jsonschema.ValidationError as exc:
        raise PlanValidationError(f"invalid payload: {exc.message}") from exc


def plan_from_dict(data: dict, provenance: str) -> TaskPlan:
    if not isinstance(data, dict):
        raise PlanValidationError("plan must be a JSON object")
    return TaskPlan(
        intent=data.get("intent", ""),
        parameters=dict(data.get("parameters", {})),
        visualization=data.get("visualization", ""),
        provenance=provenance,
    )


for _cls in (TaskPlan, ClarificationNeeded, VisualizationPayload, Round, Session):
    register_record_type(_cls)
