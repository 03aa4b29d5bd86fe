from .engine import (
    AgentResult,
    ExecutionError,
    MissingBindingError,
    Orchestrator,
)
from .llm import LlmLimits, LlmUnavailable, llm_complete
from .plans import (
    INTENTS,
    VISUALIZATIONS,
    ClarificationNeeded,
    PlanValidationError,
    Round,
    Session,
    TaskPlan,
    VisualizationPayload,
    get_schema,
    validate_payload,
    validate_plan,
)
from .ruleparse import parse_rules

__all__ = [
    "AgentResult",
    "ClarificationNeeded",
    "ExecutionError",
    "INTENTS",
    "LlmLimits",
    "LlmUnavailable",
    "MissingBindingError",
    "Orchestrator",
    "PlanValidationError",
    "Round",
    "Session",
    "TaskPlan",
    "VISUALIZATIONS",
    "VisualizationPayload",
    "get_schema",
    "llm_complete",
    "parse_rules",
    "validate_payload",
    "validate_plan",
]
