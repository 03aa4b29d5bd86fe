"""Deterministic keyword/slot grammar over analysis requests.

This parser covers every intent the platform can execute, so losing the
LLM endpoint only reduces phrasing flexibility, never expressiveness.
"""

from __future__ import annotations

import re

from .plans import ClarificationNeeded, TaskPlan

_NODE = re.compile(r"\b(?:node|sensor)\s+([A-Za-z0-9_\-]+)")
_DATE = re.compile(r"\b(\d{4}-\d{2}-\d{2})\b")
_K = re.compile(r"\b(?:k\s*=\s*(\d+)|(\d+)\s+(?:clusters|groups))\b")
_DATASET = re.compile(r"\bdataset\s+([A-Za-z0-9_\-]+)")
_SEED = re.compile(r"\bseed\s*=?\s*(\d+)")
_BLEND = re.compile(r"\b(?:alpha|blend)\s*=?\s*([0-9]*\.?[0-9]+)")
_THETA = re.compile(r"\btheta\s*=?\s*([0-9]*\.?[0-9]+)")
_DAMPING = re.compile(r"\b(?:lambda|damping)\s*=?\s*([0-9]*\.?[0-9]+)")
_ISLANDS = re.compile(r"\b(\d+)\s+(?:islands|processes|subpopulations)\b")
_POPULATION = re.compile(r"\bpopulation\s*(?:of|=)?\s*(\d+)")
_BACKREF = re.compile(r"\b(them|these|those|that|it|again)\b")

_FEATURE_VIEW = re.compile(r"\b(pollutant|feature|level|profile|value)s?\b")

_LOCATE = re.compile(r"\b(location|locations|locate|where|position|positions|map)\b")
_SENSOR_WORD = re.compile(r"\b(sensor|sensors|node|nodes)\b")
_PREDICT = re.compile(r"\b(predict|prediction|predictions|forecast|forecasts|forecasting|predicted)\b")
_SIMILAR = re.compile(r"\b(similar|similarity|similarities|alike)\b")
_CLUSTER = re.compile(r"\b(cluster|clusters|clustering|group|groups|grouping|partition)\b")
_COMPARE = re.compile(r"\b(compare|comparison|versus|vs|differ|difference|differences)\b")
_INSPECT = re.compile(r"\b(inspect|detail|details|profile)\b")
_SHOW = re.compile(r"\b(show|display|plot|draw|view)\b")
_HPO = re.compile(r"\b(hpo|hyperparameter|hyperparameters|tune|tuning|optimi[sz]e|optimi[sz]ation)\b")
_MODEL_WORD = re.compile(r"\b(model|training|network)\b")


def parse_rules(text: str, session=None):
    """Map an utterance to a TaskPlan, or ClarificationNeeded when ambiguous."""
    if not text or not text.strip():
        return ClarificationNeeded(
            message="Please describe an analysis task (for example "
            "'cluster the sensors into 5 groups').",
            original_text=text or "",
        )
    lowered = text.lower()

    params: dict = {}
    if m := _NODE.search(lowered):
        params["node"] = m.group(1)
    if m := _DATE.search(lowered):
        params["date"] = m.group(1)
    if m := _K.search(lowered):
        params["k"] = int(m.group(1) or m.group(2))
    if m := _DATASET.search(lowered):
        params["dataset"] = m.group(1)
    if m := _SEED.search(lowered):
        params["seed"] = int(m.group(1))
    if m := _BLEND.search(lowered):
        params["blend"] = float(m.group(1))
    if m := _THETA.search(lowered):
        params["theta"] = float(m.group(1))
    if m := _DAMPING.search(lowered):
        params["damping"] = float(m.group(1))

    if session is not None and getattr(session, "rounds", None):
        if _BACKREF.search(lowered):
            params["round_ref"] = len(session.rounds) - 1

    intent, viz = _detect_intent(lowered, params)
    if intent is None:
        return ClarificationNeeded(
            message="I could not map that to an analysis task. Supported tasks: "
            "predict, locate sensors, similarity, cluster, compare clusters, "
            "inspect a node, tune hyperparameters.",
            original_text=text,
        )

    if intent == "hpo":
        if m := _ISLANDS.search(lowered):
            params["islands"] = int(m.group(1))
        if m := _POPULATION.search(lowered):
            params["population"] = int(m.group(1))

    allowed_keys = {
        "predict": {"dataset", "seed", "round_ref", "node", "date"},
        "locate_sensors": {"dataset", "seed", "round_ref"},
        "similarity": {"dataset", "seed", "round_ref", "blend", "damping", "theta"},
        "cluster": {"dataset", "seed", "round_ref", "k", "blend", "damping", "theta"},
        "compare_clusters": {"dataset", "seed", "round_ref", "k", "view",
                             "damping", "theta"},
        "inspect_node": {"dataset", "seed", "round_ref", "node", "date"},
        "hpo": {"dataset", "seed", "round_ref", "islands", "population"},
    }[intent]
    params = {k: v for k, v in params.items() if k in allowed_keys}
    return TaskPlan(intent=intent, parameters=params, visualization=viz,
                    provenance="rules")


def _detect_intent(lowered: str, params: dict):
    has_cluster = bool(_CLUSTER.search(lowered))
    if _COMPARE.search(lowered) and has_cluster:
        view = "features" if _FEATURE_VIEW.search(lowered) else "matrix"
        if view == "features":
            params["view"] = "features"
            return "compare_clusters", "parallel_coords"
        return "compare_clusters", "heatmap"
    # An explicit inspect verb with a named node outranks a passing mention
    # of clustering ("inspect node X from that clustering").
    if "node" in params and _INSPECT.search(lowered):
        return "inspect_node", "line"
    if has_cluster:
        return "cluster", "cluster_map"
    if _HPO.search(lowered) and (_MODEL_WORD.search(lowered) or "hpo" in lowered
                                 or _PREDICT.search(lowered)):
        return "hpo", "line"
    if _SIMILAR.search(lowered):
        return "similarity", "force_graph"
    if _PREDICT.search(lowered):
        return "predict", "line"
    if _LOCATE.search(lowered) and _SENSOR_WORD.search(lowered):
        return "locate_sensors", "scatter_map"
    if "node" in params and (_INSPECT.search(lowered) or _SHOW.search(lowered)):
        return "inspect_node", "line"
    return None, None
