"""Request parsing, sub-agent dispatch, and payload rendering.

Sessions bind store records (series, sensors, streets); every round turns
an utterance into a TaskPlan, executes it against the bound data, and
renders a schema-valid visualization payload with a templated narrative.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field

import numpy as np

from ..datasets import TimeSeriesDataset
from ..hpo import GeneSpec, ParamCodec, PgaConfig, run_pga
from ..numerics import clustering_metrics, regression_metrics
from ..spatial import (
    DiffusionConfig,
    build_cluster_graphs,
    build_graph,
    cluster_similarity_matrix,
    cosimheat_single,
    evaluate_cluster_counts,
    initial_similarity,
    spectral_cluster,
    spectral_embedding,
)
from ..store import FileStore
from ..temporal import TrainConfig, predict_batch, train
from .llm import LlmUnavailable, llm_complete, prompt_template
from .plans import (
    ClarificationNeeded,
    PlanValidationError,
    Round,
    Session,
    TaskPlan,
    VisualizationPayload,
    plan_from_dict,
)
from .ruleparse import parse_rules

CHAT_EPOCHS = 25        # desk-scale training budget inside a chat round
CHAT_HIDDEN = 16
HPO_EPOCHS = 2
KNN_DEFAULT = 10
FORCE_EDGES_PER_NODE = 3


class ExecutionError(RuntimeError):
    def __init__(self, message: str, plan: TaskPlan | None = None):
        prefix = f"[{plan.intent}] " if plan is not None else ""
        super().__init__(prefix + message)
        self.plan = plan


class MissingBindingError(ExecutionError):
    pass


@dataclass
class AgentResult:
    agent: str  # temporal | spatial
    elapsed_s: float
    data: dict = field(default_factory=dict)


def _py(value):
    """Recursively convert numpy scalars/arrays to JSON-native values."""
    if isinstance(value, np.ndarray):
        return [_py(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, dict):
        return {k: _py(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_py(v) for v in value]
    return value


def _round4(value) -> float:
    return float(round(float(value), 4))


class Orchestrator:
    def __init__(self, store: FileStore, llm_endpoint: str | None = None,
                 default_seed: int = 0):
        self.store = store
        self.llm_endpoint = llm_endpoint
        self.default_seed = default_seed
        self.sessions: dict[str, Session] = {}

    # -- session lifecycle -------------------------------------------------

    def create_session(self, session_id: str | None = None) -> Session:
        sid = session_id or uuid.uuid4().hex
        if sid in self.sessions:
            raise ExecutionError(f"session {sid!r} already exists")
        session = Session(id=sid)
        self.sessions[sid] = session
        return session

    def bind_dataset(self, session: Session, role: str, record_id: str) -> None:
        if role not in ("series", "sensors", "streets", "truth"):
            raise ExecutionError(f"unknown binding role {role!r}")
        if record_id not in self.store:
            raise MissingBindingError(f"record {record_id!r} not in store")
        session.bindings[role] = record_id

    def _load_binding(self, session: Session, role: str):
        record_id = session.bindings.get(role)
        if record_id is None:
            raise MissingBindingError(
                f"session has no {role!r} dataset bound", None
            )
        return self.store.load(record_id)

    # -- parsing -----------------------------------------------------------

    def parse_request(self, text: str, session: Session):
        """LLM-first parsing with a deterministic rule-grammar fallback."""
        if text and text.strip() and self.llm_available():
            try:
                return self._parse_with_llm(text, session)
            except (LlmUnavailable, PlanValidationError, ValueError, KeyError):
                pass
        return parse_rules(text, session)

    def llm_available(self) -> bool:
        from .llm import endpoint_from_env

        return bool(self.llm_endpoint or endpoint_from_env())

    def _parse_with_llm(self, text: str, session: Session) -> TaskPlan:
        context_lines = [
            f"round {i}: intent={r.plan.intent} parameters={json.dumps(r.plan.parameters, sort_keys=True)}"
            for i, r in enumerate(session.rounds)
            if r.plan is not None
        ]
        prompt = prompt_template("parse_plan").replace(
            "{context}", "\n".join(context_lines) or "(none)"
        ).replace("{utterance}", text)
        raw = llm_complete(prompt, endpoint=self.llm_endpoint)
        start, end = raw.find("{"), raw.rfind("}")
        if start < 0 or end <= start:
            raise PlanValidationError("no JSON object in completion")
        data = json.loads(raw[start : end + 1])
        return plan_from_dict(data, provenance="llm")

    def apply_feedback(self, session: Session, text: str):
        """Parse a follow-up message in the context of earlier rounds."""
        if not session.rounds:
            raise ExecutionError("apply_feedback requires at least one round")
        outcome = self.parse_request(text, session)
        if isinstance(outcome, TaskPlan):
            ref = outcome.parameters.get("round_ref")
            if ref is not None and not 0 <= ref < len(session.rounds):
                raise ExecutionError(f"round_ref {ref} does not exist", outcome)
        return outcome

    # -- execution ---------------------------------------------------------

    def execute_plan(self, plan: TaskPlan, session: Session) -> AgentResult:
        handler = {
            "predict": self._run_predict,
            "locate_sensors": self._run_locate,
            "similarity": self._run_similarity,
            "cluster": self._run_cluster,
            "compare_clusters": self._run_compare,
            "inspect_node": self._run_inspect,
            "hpo": self._run_hpo,
        }[plan.intent]
        start = time.perf_counter()
        try:
            agent, data = handler(plan, session)
        except ExecutionError:
            raise
        except Exception as exc:
            raise ExecutionError(f"sub-agent failure: {exc}", plan) from exc
        return AgentResult(agent=agent, elapsed_s=time.perf_counter() - start,
                           data=data)

    def _seed(self, plan: TaskPlan) -> int:
        return int(plan.parameters.get("seed", self.default_seed))

    def _ref_summary(self, plan: TaskPlan, session: Session, key: str):
        ref = plan.parameters.get("round_ref")
        if ref is None:
            return None
        if not 0 <= ref < len(session.rounds):
            raise ExecutionError(f"round_ref {ref} does not exist", plan)
        return session.rounds[ref].result_summary.get(key)

    # predict ---------------------------------------------------------------

    def _run_predict(self, plan: TaskPlan, session: Session):
        dataset: TimeSeriesDataset = self._load_binding(session, "series")
        cfg = TrainConfig(
            epochs=int(plan.parameters.get("epochs", CHAT_EPOCHS)),
            hidden_size=int(plan.parameters.get("hidden_size", CHAT_HIDDEN)),
            batch_size=200,
            window=12,
            seed=self._seed(plan),
        )
        result = train(dataset, cfg)
        splits = dataset.window_splits(cfg.window)
        x_test, y_test = splits["test"]
        if x_test.shape[0] == 0:
            raise ExecutionError("dataset too small for a test split", plan)
        ends = splits["ends"][-x_test.shape[0]:]
        preds = predict_batch(result.model, x_test)
        norm = dataset.target_norm()
        actual = norm.denormalize(y_test)
        predicted = norm.denormalize(preds)
        stamps = [dataset.timestamps[e] for e in ends]
        date = plan.parameters.get("date")
        if date:
            keep = [i for i, s in enumerate(stamps) if s.startswith(date)]
            if not keep:
                raise ExecutionError(f"no test samples on date {date}", plan)
            stamps = [stamps[i] for i in keep]
            actual = actual[keep]
            predicted = predicted[keep]
        report = regression_metrics(actual, predicted)
        return "temporal", {
            "timestamps": stamps,
            "actual": _py(actual),
            "predicted": _py(predicted),
            "metrics": {k: _round4(v) for k, v in report.as_dict().items()},
            "target": dataset.target,
            "node": plan.parameters.get("node"),
            "epochs_run": len(result.history),
        }

    # locate ----------------------------------------------------------------

    def _run_locate(self, plan: TaskPlan, session: Session):
        nodes = self._load_binding(session, "sensors")
        points = [
            {
                "id": node.id,
                "lat": _round4(node.latitude),
                "lon": _round4(node.longitude),
                "value": _round4(float(np.mean(node.features))),
            }
            for node in nodes
        ]
        return "spatial", {"points": points, "count": len(points)}

    # similarity ------------------------------------------------------------

    def _similarity_pipeline(self, plan: TaskPlan, nodes):
        blend = float(plan.parameters.get("blend", 0.5))
        damping = float(plan.parameters.get("damping", 0.8))
        theta = float(plan.parameters.get("theta", 0.5))
        k_neighbors = int(plan.parameters.get("k_neighbors", KNN_DEFAULT))
        initial = initial_similarity(nodes, blend=blend)
        graph = build_graph(initial, nodes, k=min(k_neighbors, len(nodes) - 1))
        diffused = cosimheat_single(
            graph, DiffusionConfig(damping=damping, theta=theta)
        )
        return initial, diffused

    def _run_similarity(self, plan: TaskPlan, session: Session):
        nodes = self._load_binding(session, "sensors")
        if len(nodes) < 2:
            raise ExecutionError("similarity needs at least two sensors", plan)
        initial, diffused = self._similarity_pipeline(plan, nodes)
        matrix = diffused.values
        ids = [node.id for node in nodes]
        best_pair, best_value = None, -np.inf
        n = len(ids)
        for i in range(n):
            for j in range(i + 1, n):
                pair_mass = matrix[i, j] + matrix[j, i]
                if pair_mass > best_value:
                    best_value = pair_mass
                    best_pair = (ids[i], ids[j])
        return "spatial", {
            "node_ids": ids,
            "matrix": _py(matrix),
            "initial_matrix": _py(initial.values),
            "strongest_pair": list(best_pair),
            "strongest_value": _round4(best_value / 2.0),
        }

    # cluster ---------------------------------------------------------------

    def _cluster_labels(self, plan: TaskPlan, session: Session, nodes):
        prior = self._ref_summary(plan, session, "matrix")
        if prior is not None:
            matrix = np.asarray(prior, dtype=float)
            ids = self._ref_summary(plan, session, "node_ids")
        else:
            _, diffused = self._similarity_pipeline(plan, nodes)
            matrix = diffused.values
            ids = [node.id for node in nodes]
        seed = self._seed(plan)
        k_param = plan.parameters.get("k")
        if k_param is not None:
            k = int(k_param)
            if not 2 <= k <= len(ids):
                raise ExecutionError(f"k={k} outside [2, {len(ids)}]", plan)
        else:
            sweep = evaluate_cluster_counts(
                matrix, k_range=range(2, min(8, len(ids) - 1) + 1), seed=seed
            )
            k = sweep["recommended"]
        labels = spectral_cluster(matrix, k=k, seed=seed)
        embedding = spectral_embedding(matrix, k)
        report = clustering_metrics(embedding, labels)
        return matrix, ids, labels, k, report

    def _run_cluster(self, plan: TaskPlan, session: Session):
        nodes = self._load_binding(session, "sensors")
        matrix, ids, labels, k, report = self._cluster_labels(plan, session, nodes)
        by_id = {node.id: node for node in nodes}
        points = [
            {
                "id": nid,
                "lat": _round4(by_id[nid].latitude),
                "lon": _round4(by_id[nid].longitude),
                "cluster": int(lab),
            }
            for nid, lab in zip(ids, labels)
        ]
        sizes = {int(c): int(np.sum(labels == c)) for c in np.unique(labels)}
        return "spatial", {
            "points": points,
            "k": int(k),
            "labels": _py(labels),
            "node_ids": ids,
            "matrix": _py(matrix),
            "sizes": {str(c): s for c, s in sorted(sizes.items())},
            "metrics": {key: _round4(val) for key, val in report.as_dict().items()},
        }

    # compare clusters --------------------------------------------------------

    def _run_compare(self, plan: TaskPlan, session: Session):
        nodes = self._load_binding(session, "sensors")
        labels = self._ref_summary(plan, session, "labels")
        if labels is None:
            labels = self._cluster_labels(plan, session, nodes)[2]
        labels = np.asarray(labels, dtype=int)
        if labels.shape[0] != len(nodes):
            raise ExecutionError("label count does not match sensor count", plan)
        streets = None
        if "streets" in session.bindings:
            streets = self._load_binding(session, "streets")
            streets = {k: set(v) for k, v in streets.items()}
        graphs, seeds = build_cluster_graphs(nodes, labels, streets=streets)
        damping = float(plan.parameters.get("damping", 0.8))
        theta = float(plan.parameters.get("theta", 0.5))
        scores, cluster_ids = cluster_similarity_matrix(
            graphs, seeds, DiffusionConfig(damping=damping, theta=theta)
        )
        feature_dim = len(nodes[0].features)
        profiles = {}
        for cid in cluster_ids:
            members = [n for n, lab in zip(nodes, labels) if lab == cid]
            profiles[cid] = np.mean([m.features for m in members], axis=0)
        return "spatial", {
            "cluster_ids": [int(c) for c in cluster_ids],
            "scores": _py(np.round(scores, 6)),
            "profiles": {str(c): _py(np.round(p, 6)) for c, p in profiles.items()},
            "feature_names": [f"f{j}" for j in range(feature_dim)],
            "view": plan.parameters.get("view", "matrix"),
        }

    # inspect node -------------------------------------------------------------

    def _run_inspect(self, plan: TaskPlan, session: Session):
        nodes = self._load_binding(session, "sensors")
        node_id = plan.parameters.get("node")
        if not node_id:
            raise ExecutionError("inspect_node requires a node parameter", plan)
        match = next((n for n in nodes if n.id == node_id), None)
        if match is None:
            raise ExecutionError(f"unknown node {node_id!r}", plan)
        cluster = None
        labels = self._ref_summary(plan, session, "labels")
        ids = self._ref_summary(plan, session, "node_ids")
        if labels is not None and ids is not None and node_id in ids:
            cluster = int(labels[ids.index(node_id)])
        return "spatial", {
            "node": node_id,
            "lat": _round4(match.latitude),
            "lon": _round4(match.longitude),
            "features": _py(np.round(match.features, 6)),
            "streets": sorted(match.streets),
            "cluster": cluster,
        }

    # hpo ------------------------------------------------------------------------

    def _run_hpo(self, plan: TaskPlan, session: Session):
        dataset: TimeSeriesDataset = self._load_binding(session, "series")
        seed = self._seed(plan)
        codec = ParamCodec([GeneSpec("hidden_units", 4, 32)])
        epochs = int(plan.parameters.get("epochs", HPO_EPOCHS))

        def fitness(params: dict) -> float:
            cfg = TrainConfig(
                epochs=epochs,
                hidden_size=int(params["hidden_units"]),
                batch_size=200,
                window=12,
                seed=seed,
            )
            result = train(dataset, cfg)
            return float(np.sqrt(result.val_history[result.best_epoch]))

        cfg = PgaConfig(
            population=int(plan.parameters.get("population", 4)),
            islands=int(plan.parameters.get("islands", 2)),
            outer_iterations=int(plan.parameters.get("outer_iterations", 1)),
            inner_iterations=int(plan.parameters.get("inner_iterations", 2)),
            seed=seed,
        )
        result = run_pga(cfg, fitness, codec)
        best_per_step = []
        running = np.inf
        for entry in result.trace:
            running = min(running, entry.best_fitness)
            best_per_step.append(_round4(running))
        return "temporal", {
            "best_params": result.best.chromosome.decoded,
            "best_fitness": _round4(result.best.fitness),
            "trace_best": best_per_step,
            "evaluations": result.evaluations,
            "population": cfg.population,
            "islands": cfg.islands,
        }

    # -- rendering -----------------------------------------------------------

    def render_results(self, result: AgentResult, plan: TaskPlan) -> VisualizationPayload:
        builder = {
            "predict": _render_predict,
            "locate_sensors": _render_locate,
            "similarity": _render_similarity,
            "cluster": _render_cluster,
            "compare_clusters": _render_compare,
            "inspect_node": _render_inspect,
            "hpo": _render_hpo,
        }[plan.intent]
        payload = builder(result.data, plan)
        if plan.provenance == "llm":
            payload = self._polish(payload)
        return payload

    def _polish(self, payload: VisualizationPayload) -> VisualizationPayload:
        try:
            prompt = prompt_template("polish_narrative").replace(
                "{narrative}", payload.narrative
            )
            text = llm_complete(prompt, endpoint=self.llm_endpoint).strip()
            if text:
                return VisualizationPayload(
                    kind=payload.kind,
                    title=payload.title,
                    data=payload.data,
                    narrative=text,
                    agent=payload.agent,
                    narrative_source="llm",
                )
        except LlmUnavailable:
            pass
        return payload

    # -- round loop ------------------------------------------------------------

    def run_round(self, session: Session, text: str) -> Round:
        if session.rounds:
            outcome = self.apply_feedback(session, text)
        else:
            outcome = self.parse_request(text, session)
        if isinstance(outcome, ClarificationNeeded):
            round_ = Round(
                text=text,
                plan=None,
                payloads=[],
                result_summary={"clarification": outcome.message},
            )
            session.append_round(round_)
            return round_
        result = self.execute_plan(outcome, session)
        payload = self.render_results(result, outcome)
        round_ = Round(
            text=text,
            plan=outcome,
            payloads=[payload],
            result_summary=result.data,
        )
        session.append_round(round_)
        return round_


# -- payload builders (template narratives) ----------------------------------


def _render_predict(data: dict, plan: TaskPlan) -> VisualizationPayload:
    metrics = data["metrics"]
    subject = f"node {data['node']}" if data.get("node") else f"target {data['target']!r}"
    narrative = (
        f"Forecast for {subject} over {len(data['timestamps'])} test steps: "
        f"RMSE {metrics['rmse']:.4f}, MAE {metrics['mae']:.4f}, "
        f"R² {metrics['r2']:.4f} after {data['epochs_run']} training epochs."
    )
    return VisualizationPayload(
        kind=plan.visualization,
        title=f"Prediction vs actual ({subject})",
        data={
            "series": [
                {"name": "actual", "x": data["timestamps"], "y": data["actual"]},
                {"name": "predicted", "x": data["timestamps"], "y": data["predicted"]},
            ],
            "x_label": "timestamp",
            "y_label": data["target"],
        },
        narrative=narrative,
        agent="temporal",
    )


def _render_locate(data: dict, plan: TaskPlan) -> VisualizationPayload:
    points = data["points"]
    lats = [p["lat"] for p in points]
    lons = [p["lon"] for p in points]
    narrative = (
        f"Located {data['count']} sensors spanning latitude "
        f"{min(lats):.4f}..{max(lats):.4f} and longitude "
        f"{min(lons):.4f}..{max(lons):.4f}."
    )
    return VisualizationPayload(
        kind=plan.visualization,
        title="Sensor locations",
        data={"points": points, "value_label": "mean feature level"},
        narrative=narrative,
        agent="spatial",
    )


def _render_similarity(data: dict, plan: TaskPlan) -> VisualizationPayload:
    ids = data["node_ids"]
    matrix = np.asarray(data["matrix"], dtype=float)
    order = np.argsort(-matrix, axis=1)
    edges = []
    seen = set()
    for i, nid in enumerate(ids):
        taken = 0
        for j in order[i]:
            j = int(j)
            if j == i:
                continue
            if taken >= FORCE_EDGES_PER_NODE:
                break
            key = (min(i, j), max(i, j))
            if key not in seen:
                seen.add(key)
                edges.append(
                    {
                        "source": nid,
                        "target": ids[j],
                        "weight": _round4(matrix[i, j]),
                    }
                )
            taken += 1
    a, b = data["strongest_pair"]
    narrative = (
        f"Diffused similarity over {len(ids)} sensors; the strongest pair is "
        f"{a} and {b} (score {data['strongest_value']:.4f})."
    )
    return VisualizationPayload(
        kind=plan.visualization,
        title="Sensor similarity network",
        data={"nodes": [{"id": nid} for nid in ids], "edges": edges},
        narrative=narrative,
        agent="spatial",
    )


def _render_cluster(data: dict, plan: TaskPlan) -> VisualizationPayload:
    metrics = data["metrics"]
    sizes = ", ".join(f"cluster {c}: {s}" for c, s in data["sizes"].items())
    narrative = (
        f"Partitioned {len(data['points'])} sensors into {data['k']} clusters "
        f"({sizes}). Quality: silhouette {metrics['sc']:.3f}, "
        f"Calinski-Harabasz {metrics['ch']:.3f}, Davies-Bouldin {metrics['db']:.3f}."
    )
    return VisualizationPayload(
        kind=plan.visualization,
        title=f"Spectral clustering (k={data['k']})",
        data={"points": data["points"], "k": data["k"], "metrics": metrics},
        narrative=narrative,
        agent="spatial",
    )


def _render_compare(data: dict, plan: TaskPlan) -> VisualizationPayload:
    ids = data["cluster_ids"]
    scores = np.asarray(data["scores"], dtype=float)
    if plan.visualization == "parallel_coords" or data.get("view") == "features":
        axes = data["feature_names"]
        lines = [
            {"name": f"cluster {c}", "values": data["profiles"][str(c)]}
            for c in ids
        ]
        narrative = _profile_narrative(data)
        return VisualizationPayload(
            kind="parallel_coords",
            title="Cluster feature profiles",
            data={"axes": axes, "lines": lines},
            narrative=narrative,
            agent="spatial",
        )
    best_pair, best_score = None, -1.0
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            if scores[i, j] > best_score:
                best_score = scores[i, j]
                best_pair = (ids[i], ids[j])
    narrative = (
        f"Cross-graph similarity over {len(ids)} clusters. Each cluster is "
        f"perfectly self-similar (score 1); the closest pair is clusters "
        f"{best_pair[0]} and {best_pair[1]} at {best_score:.3f}."
    )
    labels = [f"cluster {c}" for c in ids]
    return VisualizationPayload(
        kind="heatmap",
        title="Inter-cluster similarity",
        data={
            "row_labels": labels,
            "col_labels": labels,
            "matrix": _py(scores),
            "value_label": "normalized similarity",
        },
        narrative=narrative,
        agent="spatial",
    )


def _profile_narrative(data: dict) -> str:
    ids = data["cluster_ids"]
    names = data["feature_names"]
    profiles = {c: np.asarray(data["profiles"][str(c)], dtype=float) for c in ids}
    spread_by_feature = []
    for idx, name in enumerate(names):
        values = {c: profiles[c][idx] for c in ids}
        hi = max(values, key=lambda c: values[c])
        lo = min(values, key=lambda c: values[c])
        spread_by_feature.append((values[hi] - values[lo], name, hi, lo, values))
    spread_by_feature.sort(reverse=True)
    gap, name, hi, lo, values = spread_by_feature[0]
    return (
        f"Comparing {len(ids)} cluster profiles across {len(names)} features: "
        f"levels of {name} in cluster {hi} ({values[hi]:.3f}) are significantly "
        f"higher than in cluster {lo} ({values[lo]:.3f})."
    )


def _render_inspect(data: dict, plan: TaskPlan) -> VisualizationPayload:
    cluster_note = (
        f" It belongs to cluster {data['cluster']}." if data.get("cluster") is not None else ""
    )
    narrative = (
        f"Sensor {data['node']} sits at ({data['lat']:.4f}, {data['lon']:.4f}) "
        f"on streets {', '.join(data['streets']) or 'none'}.{cluster_note}"
    )
    features = data["features"]
    return VisualizationPayload(
        kind="line",
        title=f"Feature profile of {data['node']}",
        data={
            "series": [
                {
                    "name": data["node"],
                    "x": [f"f{j}" for j in range(len(features))],
                    "y": features,
                }
            ],
            "x_label": "feature",
            "y_label": "value",
        },
        narrative=narrative,
        agent="spatial",
    )


def _render_hpo(data: dict, plan: TaskPlan) -> VisualizationPayload:
    best = data["best_params"]
    narrative = (
        f"Island-model search over {data['evaluations']} evaluations "
        f"(population {data['population']}, {data['islands']} islands) selected "
        f"{json.dumps(best, sort_keys=True)} with validation RMSE "
        f"{data['best_fitness']:.4f}."
    )
    trace = data["trace_best"] or [data["best_fitness"]]
    return VisualizationPayload(
        kind="line",
        title="Hyperparameter search progress",
        data={
            "series": [
                {
                    "name": "best fitness",
                    "x": list(range(len(trace))),
                    "y": trace,
                }
            ],
            "x_label": "generation",
            "y_label": "validation RMSE",
        },
        narrative=narrative,
        agent="temporal",
    )
