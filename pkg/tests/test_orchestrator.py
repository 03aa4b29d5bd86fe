import json

import numpy as np
import pytest

from iotagents.datasets import SynthSensorsSpec, SynthSeriesSpec, synth_sensors, synth_series
from iotagents.orchestrator import (
    ClarificationNeeded,
    ExecutionError,
    LlmUnavailable,
    MissingBindingError,
    Orchestrator,
    TaskPlan,
    llm_complete,
    parse_rules,
    validate_payload,
)
from iotagents.store import FileStore, canonical_json, to_jsonable

GOLDEN_CORPUS = [
    ("Show the location information of all sensor nodes",
     {"intent": "locate_sensors", "parameters": {}, "visualization": "scatter_map"}),
    ("Where are the sensors on the map?",
     {"intent": "locate_sensors", "parameters": {}, "visualization": "scatter_map"}),
    ("draw a map of sensor positions",
     {"intent": "locate_sensors", "parameters": {}, "visualization": "scatter_map"}),
    ("predict the next values for node n3 on 2014-08-02",
     {"intent": "predict", "parameters": {"node": "n3", "date": "2014-08-02"},
      "visualization": "line"}),
    ("forecast dataset traffic",
     {"intent": "predict", "parameters": {"dataset": "traffic"}, "visualization": "line"}),
    ("predict tomorrow",
     {"intent": "predict", "parameters": {}, "visualization": "line"}),
    ("how similar are the sensors?",
     {"intent": "similarity", "parameters": {}, "visualization": "force_graph"}),
    ("compute sensor similarity with blend 0.7",
     {"intent": "similarity", "parameters": {"blend": 0.7}, "visualization": "force_graph"}),
    ("similarity with theta 0.3 and lambda 0.9",
     {"intent": "similarity", "parameters": {"theta": 0.3, "damping": 0.9},
      "visualization": "force_graph"}),
    ("cluster the sensors into 5 groups",
     {"intent": "cluster", "parameters": {"k": 5}, "visualization": "cluster_map"}),
    ("group sensors with k=3",
     {"intent": "cluster", "parameters": {"k": 3}, "visualization": "cluster_map"}),
    ("cluster the nodes",
     {"intent": "cluster", "parameters": {}, "visualization": "cluster_map"}),
    ("cluster dataset blobs into 4 clusters seed 2",
     {"intent": "cluster", "parameters": {"dataset": "blobs", "k": 4, "seed": 2},
      "visualization": "cluster_map"}),
    ("compare the clusters",
     {"intent": "compare_clusters", "parameters": {}, "visualization": "heatmap"}),
    ("compare pollutant levels across clusters",
     {"intent": "compare_clusters", "parameters": {"view": "features"},
      "visualization": "parallel_coords"}),
    ("inspect node b0n1",
     {"intent": "inspect_node", "parameters": {"node": "b0n1"}, "visualization": "line"}),
    ("show node s2 details",
     {"intent": "inspect_node", "parameters": {"node": "s2"}, "visualization": "line"}),
    ("tune the model hyperparameters",
     {"intent": "hpo", "parameters": {}, "visualization": "line"}),
    ("optimize the forecasting model with 4 islands population 12",
     {"intent": "hpo", "parameters": {"islands": 4, "population": 12},
      "visualization": "line"}),
    ("hpo seed 9",
     {"intent": "hpo", "parameters": {"seed": 9}, "visualization": "line"}),
]


class TestRuleParser:
    @pytest.mark.parametrize("text,expected", GOLDEN_CORPUS,
                             ids=[t[:32] for t, _ in GOLDEN_CORPUS])
    def test_golden_corpus_exact(self, text, expected):
        plan = parse_rules(text)
        assert isinstance(plan, TaskPlan)
        assert plan.intent == expected["intent"]
        assert plan.parameters == expected["parameters"]
        assert plan.visualization == expected["visualization"]
        assert plan.provenance == "rules"

    def test_empty_text_needs_clarification(self):
        outcome = parse_rules("")
        assert isinstance(outcome, ClarificationNeeded)

    def test_gibberish_needs_clarification(self):
        outcome = parse_rules("please bake a cake")
        assert isinstance(outcome, ClarificationNeeded)

    def test_backref_requires_session_rounds(self):
        plan = parse_rules("cluster them")
        assert plan.parameters == {}

        class FakeSession:
            rounds = [1, 2]

        plan = parse_rules("cluster them", FakeSession())
        assert plan.parameters == {"round_ref": 1}

    def test_idempotent_for_identical_text(self):
        a = parse_rules("cluster the sensors into 5 groups")
        b = parse_rules("cluster the sensors into 5 groups")
        assert a.as_dict() == b.as_dict()


def make_orchestrator(tmp_path, llm_endpoint=None, sensors_spec=None, series_spec=None):
    store = FileStore(tmp_path / "store")
    orch = Orchestrator(store, llm_endpoint=llm_endpoint)
    session = orch.create_session("test-session")
    nodes, truth = synth_sensors(sensors_spec or SynthSensorsSpec(blobs=3, per_blob=4, seed=7))
    dataset = synth_series(series_spec or SynthSeriesSpec(n_points=160, seed=5))
    streets = {n.id: set(n.streets) for n in nodes}
    orch.bind_dataset(session, "sensors", store.store(list(nodes)))
    orch.bind_dataset(session, "series", store.store(dataset))
    orch.bind_dataset(session, "streets", store.store(streets))
    return orch, session, truth


class TestExecution:
    def test_locate(self, tmp_path):
        orch, session, _ = make_orchestrator(tmp_path)
        round_ = orch.run_round(session, "show the location of all sensor nodes")
        payload = round_.payloads[0]
        assert payload.kind == "scatter_map"
        assert len(payload.data["points"]) == 12
        validate_payload(payload)

    def test_cluster_direct_dispatch(self, tmp_path):
        orch, session, truth = make_orchestrator(tmp_path)
        plan = TaskPlan(intent="cluster", parameters={"k": 3, "seed": 0})
        result = orch.execute_plan(plan, session)
        assert result.agent == "spatial"
        assert result.elapsed_s >= 0
        assert result.data["k"] == 3
        assert set(result.data["metrics"]) == {"sc", "ch", "db"}
        from sklearn.metrics import adjusted_rand_score

        assert adjusted_rand_score(truth, result.data["labels"]) >= 0.95

    def test_predict_round(self, tmp_path):
        orch, session, _ = make_orchestrator(tmp_path)
        round_ = orch.run_round(
            session, "predict the target seed 1"
        )
        payload = round_.payloads[0]
        assert payload.kind == "line"
        names = [s["name"] for s in payload.data["series"]]
        assert names == ["actual", "predicted"]
        assert "RMSE" in payload.narrative

    def test_compound_pipeline_consumes_prior_labels(self, tmp_path):
        orch, session, _ = make_orchestrator(tmp_path)
        first = orch.run_round(session, "cluster the sensors into 3 groups")
        assert first.plan.intent == "cluster"
        second = orch.run_round(session, "inspect node b0n1 from that clustering")
        assert second.plan.intent == "inspect_node"
        assert second.plan.parameters["round_ref"] == 0
        assert "cluster" in second.payloads[0].narrative

    def test_similarity_then_cluster_reuses_matrix(self, tmp_path):
        orch, session, _ = make_orchestrator(tmp_path)
        first = orch.run_round(session, "how similar are the sensors?")
        assert first.plan.intent == "similarity"
        second = orch.run_round(session, "now cluster them into 3 groups")
        assert second.plan.intent == "cluster"
        assert second.plan.parameters["round_ref"] == 0
        reused = np.asarray(first.result_summary["matrix"])
        recomputed = np.asarray(second.result_summary["matrix"])
        np.testing.assert_array_equal(reused, recomputed)

    def test_missing_binding_is_wrapped(self, tmp_path):
        store = FileStore(tmp_path / "store")
        orch = Orchestrator(store)
        session = orch.create_session()
        with pytest.raises(MissingBindingError):
            orch.execute_plan(TaskPlan(intent="locate_sensors"), session)

    def test_unknown_node_is_execution_error(self, tmp_path):
        orch, session, _ = make_orchestrator(tmp_path)
        plan = TaskPlan(intent="inspect_node", parameters={"node": "nope"})
        with pytest.raises(ExecutionError, match="unknown node"):
            orch.execute_plan(plan, session)

    def test_compare_clusters_heatmap(self, tmp_path):
        orch, session, _ = make_orchestrator(tmp_path)
        orch.run_round(session, "cluster the sensors into 3 groups")
        round_ = orch.run_round(session, "compare those clusters")
        payload = round_.payloads[0]
        assert payload.kind == "heatmap"
        matrix = np.asarray(payload.data["matrix"])
        np.testing.assert_allclose(np.diag(matrix), 1.0, atol=1e-9)
        np.testing.assert_allclose(matrix, matrix.T, atol=1e-9)

    def test_compare_clusters_feature_view(self, tmp_path):
        orch, session, _ = make_orchestrator(tmp_path)
        orch.run_round(session, "cluster the sensors into 3 groups")
        round_ = orch.run_round(session, "compare pollutant levels across those clusters")
        payload = round_.payloads[0]
        assert payload.kind == "parallel_coords"
        assert len(payload.data["lines"]) == 3
        assert "significantly higher" in payload.narrative

    def test_hpo_round(self, tmp_path):
        orch, session, _ = make_orchestrator(
            tmp_path, series_spec=SynthSeriesSpec(n_points=80, seed=3)
        )
        plan = TaskPlan(
            intent="hpo",
            parameters={"population": 4, "islands": 2, "seed": 1},
        )
        result = orch.execute_plan(plan, session)
        assert result.agent == "temporal"
        assert result.data["population"] == 4
        assert result.data["best_fitness"] >= 0
        payload = orch.render_results(result, plan)
        assert payload.kind == "line"

    def test_clarification_round_keeps_session(self, tmp_path):
        orch, session, _ = make_orchestrator(tmp_path)
        round_ = orch.run_round(session, "what is the weather like?")
        assert round_.plan is None
        assert round_.payloads == []
        assert "clarification" in round_.result_summary
        assert len(session.rounds) == 1


class TestDeterministicReplay:
    SCRIPT = [
        "show the location of all sensor nodes",
        "cluster them into 3 groups seed 4",
        "compare those clusters",
    ]

    def _replay(self, tmp_path, tag):
        orch, session, _ = make_orchestrator(tmp_path / tag)
        blobs = []
        for text in self.SCRIPT:
            round_ = orch.run_round(session, text)
            blobs.append(canonical_json(to_jsonable([p.as_dict() for p in round_.payloads])))
        return blobs

    def test_three_round_transcript_bit_identical(self, tmp_path):
        first = self._replay(tmp_path, "a")
        second = self._replay(tmp_path, "b")
        assert first == second


class TestLlmIntegration:
    def test_endpoint_unset_falls_back_to_rules(self, tmp_path, monkeypatch):
        monkeypatch.delenv("IOTAGENTS_LLM_URL", raising=False)
        orch, session, _ = make_orchestrator(tmp_path)
        plan = orch.parse_request("cluster the sensors into 3 groups", session)
        assert plan.provenance == "rules"

    def test_llm_complete_unavailable_without_endpoint(self, monkeypatch):
        monkeypatch.delenv("IOTAGENTS_LLM_URL", raising=False)
        with pytest.raises(LlmUnavailable):
            llm_complete("hello")

    def test_valid_llm_plan_gets_llm_provenance(self, tmp_path, mock_llm):
        content = json.dumps(
            {"intent": "cluster", "parameters": {"k": 3}, "visualization": "cluster_map"}
        )
        server = mock_llm(content=content)
        orch, session, _ = make_orchestrator(tmp_path, llm_endpoint=server.url)
        plan = orch.parse_request("please cluster everything", session)
        assert plan.provenance == "llm"
        assert plan.parameters == {"k": 3}

    def test_malformed_llm_output_triggers_rule_fallback(self, tmp_path, mock_llm):
        server = mock_llm(content="I would love to help but here is prose")
        orch, session, _ = make_orchestrator(tmp_path, llm_endpoint=server.url)
        for _ in range(50):
            plan = orch.parse_request("cluster the sensors into 3 groups", session)
            assert plan.provenance == "rules"
            assert plan.parameters == {"k": 3}

    def test_http_error_triggers_fallback(self, tmp_path, mock_llm):
        server = mock_llm(content="ignored", status=500)
        orch, session, _ = make_orchestrator(tmp_path, llm_endpoint=server.url)
        plan = orch.parse_request("cluster the sensors into 3 groups", session)
        assert plan.provenance == "rules"

    def test_llm_narrative_polish_with_template_fallback(self, tmp_path, mock_llm):
        plan_json = json.dumps(
            {"intent": "locate_sensors", "parameters": {}, "visualization": "scatter_map"}
        )

        def reply(request):
            prompt = request["messages"][0]["content"]
            if "task plan" in prompt:
                return plan_json
            return "Polished: the sensors are mapped."

        server = mock_llm(content=reply)
        orch, session, _ = make_orchestrator(tmp_path, llm_endpoint=server.url)
        round_ = orch.run_round(session, "where are the sensors located on the map?")
        assert round_.plan.provenance == "llm"
        assert round_.payloads[0].narrative_source == "llm"
        assert round_.payloads[0].narrative.startswith("Polished")


class TestFeedback:
    def test_apply_feedback_requires_rounds(self, tmp_path):
        orch, session, _ = make_orchestrator(tmp_path)
        with pytest.raises(ExecutionError):
            orch.apply_feedback(session, "now cluster them")

    def test_bad_round_ref_rejected(self, tmp_path):
        orch, session, _ = make_orchestrator(tmp_path)
        orch.run_round(session, "how similar are the sensors?")
        plan = TaskPlan(intent="cluster", parameters={"round_ref": 5})
        with pytest.raises(ExecutionError, match="round_ref 5"):
            orch.execute_plan(plan, session)

    def test_feedback_idempotent_under_rules(self, tmp_path):
        orch, session, _ = make_orchestrator(tmp_path)
        orch.run_round(session, "cluster the sensors into 3 groups")
        a = orch.apply_feedback(session, "compare those clusters")
        b = orch.apply_feedback(session, "compare those clusters")
        assert a.as_dict() == b.as_dict()


class TestSessionPersistence:
    def test_session_round_trip(self, tmp_path):
        orch, session, _ = make_orchestrator(tmp_path)
        orch.run_round(session, "cluster the sensors into 3 groups")
        record_id = orch.store.store(session)
        loaded = orch.store.load(record_id)
        assert loaded.id == session.id
        assert len(loaded.rounds) == 1
        assert loaded.rounds[0].plan.as_dict() == session.rounds[0].plan.as_dict()
        assert (
            loaded.rounds[0].payloads[0].as_dict()
            == session.rounds[0].payloads[0].as_dict()
        )
