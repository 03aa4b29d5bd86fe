import io
import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from iotagents.cli import main as cli_main
from iotagents.datasets import SynthSensorsSpec, SynthSeriesSpec, synth_sensors, synth_series
from iotagents.orchestrator import Orchestrator, TaskPlan
from iotagents.service import ServiceConfig, create_app
from iotagents.store import FileStore, canonical_json, to_jsonable


@pytest.fixture
def client(tmp_path):
    app = create_app(ServiceConfig(store_root=str(tmp_path / "store"), workers=2))
    with TestClient(app) as c:
        yield c


def seed_records(store_root):
    store = FileStore(store_root)
    nodes, truth = synth_sensors(SynthSensorsSpec(blobs=3, per_blob=4, seed=7))
    dataset = synth_series(SynthSeriesSpec(n_points=160, seed=5))
    return {
        "sensors": store.store(list(nodes)),
        "series": store.store(dataset),
        "streets": store.store({n.id: n.streets for n in nodes}),
    }


def poll_job(client, job_id, timeout=120.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        body = client.get(f"/jobs/{job_id}").json()
        if body["status"] in ("done", "error"):
            return body
        time.sleep(0.05)
    raise TimeoutError("job did not finish")


class TestEndpoints:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "ok"
        assert body["version"]

    def test_upload_and_describe_series(self, client):
        csv_text = "timestamp,a,b\n1,1,4\n2,2,5\n3,3,6\n"
        response = client.post(
            "/datasets", params={"kind": "series", "dataset_id": "toy"},
            content=csv_text,
        )
        assert response.status_code == 200
        record_id = response.json()["record_id"]
        info = client.get(f"/datasets/{record_id}").json()
        assert info["type"] == "series"
        assert info["n_steps"] == 3
        assert info["features"] == ["a", "b"]

    def test_schema_violation_is_422(self, client):
        response = client.post(
            "/datasets", params={"kind": "series"}, content="timestamp,a\n2,1\n1,2\n"
        )
        assert response.status_code == 422
        assert "not increasing" in response.json()["detail"]

    def test_unknown_dataset_404(self, client):
        assert client.get("/datasets/nope").status_code == 404

    def test_synth_sensors_roundtrip(self, client):
        response = client.post(
            "/datasets/synth",
            json={"kind": "sensors", "spec": {"blobs": 2, "per_blob": 3, "seed": 1}},
        )
        assert response.status_code == 200
        body = response.json()
        assert {"record_id", "streets_record", "truth_record"} <= set(body)

    def test_session_with_unknown_binding_404(self, client):
        response = client.post("/sessions", json={"bindings": {"series": "missing"}})
        assert response.status_code == 404

    def test_bad_round_body_is_4xx(self, client):
        response = client.post("/sessions", json={})
        session_id = response.json()["session_id"]
        assert client.post(f"/sessions/{session_id}/rounds", json={}).status_code == 422

    def test_bad_job_parameters_rejected(self, client, tmp_path):
        session_id = client.post("/sessions", json={}).json()["session_id"]
        response = client.post(
            f"/jobs/cluster", json={"session_id": session_id,
                                    "parameters": {"bogus": 1}}
        )
        assert response.status_code == 422


class TestApiEquivalence:
    def _direct_round_payloads(self, store_root, bindings, script):
        orch = Orchestrator(FileStore(store_root))
        session = orch.create_session()
        for role, record in bindings.items():
            orch.bind_dataset(session, role, record)
        blobs = []
        for text in script:
            round_ = orch.run_round(session, text)
            blobs.append(
                [canonical_json(to_jsonable(p.as_dict())) for p in round_.payloads]
            )
        return blobs

    def test_chat_rounds_match_library_bytes(self, tmp_path):
        store_root = tmp_path / "store"
        records = seed_records(store_root)
        app = create_app(ServiceConfig(store_root=str(store_root)))
        script = [
            "show the location of all sensor nodes",
            "cluster them into 3 groups seed 4",
            "compare those clusters",
        ]
        with TestClient(app) as client:
            session_id = client.post(
                "/sessions", json={"bindings": records}
            ).json()["session_id"]
            api_blobs = []
            for text in script:
                body = client.post(
                    f"/sessions/{session_id}/rounds", json={"text": text}
                ).json()
                api_blobs.append(
                    [canonical_json(p) for p in body["payloads"]]
                )
        direct = self._direct_round_payloads(store_root, records, script)
        assert api_blobs == direct

    def test_job_payload_matches_library_bytes(self, tmp_path):
        store_root = tmp_path / "store"
        records = seed_records(store_root)
        app = create_app(ServiceConfig(store_root=str(store_root)))
        with TestClient(app) as client:
            session_id = client.post(
                "/sessions", json={"bindings": records}
            ).json()["session_id"]
            job = client.post(
                "/jobs/cluster",
                json={"session_id": session_id, "parameters": {"k": 3, "seed": 0}},
            ).json()
            outcome = poll_job(client, job["job_id"])
        assert outcome["status"] == "done"
        api_payload = canonical_json(outcome["result"]["payload"])

        orch = Orchestrator(FileStore(store_root))
        session = orch.create_session()
        for role, record in records.items():
            orch.bind_dataset(session, role, record)
        plan = TaskPlan(intent="cluster", parameters={"k": 3, "seed": 0})
        result = orch.execute_plan(plan, session)
        payload = orch.render_results(result, plan)
        assert api_payload == canonical_json(to_jsonable(payload.as_dict()))

    def test_concurrent_sessions_do_not_leak(self, tmp_path):
        store_root = tmp_path / "store"
        records = seed_records(store_root)
        other_nodes, _ = synth_sensors(SynthSensorsSpec(blobs=2, per_blob=3, seed=99))
        other_record = FileStore(store_root).store(list(other_nodes))
        app = create_app(ServiceConfig(store_root=str(store_root)))
        with TestClient(app) as client:
            s1 = client.post(
                "/sessions", json={"bindings": {"sensors": records["sensors"]}}
            ).json()["session_id"]
            s2 = client.post(
                "/sessions", json={"bindings": {"sensors": other_record}}
            ).json()["session_id"]
            r1 = client.post(
                f"/sessions/{s1}/rounds",
                json={"text": "show the location of all sensor nodes"},
            ).json()
            r2 = client.post(
                f"/sessions/{s2}/rounds",
                json={"text": "show the location of all sensor nodes"},
            ).json()
        ids1 = {p["id"] for p in r1["payloads"][0]["data"]["points"]}
        ids2 = {p["id"] for p in r2["payloads"][0]["data"]["points"]}
        store = FileStore(store_root)
        expected1 = {n.id for n in store.load(records["sensors"])}
        expected2 = {n.id for n in other_nodes}
        assert ids1 == expected1 and len(ids1) == 12
        assert ids2 == expected2 and len(ids2) == 6
        info1 = client.get(f"/sessions/{s1}").json()
        assert info1["bindings"] == {"sensors": records["sensors"]}
        info2 = client.get(f"/sessions/{s2}").json()
        assert info2["bindings"] == {"sensors": other_record}


class TestCli:
    SUBCOMMANDS = ["ingest", "synth", "train", "predict", "hpo", "similarity",
                   "cluster", "compare-clusters", "chat", "serve"]

    @pytest.mark.parametrize("sub", SUBCOMMANDS)
    def test_help_exits_zero(self, sub, capsys):
        with pytest.raises(SystemExit) as exc:
            cli_main([sub, "--help"])
        assert exc.value.code == 0

    def test_synth_and_cluster_matches_library(self, tmp_path, capsys):
        store_root = str(tmp_path / "store")
        assert cli_main(["synth", "--kind", "sensors", "--store", store_root,
                         "--seed", "7", "--blobs", "3", "--per-blob", "4"]) == 0
        ids = json.loads(capsys.readouterr().out.strip())
        out_file = str(tmp_path / "payload.json")
        labels_file = str(tmp_path / "labels.json")
        assert cli_main([
            "cluster", "--store", store_root, "--sensors", ids["sensors_record"],
            "--k", "3", "--seed", "0", "--out", out_file,
            "--labels-out", labels_file,
        ]) == 0
        with open(out_file, encoding="utf-8") as fh:
            cli_payload = fh.read().strip()
        labels_doc = json.loads(open(labels_file, encoding="utf-8").read())
        assert labels_doc["k"] == 3
        assert set(labels_doc["report"]) == {"sc", "ch", "db"}

        orch = Orchestrator(FileStore(store_root))
        session = orch.create_session()
        orch.bind_dataset(session, "sensors", ids["sensors_record"])
        plan = TaskPlan(intent="cluster", parameters={"k": 3, "seed": 0})
        result = orch.execute_plan(plan, session)
        payload = orch.render_results(result, plan)
        assert cli_payload == canonical_json(to_jsonable(payload.as_dict()))

        truth = FileStore(store_root).load(ids["truth_record"])["labels"]
        from sklearn.metrics import adjusted_rand_score

        assert adjusted_rand_score(truth, labels_doc["labels"]) >= 0.95

    def test_hpo_surrogate_trace_population(self, tmp_path, capsys):
        trace_file = str(tmp_path / "trace.jsonl")
        out_file = str(tmp_path / "hpo.json")
        assert cli_main([
            "hpo", "--surrogate", "--islands", "2", "--pop", "12",
            "--k1", "3", "--k2", "3", "--seed", "0",
            "--trace", trace_file, "--out", out_file,
            "--store", str(tmp_path / "store"),
        ]) == 0
        doc = json.loads(open(out_file, encoding="utf-8").read())
        assert doc["population"] == 12
        assert doc["islands"] == 2
        lines = [json.loads(l) for l in open(trace_file, encoding="utf-8")
                 if l.strip()]
        assert lines, "trace must not be empty"
        assert {e["island"] for e in lines} == {0, 1}

    def test_ingest_series_and_predict(self, tmp_path, capsys):
        csv_path = tmp_path / "series.csv"
        rows = ["timestamp,a,b"]
        rng = np.random.default_rng(0)
        for i in range(120):
            rows.append(f"{i},{np.sin(i / 6):.4f},{rng.uniform():.4f}")
        csv_path.write_text("\n".join(rows) + "\n")
        store_root = str(tmp_path / "store")
        assert cli_main(["ingest", "--kind", "series", "--csv", str(csv_path),
                         "--store", store_root, "--id", "toy"]) == 0
        record = capsys.readouterr().out.strip()
        out_file = str(tmp_path / "pred.json")
        assert cli_main(["predict", "--store", store_root, "--series", record,
                         "--epochs", "3", "--hidden", "4", "--out", out_file]) == 0
        doc = json.loads(open(out_file, encoding="utf-8").read())
        assert doc["kind"] == "line"
        assert doc["data"]["series"][0]["name"] == "actual"

    def test_usage_error_exits_nonzero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli_main(["cluster"])  # missing required --sensors
        assert exc.value.code != 0

    def test_missing_record_reports_error(self, tmp_path, capsys):
        code = cli_main(["similarity", "--store", str(tmp_path / "s"),
                         "--sensors", "missing", "--out",
                         str(tmp_path / "x.json")])
        assert code == 1
        assert "error" in capsys.readouterr().err


class TestChatRepl:
    def test_scripted_chat(self, tmp_path, capsys, monkeypatch):
        store_root = str(tmp_path / "store")
        records = seed_records(store_root)
        script = "show the location of all sensor nodes\ncluster them into 3 groups\n"
        monkeypatch.setattr("sys.stdin", io.StringIO(script))
        payload_dir = tmp_path / "payloads"
        payload_dir.mkdir()
        assert cli_main([
            "chat", "--store", store_root, "--sensors", records["sensors"],
            "--series", records["series"], "--payload-dir", str(payload_dir),
        ]) == 0
        out = capsys.readouterr().out
        assert "Located 12 sensors" in out
        assert "Partitioned 12 sensors into 3 clusters" in out
        assert sorted(p.name for p in payload_dir.iterdir()) == [
            "round-0.json", "round-1.json",
        ]


class TestFrontendFixturesFresh:
    """The web client snapshot-tests against these fixtures; verify they
    still match what the live service produces for the same script."""

    def test_transcript_fixture_matches_service(self, tmp_path):
        import pathlib

        fixture_path = pathlib.Path(__file__).parent.parent / "frontend" / "fixtures"
        transcript = json.loads((fixture_path / "transcript.json").read_text())
        store_root = tmp_path / "store"
        records = seed_records(store_root)
        app = create_app(ServiceConfig(store_root=str(store_root)))
        with TestClient(app) as client:
            session_id = client.post(
                "/sessions", json={"bindings": records}
            ).json()["session_id"]
            for entry in transcript:
                body = client.post(
                    f"/sessions/{session_id}/rounds", json={"text": entry["text"]}
                ).json()
                expected = entry["response"]
                assert body["plan"] == expected["plan"], entry["text"]
                assert canonical_json(body["payloads"]) == canonical_json(
                    expected["payloads"]
                ), entry["text"]

    def test_payload_kind_fixtures_validate(self):
        import pathlib

        from iotagents.orchestrator import validate_payload
        from iotagents.orchestrator.plans import VisualizationPayload

        fixture_path = pathlib.Path(__file__).parent.parent / "frontend" / "fixtures"
        kinds = ["line", "scatter_map", "force_graph", "heatmap",
                 "parallel_coords", "cluster_map"]
        for kind in kinds:
            doc = json.loads((fixture_path / f"{kind}.json").read_text())
            payload = VisualizationPayload(**doc)
            validate_payload(payload)
            assert payload.kind == kind


class TestCliExtras:
    def test_similarity_matrix_csv_export(self, tmp_path, capsys):
        store_root = str(tmp_path / "store")
        records = seed_records(store_root)
        matrix_file = tmp_path / "matrix.csv"
        assert cli_main([
            "similarity", "--store", store_root, "--sensors", records["sensors"],
            "--out", str(tmp_path / "sim.json"), "--matrix-out", str(matrix_file),
        ]) == 0
        from iotagents.spatial import similarity_from_csv

        sim = similarity_from_csv(matrix_file.read_text())
        assert sim.values.shape == (12, 12)
        assert len(sim.row_ids) == 12

    def test_hpo_custom_gene_ranges(self, tmp_path):
        out_file = tmp_path / "hpo.json"
        assert cli_main([
            "hpo", "--surrogate", "--surrogate-target", "9",
            "--gene", "units:1:16", "--islands", "2", "--pop", "8",
            "--k1", "2", "--k2", "3", "--seed", "0",
            "--out", str(out_file), "--store", str(tmp_path / "store"),
        ]) == 0
        doc = json.loads(out_file.read_text())
        assert doc["best_params"] == {"units": 9}


class TestCityPulseUpload:
    def test_citypulse_csv_yields_two_records(self, client):
        csv_text = (
            "timestamp,sensor_id,lat,lon,vehicle_count,avg_speed\n"
            "1,s1,56.1,10.1,10,50\n1,s2,56.2,10.2,20,40\n"
            "2,s1,56.1,10.1,12,52\n2,s2,56.2,10.2,22,38\n"
            "3,s1,56.1,10.1,9,55\n3,s2,56.2,10.2,19,42\n"
        )
        response = client.post("/datasets", params={"kind": "citypulse"},
                               content=csv_text)
        assert response.status_code == 200
        body = response.json()
        series_info = client.get(f"/datasets/{body['series_record']}").json()
        assert series_info["n_steps"] == 3
        sensors_info = client.get(f"/datasets/{body['sensors_record']}").json()
        assert sensors_info["count"] == 2
