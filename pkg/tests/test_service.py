import json

import pytest
from fastapi.testclient import TestClient

from boundkit.consistency import SchemeSelector, summarize
from boundkit.io import dump_config, load_config, parse_annotations
from boundkit.service import create_app

CONFIG = {
    "control_questions": [
        {
            "prompt": "Which phase contains the motion that fulfils the goal?",
            "choices": ["the first marked phase", "the second marked phase"],
            "correct_index": 1,
        },
        {
            "prompt": "When does the second phase begin?",
            "choices": ["immediately after the first phase ends", "whenever the hands are visible"],
            "correct_index": 0,
        },
    ],
    "gate_max_retries": 2,
}


@pytest.fixture()
def project(tmp_path):
    (tmp_path / "config.json").write_bytes(json.dumps(CONFIG).encode())
    (tmp_path / "videos.csv").write_text("video_id,duration,frame_rate\nv1,100.000,30\nv2,30.000,25\n")
    (tmp_path / "tasks.csv").write_text("video_id,instance_key,verb,noun\nv1,i1,pour,oil\nv2,i2,open,door\n")
    (tmp_path / "videos").mkdir()
    (tmp_path / "videos" / "v1.mp4").write_bytes(b"fake video bytes")
    return tmp_path


@pytest.fixture()
def client(project):
    app = create_app(project)
    with TestClient(app) as c:
        yield c


def make_session(client, schema="rubicon", annotator="annA"):
    response = client.post("/sessions", json={"annotator_id": annotator, "schema": schema})
    assert response.status_code == 200
    return response.json()


def pass_gate(client, session_id):
    response = client.post(f"/sessions/{session_id}/gate", json={"answers": [1, 0]})
    assert response.json()["passed"] is True
    return response.json()


def rb_payload(session_id, ann_id="r1", pre=(9.0, 10.0), act=(10.0, 12.0), video="v1", instance="i1"):
    return {
        "session_id": session_id,
        "annotation_id": ann_id,
        "video_id": video,
        "class": "pour oil",
        "annotator_id": "annA",
        "schema": "rubicon",
        "instance_key": instance,
        "rb": {
            "pre_actional": {"start": pre[0], "end": pre[1]},
            "actional": {"start": act[0], "end": act[1]},
        },
    }


class TestSessions:
    def test_conventional_gate_exempt(self, client):
        session = make_session(client, schema="conventional")
        assert session["passed_gate"] is True

    def test_rubicon_pending_gate(self, client):
        session = make_session(client)
        assert session["passed_gate"] is False

    def test_rubicon_session_carries_question_prompts_only(self, client):
        session = make_session(client)
        questions = session["control_questions"]
        assert [q["prompt"] for q in questions] == [q["prompt"] for q in CONFIG["control_questions"]]
        assert all("correct_index" not in q for q in questions)

    def test_conventional_session_has_no_questions(self, client):
        session = make_session(client, schema="conventional")
        assert "control_questions" not in session

    def test_duplicate_create_distinct_ids(self, client):
        a = make_session(client)
        b = make_session(client)
        assert a["session_id"] != b["session_id"]

    def test_tasks_listed(self, client):
        session = make_session(client)
        response = client.get("/tasks", params={"session": session["session_id"]})
        assert response.status_code == 200
        tasks = response.json()["tasks"]
        assert {"video_id": "v1", "instance_key": "i1", "class": "pour oil"} in tasks

    def test_tasks_unknown_session(self, client):
        assert client.get("/tasks", params={"session": "nope"}).status_code == 404

    def test_bad_schema_rejected(self, client):
        response = client.post("/sessions", json={"annotator_id": "a", "schema": "freestyle"})
        assert response.status_code == 422


class TestGate:
    def test_all_correct_passes(self, client):
        session = make_session(client)
        result = pass_gate(client, session["session_id"])
        assert result["passed"] is True

    def test_one_wrong_fails_with_retry(self, client):
        session = make_session(client)
        response = client.post(f"/sessions/{session['session_id']}/gate", json={"answers": [1, 1]})
        body = response.json()
        assert body == {"passed": False, "retry_allowed": True, "attempts": 1}

    def test_third_failure_exhausts_retries(self, client):
        session = make_session(client)
        sid = session["session_id"]
        for attempt in range(1, 3):
            body = client.post(f"/sessions/{sid}/gate", json={"answers": [0, 1]}).json()
            assert body["retry_allowed"] is True and body["attempts"] == attempt
        final = client.post(f"/sessions/{sid}/gate", json={"answers": [0, 1]}).json()
        assert final == {"passed": False, "retry_allowed": False, "attempts": 3}
        # and the session stays locked even for correct answers
        locked = client.post(f"/sessions/{sid}/gate", json={"answers": [1, 0]}).json()
        assert locked["passed"] is False and locked["retry_allowed"] is False

    def test_idempotent_after_pass(self, client):
        session = make_session(client)
        pass_gate(client, session["session_id"])
        again = client.post(f"/sessions/{session['session_id']}/gate", json={"answers": [0, 0]}).json()
        assert again["passed"] is True

    def test_wrong_answer_count_rejected(self, client):
        session = make_session(client)
        response = client.post(f"/sessions/{session['session_id']}/gate", json={"answers": [1]})
        assert response.status_code == 422

    def test_gate_on_conventional_rejected(self, client):
        session = make_session(client, schema="conventional")
        response = client.post(f"/sessions/{session['session_id']}/gate", json={"answers": [1, 0]})
        assert response.status_code == 422


class TestSubmit:
    def test_valid_rb_accepted(self, client):
        session = make_session(client)
        pass_gate(client, session["session_id"])
        response = client.post("/annotations", json=rb_payload(session["session_id"]))
        assert response.status_code == 200
        assert response.json() == {"accepted": True, "annotation_id": "r1"}

    def test_gate_not_passed_rejected(self, client):
        session = make_session(client)
        response = client.post("/annotations", json=rb_payload(session["session_id"]))
        assert response.status_code == 403
        assert response.json()["reasons"][0]["code"] == "gate_not_passed"

    def test_adjacency_violation_rejected(self, client):
        session = make_session(client)
        pass_gate(client, session["session_id"])
        payload = rb_payload(session["session_id"], act=(10.5, 12.0))
        response = client.post("/annotations", json=payload)
        assert response.status_code == 422
        assert response.json()["reasons"][0]["code"] == "rb_adjacency"

    def test_out_of_bounds_rejected(self, client):
        session = make_session(client)
        pass_gate(client, session["session_id"])
        payload = rb_payload(session["session_id"], video="v2", pre=(9.0, 10.0), act=(10.0, 31.0))
        response = client.post("/annotations", json=payload)
        assert response.status_code == 422
        assert response.json()["reasons"][0]["code"] == "out_of_bounds"

    def test_schema_mismatch_rejected(self, client):
        session = make_session(client, schema="conventional")
        payload = rb_payload(session["session_id"])
        response = client.post("/annotations", json=payload)
        assert response.status_code == 422
        assert response.json()["reasons"][0]["code"] == "schema_mismatch"

    def test_unknown_session_404(self, client):
        response = client.post("/annotations", json=rb_payload("ghost"))
        assert response.status_code == 404

    def test_unknown_video_accepted_without_bounds_check(self, client):
        session = make_session(client)
        pass_gate(client, session["session_id"])
        payload = rb_payload(session["session_id"], video="unmapped", act=(10.0, 500.0))
        assert client.post("/annotations", json=payload).status_code == 200


class TestConsistencyEndpoint:
    def submit(self, client, session_id, ann_id, pre, act):
        response = client.post("/annotations", json=rb_payload(session_id, ann_id=ann_id, pre=pre, act=act))
        assert response.status_code == 200

    def test_first_annotator_empty_feedback(self, client):
        session = make_session(client)
        pass_gate(client, session["session_id"])
        self.submit(client, session["session_id"], "r1", (9.0, 10.0), (10.0, 12.0))
        body = client.get("/instances/i1/consistency", params={"scheme": "rb_full"}).json()
        assert body == {"n_annotators": 1, "pair_ious": [], "mean": None, "quartiles": None}

    def test_two_identical_annotations_mean_one(self, client):
        session = make_session(client)
        pass_gate(client, session["session_id"])
        self.submit(client, session["session_id"], "r1", (9.0, 10.0), (10.0, 12.0))
        self.submit(client, session["session_id"], "r2", (9.0, 10.0), (10.0, 12.0))
        body = client.get("/instances/i1/consistency", params={"scheme": "rb_full"}).json()
        assert body["n_annotators"] == 2
        assert body["pair_ious"] == [1.0]
        assert body["mean"] == 1.0

    def test_unknown_instance_404(self, client):
        assert client.get("/instances/ghost/consistency").status_code == 404

    def test_task_known_instance_with_no_annotations(self, client):
        body = client.get("/instances/i2/consistency", params={"scheme": "conventional"}).json()
        assert body["n_annotators"] == 0

    def test_bad_scheme_rejected(self, client):
        assert client.get("/instances/i1/consistency", params={"scheme": "nope"}).status_code == 422

    def test_feedback_matches_offline_library_run(self, client):
        session = make_session(client)
        pass_gate(client, session["session_id"])
        self.submit(client, session["session_id"], "r1", (9.0, 10.0), (10.0, 12.0))
        self.submit(client, session["session_id"], "r2", (9.0, 10.5), (10.5, 13.0))
        self.submit(client, session["session_id"], "r3", (8.5, 10.0), (10.0, 12.0))
        body = client.get("/instances/i1/consistency", params={"scheme": "rb_full"}).json()

        exported = client.get("/export")
        records = parse_annotations(exported.content).records
        summary = summarize(SchemeSelector.RB_FULL, records)
        (inst,) = summary.instance_stats
        assert body["pair_ious"] == list(inst.pair_ious)
        assert body["mean"] == inst.mean
        assert body["quartiles"] == list(inst.quartiles)


class TestExportAndVideos:
    def test_export_round_trips(self, client):
        session = make_session(client)
        pass_gate(client, session["session_id"])
        client.post("/annotations", json=rb_payload(session["session_id"]))
        exported = client.get("/export")
        assert exported.status_code == 200
        result = parse_annotations(exported.content)
        assert len(result.records) == 1
        assert result.records[0].annotation_id == "r1"

    def test_video_meta(self, client):
        body = client.get("/videos/v1/meta").json()
        assert body == {"video_id": "v1", "duration": 100.0, "frame_rate": 30.0}
        assert client.get("/videos/ghost/meta").status_code == 404

    def test_video_bytes(self, client):
        response = client.get("/videos/v1")
        assert response.status_code == 200
        assert response.content == b"fake video bytes"
        assert client.get("/videos/ghost").status_code == 404


class TestPersistenceAcrossRestart:
    def test_records_survive_app_recreation(self, project):
        with TestClient(create_app(project)) as client:
            session = make_session(client)
            pass_gate(client, session["session_id"])
            client.post("/annotations", json=rb_payload(session["session_id"]))
        with TestClient(create_app(project)) as fresh:
            exported = fresh.get("/export")
            records = parse_annotations(exported.content).records
            assert [r.annotation_id for r in records] == ["r1"]


def test_config_round_trip_includes_gate_settings():
    config = load_config(json.dumps(CONFIG).encode())
    assert len(config.control_questions) == 2
    assert load_config(dump_config(config)) == config
