import numpy as np
import pytest
from fastapi.testclient import TestClient

from trajlab import ingest, session, synth
from trajlab.cli import main
from trajlab.fuse import Correction, apply_corrections, downsample
from trajlab.service import create_app


@pytest.fixture
def fused_session(tmp_path):
    out = tmp_path / "sess"
    spec = synth.SceneSpec(seed=21, pedestrian_count=4, duration_s=2.0,
                           pixel_noise_px=0.5)
    synth.write_scene(synth.generate(spec), out)
    manifest = out / "manifest.json"
    for verb in ("fit-plane", "sync", "fuse"):
        assert main([verb, "--manifest", str(manifest)]) == 0
    return out


@pytest.fixture
def client(fused_session):
    manifest = ingest.load_manifest(fused_session / "manifest.json")
    state = session.ReviewSession(manifest)
    return TestClient(create_app(state)), state, fused_session


class TestReads:
    def test_session_endpoint(self, client):
        api, state, root = client
        r = api.get("/api/session")
        assert r.status_code == 200
        body = r.json()
        assert body["stats"]["pedestrian_count"] == 4
        assert body["cameras"] == ["cam1", "cam2", "cam3"]
        assert body["frame_max"] > body["frame_min"]

    def test_trajectory_window(self, client):
        api, state, root = client
        r = api.get("/api/trajectories", params={"from": 0, "to": 30})
        assert r.status_code == 200
        body = r.json()
        assert body["frame_from"] == 0 and body["frame_to"] == 30
        for traj in body["trajectories"]:
            assert all(0 <= s[0] <= 30 for s in traj["samples"])
            assert traj["segments"]

    def test_anomalies_listing(self, client):
        api, state, root = client
        r = api.get("/api/anomalies")
        assert r.status_code == 200
        assert isinstance(r.json(), list)


class TestCorrections:
    def test_merge_disjoint_tracks(self, client):
        api, state, root = client
        # split first so a disjoint merge exists regardless of the scene
        r = api.get("/api/session")
        mid = (r.json()["frame_min"] + r.json()["frame_max"]) // 2
        assert api.post("/api/corrections", json={"kind": "split", "id": "p0", "frame": mid}).status_code == 200
        before = {t["id"] for t in api.get("/api/trajectories").json()["trajectories"]}
        assert {"p0", "p0_b"} <= before
        r = api.post("/api/corrections", json={"kind": "merge", "a": "p0", "b": "p0_b"})
        assert r.status_code == 200
        after = {t["id"] for t in api.get("/api/trajectories").json()["trajectories"]}
        assert "p0_b" not in after and "p0" in after

    def test_overlapping_merge_rejected_with_code(self, client):
        api, state, root = client
        r = api.post("/api/corrections", json={"kind": "merge", "a": "p0", "b": "p1"})
        assert r.status_code == 400
        assert r.json()["detail"]["code"] == "OverlappingMerge"

    def test_unknown_id_rejected(self, client):
        api, state, root = client
        r = api.post("/api/corrections", json={"kind": "mark_verified", "id": "ghost"})
        assert r.status_code == 400
        assert r.json()["detail"]["code"] == "UnknownId"

    def test_correction_racing_refuse_gets_409(self, client):
        api, state, root = client
        state.refusing = True
        r = api.post("/api/corrections", json={"kind": "mark_verified", "id": "p0"})
        assert r.status_code == 409
        state.refusing = False

    def test_corrections_persisted(self, client):
        api, state, root = client
        assert api.post("/api/corrections", json={"kind": "mark_verified", "id": "p0"}).status_code == 200
        log = ingest.load_corrections(root / "corrections.json")
        assert log == [Correction(kind="mark_verified", id="p0")]


class TestRefuseAndExport:
    def test_refuse_replays_log(self, client):
        api, state, root = client
        assert api.post("/api/corrections", json={"kind": "relabel", "old": "p0", "new": "alice"}).status_code == 200
        r = api.post("/api/refuse")
        assert r.status_code == 200
        ids = {t["id"] for t in api.get("/api/trajectories").json()["trajectories"]}
        assert "alice" in ids and "p0" not in ids

    def test_scripted_session_matches_offline_export(self, client):
        api, state, root = client
        r = api.get("/api/session").json()
        mid = (r["frame_min"] + r["frame_max"]) // 2
        script = [
            {"kind": "split", "id": "p0", "frame": mid},
            {"kind": "merge", "a": "p0", "b": "p0_b"},
            {"kind": "relabel", "old": "p1", "new": "walker"},
            {"kind": "delete", "id": "p2", "start": mid, "end": mid + 10},
            {"kind": "mark_verified", "id": "walker"},
        ]
        for corr in script:
            assert api.post("/api/corrections", json=corr).status_code == 200
        online = api.get("/api/export", params={"fps": 30.0}).json()["csv"]

        fused = ingest.load_fused(root / "fused.json")
        log = ingest.load_corrections(root / "corrections.json")
        offline_trajs = apply_corrections(fused.trajectories, log)
        offline_trajs = [downsample(t, fused.fps, 30.0) for t in offline_trajs]
        offline = ingest.trajectories_csv(offline_trajs, 30.0, fused.session_id)
        assert online == offline

    def test_export_validation_error(self, client):
        api, state, root = client
        r = api.get("/api/export", params={"fps": 7.0})
        assert r.status_code == 400
        assert r.json()["detail"]["code"] == "NonIntegerRatio"
