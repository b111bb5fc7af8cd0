import numpy as np
import pytest
from fastapi.testclient import TestClient

from hdprior import cli, model_file as mfm
from hdprior.server import create_app

from conftest import model_path


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def ri_payload():
    """Random-intercept model as a self-contained JSON body."""
    return mfm.serialize(mfm.parse_model(model_path("random_intercept")))


@pytest.fixture(scope="module")
def kenya_payload():
    return mfm.serialize(mfm.parse_model(model_path("kenya")))


def curve_median(body: dict) -> float:
    return float(np.interp(0.5, body["cdf"], body["omega"]))


class TestModelLifecycle:
    def test_post_and_density_median(self, client, ri_payload):
        created = client.post("/api/models", json=ri_payload)
        assert created.status_code == 201
        token = created.json()["id"]
        assert created.json()["calibration"]["splits"][0]["median"] == pytest.approx(
            0.25, abs=1e-9
        )
        dens = client.get(f"/api/models/{token}/splits/1/density")
        assert dens.status_code == 200
        body = dens.json()
        assert body["prior"] == "pc"
        assert curve_median(body) == pytest.approx(0.25, abs=1e-3)

    def test_update_creates_new_snapshot_old_untouched(self, client, ri_payload):
        token = client.post("/api/models", json=ri_payload).json()["id"]
        patched = client.post(
            f"/api/models/{token}/splits/1/prior",
            json={"type": "pc", "median": 0.5},
        )
        assert patched.status_code == 201
        new_token = patched.json()["id"]
        assert new_token != token
        new_med = curve_median(client.get(f"/api/models/{new_token}/splits/1/density").json())
        old_med = curve_median(client.get(f"/api/models/{token}/splits/1/density").json())
        assert new_med == pytest.approx(0.5, abs=1e-3)
        assert old_med == pytest.approx(0.25, abs=1e-3)

    def test_summary_roundtrips_model_file(self, client, kenya_payload):
        token = client.post("/api/models", json=kenya_payload).json()["id"]
        summary = client.get(f"/api/models/{token}").json()
        assert summary["schema_version"] == "hdprior/1"
        assert summary["model_file"] == kenya_payload
        assert len(summary["calibration"]["splits"]) == 3

    def test_unknown_id_404(self, client):
        for path in ("/api/models/beef", "/api/models/beef/splits/1/density",
                     "/api/models/beef/samples", "/api/models/beef/marginals"):
            resp = client.get(path)
            assert resp.status_code == 404
            assert resp.json()["error"] == "NotFound"

    def test_invalid_model_422(self, client, ri_payload):
        bad = dict(ri_payload)
        bad = {**bad, "tree": {"leaf": "nonexistent"}}
        resp = client.post("/api/models", json=bad)
        assert resp.status_code == 422
        assert "tree" in resp.json()["message"]

    def test_unattainable_median_422(self, client, kenya_payload):
        # kenya's top split has a singular base side: medians above 1/4 do
        # not exist for any positive rate
        token = client.post("/api/models", json=kenya_payload).json()["id"]
        resp = client.post(
            f"/api/models/{token}/splits/1/prior",
            json={"type": "pc", "median": 0.9},
        )
        assert resp.status_code == 422
        assert "supremum" in resp.json()["message"]

    def test_patch_expanded_split_rejected(self, client):
        payload = mfm.serialize(mfm.parse_model(model_path("latin_square_dual")))
        token = client.post("/api/models", json=payload).json()["id"]
        resp = client.post(
            f"/api/models/{token}/splits/2/prior",
            json={"type": "pc", "median": 0.3},
        )
        assert resp.status_code == 422
        assert "expansion" in resp.json()["message"]

    def test_patch_dirichlet_concentration(self, client):
        payload = mfm.serialize(mfm.parse_model(model_path("latin_square")))
        token = client.post("/api/models", json=payload).json()["id"]
        resp = client.post(
            f"/api/models/{token}/splits/2/prior",
            json={"type": "dirichlet", "concentration": 2.5},
        )
        assert resp.status_code == 201
        report = resp.json()["calibration"]
        assert report["splits"][1]["concentration"] == 2.5


class TestSamplesAndMarginals:
    def test_same_seed_identical_bodies(self, client, kenya_payload):
        token = client.post("/api/models", json=kenya_payload).json()["id"]
        a = client.get(f"/api/models/{token}/samples", params={"n": 64, "seed": 5})
        b = client.get(f"/api/models/{token}/samples", params={"n": 64, "seed": 5})
        assert a.status_code == 200
        assert a.headers["content-type"].startswith("text/csv")
        assert a.content == b.content

    def test_sample_cap(self, client, kenya_payload):
        token = client.post("/api/models", json=kenya_payload).json()["id"]
        resp = client.get(f"/api/models/{token}/samples", params={"n": 2_000_000})
        assert resp.status_code == 422

    def test_samples_match_cli_bytes(self, client, kenya_payload, capsys, tmp_path):
        token = client.post("/api/models", json=kenya_payload).json()["id"]
        body = client.get(
            f"/api/models/{token}/samples", params={"n": 33, "seed": 42}
        ).text
        code = cli.main(["sample", "-m", model_path("kenya"), "-n", "33",
                         "--seed", "42"])
        assert code == 0
        assert capsys.readouterr().out == body

    def test_density_csv_matches_cli_bytes(self, client, kenya_payload, capsys):
        token = client.post("/api/models", json=kenya_payload).json()["id"]
        body = client.get(
            f"/api/models/{token}/splits/3/density", params={"format": "csv"}
        ).text
        code = cli.main(["density", "-m", model_path("kenya"), "--split", "3"])
        assert code == 0
        assert capsys.readouterr().out == body

    def test_marginals_shape(self, client, kenya_payload):
        token = client.post("/api/models", json=kenya_payload).json()["id"]
        body = client.get(
            f"/api/models/{token}/marginals", params={"n": 2000, "seed": 1}
        ).json()
        assert set(body["leaf_shares"]) == {"spatial", "county", "cluster", "household"}
        assert body["leaf_shares"]["spatial"]["share_at_base"] == 0.0
        assert set(body["split_weights"]) == {"1", "2", "3"}
