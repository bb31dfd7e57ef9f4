import math

import numpy as np
import pytest

import lipcalc


def test_ball_and_doubling():
    path = lipcalc.generate_space({"kind": "path_graph", "count": 3})
    assert sorted(lipcalc.ball(path, 1, 1.0)) == [0, 1, 2]
    seg = lipcalc.generate_space({"kind": "path_graph", "count": 201})
    assert lipcalc.doubling_stats(seg, [1, 2, 4, 8])["kappa"] < 2


def test_global_lip_and_mcshane():
    grid = lipcalc.generate_space({"kind": "euclidean_grid", "lower": [0], "upper": [1], "step": 0.1})
    xs = grid.coords[:, 0]
    assert lipcalc.global_lip(grid, list(xs**2)) == pytest.approx(1.9, rel=1e-12)
    ext = lipcalc.mcshane_extend(grid, [0, 10], [0.0, 1.0])
    assert np.allclose(ext, xs, atol=1e-12)


def test_distance_matrix_matches_numpy():
    rng = np.random.default_rng(0)
    pts = rng.random((20, 2))
    sp = lipcalc.space_from_coords(pts)
    want = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    assert np.allclose(sp.distances(), want, atol=1e-15)


def test_net_and_kuhn():
    grid = lipcalc.generate_space({"kind": "euclidean_grid", "lower": [0], "upper": [1], "step": 0.1})
    net = lipcalc.build_net(grid, 0.25)
    assert net["points"] == [0, 3, 6, 9]
    loc = lipcalc.locate_simplex(np.array([0.7, 0.2]))
    assert loc["vertices"] == [[0, 0], [1, 0], [1, 1]]
    assert np.allclose(loc["barycentric"], [0.3, 0.5, 0.2])


def test_hajlasz_three_point_path():
    path = lipcalc.generate_space({"kind": "path_graph", "count": 3})
    res = lipcalc.hajlasz_gradient(path, [0.0, 1.0, 2.0], 2.0)
    assert res["norm"] == pytest.approx(0.5, abs=1e-10)
    assert lipcalc.hajlasz_p2_oracle(path, [0.0, 1.0, 2.0]) == pytest.approx(0.5, abs=1e-12)
    assert lipcalc.hajlasz_gradient(path, [0.0, 1.0, 2.0], math.inf)["norm"] == 0.5


def test_linear_algebra():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(lipcalc.adjugate(a), np.array([[4.0, -2.0], [-3.0, 1.0]]))
    ob = lipcalc.orthogonalize([a])
    assert ob["det"][0] == pytest.approx(-2.0)
    cv = lipcalc.change_of_variables(np.array([[2.0, 3.0]]))
    assert np.array_equal(cv["t"], np.array([[1.0, 0.0], [-3.0, 2.0]]))


def test_embedding_audit_roundtrip():
    path = lipcalc.generate_space({"kind": "path_graph", "count": 16})
    emb = lipcalc.assouad_embed(path, 0.5)
    assert emb["k_low"] > 0
    audit = lipcalc.distortion_audit(path, emb["images"], 0.5)
    assert audit["ratio"] == pytest.approx(emb["ratio"], rel=1e-15)


def test_errors_surface_as_exceptions():
    with pytest.raises(lipcalc.Error):
        lipcalc.generate_space({"kind": "snowflake", "base": {"kind": "path_graph", "count": 3}, "s": 2.0})
    with pytest.raises(ValueError):
        lipcalc.run_experiment("E99", "/tmp/never")


def test_experiment_run_and_replay(tmp_path):
    assert lipcalc.experiment_ids() == [f"E{i}" for i in range(1, 8)]
    manifest = lipcalc.run_experiment("E6", tmp_path / "run")
    assert manifest["passed"]
    rep = lipcalc.replay(str(tmp_path / "run" / "manifest.json"), str(tmp_path / "again"))
    assert rep["identical"]
