import itertools

import numpy as np
import pytest

import pcreg


def rot_z(deg):
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def homogeneous(r, t):
    m = np.eye(4)
    m[:3, :3] = r
    m[:3, 3] = t
    return m


def test_se3_against_numpy():
    a = homogeneous(rot_z(30), [0.1, -0.2, 0.3])
    b = homogeneous(rot_z(-75), [1.0, 0.5, 0.0])
    np.testing.assert_allclose(pcreg.compose(a, b), a @ b, atol=1e-12)
    np.testing.assert_allclose(pcreg.inverse(a), np.linalg.inv(a), atol=1e-12)
    xi = np.array([0.1, -0.2, 0.05, 0.3, 0.0, -0.1])
    np.testing.assert_allclose(pcreg.se3_log(pcreg.se3_exp(xi)), xi, atol=1e-12)
    assert pcreg.rotation_error(a, np.eye(4)) == pytest.approx(30.0)


def test_chamfer_and_emd_brute_force():
    rng = np.random.default_rng(0)
    x, y = rng.uniform(-1, 1, (6, 3)), rng.uniform(-1, 1, (6, 3))
    d = ((x[:, None, :] - y[None, :, :]) ** 2).sum(-1)
    assert pcreg.chamfer(x, y) == pytest.approx(d.min(1).mean() + d.min(0).mean(), rel=1e-12)
    best = min(d[range(6), list(p)].mean() for p in itertools.permutations(range(6)))
    assert pcreg.emd(x, y) == pytest.approx(best, rel=1e-12)


def test_icp_recovers_small_misalignment():
    templ = pcreg.synth_shape("l-bracket", 400, seed=3)
    gt = homogeneous(rot_z(10), [0.05, 0.0, -0.02])
    res = pcreg.icp(pcreg.apply(gt, templ), templ)
    assert res["converged"]
    assert pcreg.rotation_error(res["transform"], np.linalg.inv(gt)) < 0.1


def test_auc_constructed_sets():
    assert pcreg.auc([0.0] * 10) == 1.0
    assert pcreg.auc([90.0] * 10) == pytest.approx(0.5, abs=0.003)


def test_grad_check_linear():
    ok, err = pcreg.grad_check("linear", 1e-6, 1, 8)
    assert ok and err < 1e-6


def test_train_and_register(tmp_path):
    cfg = "\n".join([
        "shape = l-bracket", "points_per_cloud = 64", "loss = frobenius", "unroll_iterations = 2",
        "batch_size = 4", "epochs = 1", "pairs_per_epoch = 8", "train_seed = 3",
    ])
    report = pcreg.train(cfg, str(tmp_path))
    assert report["steps"] == 2
    model = pcreg.Model.load(str(tmp_path / "model.ckpt"))
    templ = pcreg.synth_shape("l-bracket", 64, seed=5)
    assert model.encode(templ).shape == (1024,)
    res = model.register(templ, templ, max_iterations=5)
    assert res["transform"].shape == (4, 4)
    assert len(res["residuals"]) == res["iterations"]
    single = model.register(templ, templ, method="pcrnet")
    assert single["iterations"] == 1
