"""Smoke tests for the python module: thin checks that the bindings expose
the core operations faithfully; the numerical heavy lifting is covered by
the C++ suites."""

import json
import math

import pytest

import tsclimb


def test_identity_map_and_base_density():
    m = tsclimb.TransportMap.make("identity", dim=2)
    assert m.n_params == 0
    fwd = m.forward([0.3, -0.7])
    assert fwd.z == [0.3, -0.7]
    assert fwd.logdet == 0.0
    assert m.log_q([0.0, 0.0]) == pytest.approx(-math.log(2 * math.pi))


def test_affine_forward_matches_hand_case():
    m = tsclimb.TransportMap.make("affine", dim=2)
    m.params = [1.0, -1.0, math.log(2.0), 0.0]
    fwd = m.forward([0.5, 2.0])
    assert fwd.z == pytest.approx([2.0, 1.0])
    assert fwd.logdet == pytest.approx(math.log(2.0))
    assert m.inverse([2.0, 1.0]) == pytest.approx([0.5, 2.0])


def test_gaussian_score_gradient():
    m = tsclimb.TransportMap.make("affine", dim=1)
    g = m.grad_log_q_params([2.0])
    assert g == pytest.approx([2.0, 3.0])


def test_flow_round_trip():
    m = tsclimb.TransportMap.make("realnvp", dim=2, stack_depth=2, hidden_width=8)
    rng = tsclimb.Rng(3)
    m.params = [0.3 * rng.normal() for _ in range(m.n_params)]
    eps = [0.4, -1.1]
    z = m.forward(eps).z
    back = m.inverse(z)
    assert back == pytest.approx(eps, abs=1e-8)


def test_targets_and_exact_sampling():
    funnel = tsclimb.make_funnel(a=1.0)
    assert funnel.log_joint([0.0, 0.0]) == pytest.approx(-math.log(2 * math.pi))
    banana = tsclimb.make_banana()
    assert banana.log_joint([0.0, 0.0]) == pytest.approx(-6.140462159403391)

    rng = tsclimb.Rng(7)
    draws = [banana.exact_sample(rng) for _ in range(200000)]
    mean1 = sum(z[0] for z in draws) / len(draws)
    var1 = sum((z[0] - mean1) ** 2 for z in draws) / (len(draws) - 1)
    assert math.sqrt(var1) == pytest.approx(10.0, rel=0.02)


def test_ess_of_iid_draws():
    rng = tsclimb.Rng(1)
    samples = [[rng.normal()] for _ in range(20000)]
    e = tsclimb.ess(samples, dim=0)
    assert 0.9 * len(samples) <= e <= len(samples)


def test_run_experiment_and_reproducibility(tmp_path):
    config = {
        "target": {"name": "funnel"},
        "trainer": {"method": "tsc", "iterations": 500, "freeze_window": 100},
        "seed": 3,
        "output_dir": str(tmp_path / "run"),
    }
    result = tsclimb.run_experiment(json.dumps(config))
    summary_path = tmp_path / "run" / "summary.json"
    assert summary_path.exists()
    first = summary_path.read_bytes()
    summary = json.loads(first)
    assert summary["counters"]["chain_reinits"] == 0
    assert len(result["mean"]) == 2

    tsclimb.run_experiment(json.dumps(config))
    assert summary_path.read_bytes() == first


def test_config_errors_surface_as_value_errors():
    with pytest.raises(ValueError, match="nuts"):
        tsclimb.run_experiment(json.dumps({
            "target": {"name": "funnel"},
            "trainer": {"method": "nuts"},
        }))


def test_default_config_round_trips():
    cfg = json.loads(tsclimb.default_config_json())
    assert cfg["trainer"]["lr_lambda"] == pytest.approx(3e-3)
    assert cfg["hmc"]["target_accept"] == pytest.approx(0.67)
