"""Run-configuration parsing: presets, complex decoding, per-mode required
keys, bounds, and the echoed (self-describing) form."""
import json
import warnings

import numpy as np
import pytest

from photon_filter.config import RunConfig, load_config, load_raw
from photon_filter.errors import ConfigError
from photon_filter.operators import sigma_minus, sigma_z


def master_config(**extra) -> dict:
    cfg = {
        "mode": "master",
        "system": {"preset": "twolevel", "kappa": 1.0, "omega": 0.5},
        "pulse": {"shape": "gaussian", "t0": 3.0, "sigma": 1.0},
        "eta": [1, 0],
        "T": 2.0,
    }
    cfg.update(extra)
    return cfg


def trajectory_config(**extra) -> dict:
    cfg = master_config(mode="trajectory", dt_sde=1e-3, seed=7)
    cfg.update(extra)
    return cfg


def test_twolevel_preset_expansion():
    rc = RunConfig.from_dict(master_config())
    assert np.array_equal(rc.system.S, np.eye(2))
    assert np.max(np.abs(rc.system.L - np.asarray(sigma_minus))) <= 1e-15
    assert np.max(np.abs(rc.system.H - 0.5 * np.asarray(sigma_z))) <= 1e-15
    assert rc.echo["system"] == {"preset": "twolevel", "kappa": 1.0, "omega": 0.5}
    # bare kappa/omega without the preset tag resolve the same way
    alt = RunConfig.from_dict(master_config(system={"kappa": 4.0, "omega": 0.0}))
    assert np.max(np.abs(alt.system.L - 2.0 * np.asarray(sigma_minus))) <= 1e-15
    with pytest.raises(ConfigError, match="twolevel preset requires key 'omega'"):
        RunConfig.from_dict(master_config(system={"preset": "twolevel", "kappa": 1.0}))


def test_defaults_resolved():
    rc = RunConfig.from_dict(master_config())
    assert rc.dt_ode == 1e-3
    assert rc.horizon == 2.0
    assert rc.w_floor == 1e-12
    assert rc.cross_check_tol == 1e-2
    assert rc.dt_sde is None and rc.seed is None and rc.n_traj is None
    assert list(rc.observables) == ["sz"]
    assert rc.echo["eta"] == [[1.0, 0.0], [0.0, 0.0]]
    assert rc.echo["pulse"]["shape"] == "gaussian"


def test_explicit_matrices_and_complex_decoding():
    system = {
        "S": [[0, 1], [1, 0]],
        "L": [[0, [0.5, -0.25]], [0, 0]],
        "H": [[1, 0], [0, -1]],
    }
    rc = RunConfig.from_dict(master_config(system=system, eta=[0, 1]))
    assert rc.system.L[0, 1] == 0.5 - 0.25j
    assert np.array_equal(rc.system.S, np.array([[0, 1], [1, 0]]))
    # the echo uses [re, im] pairs throughout
    assert rc.echo["system"]["L"][0][1] == [0.5, -0.25]

    with pytest.raises(ConfigError, match="does not match matrix size"):
        RunConfig.from_dict(master_config(system={**system, "dim": 3}))
    with pytest.raises(ConfigError, match="S is not unitary"):
        RunConfig.from_dict(master_config(
            system={**system, "S": [[1, 0], [0, 2]]}))
    with pytest.raises(ConfigError, match="missing matrix 'H'"):
        RunConfig.from_dict(master_config(
            system={"S": [[1, 0], [0, 1]], "L": [[0, 0], [0, 0]]}))
    with pytest.raises(ConfigError, match="expected a mapping"):
        RunConfig.from_dict(master_config(system=[1, 2]))
    with pytest.raises(ConfigError, match="rows have inconsistent lengths"):
        RunConfig.from_dict(master_config(
            system={**system, "H": [[1, 0], [0]]}))
    with pytest.raises(ConfigError, match=r"expected a number or \[re, im\] pair"):
        RunConfig.from_dict(master_config(
            system={**system, "H": [[1, "x"], [0, 1]]}))


def test_eta_validation():
    with pytest.raises(ConfigError, match="eta has length 3"):
        RunConfig.from_dict(master_config(eta=[1, 0, 0]))
    with pytest.raises(ConfigError, match="nonzero"):
        RunConfig.from_dict(master_config(eta=[0, 0]))
    with pytest.raises(ConfigError, match="not normalized"):
        RunConfig.from_dict(master_config(eta=[1, 0.1]))
    # norm off by less than the gate: warn and renormalize
    with pytest.warns(UserWarning, match="auto-normalizing"):
        rc = RunConfig.from_dict(master_config(eta=[1 + 5e-7, 0]))
    assert abs(np.linalg.norm(rc.eta) - 1.0) <= 1e-15
    # an exactly normalized vector passes silently
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        RunConfig.from_dict(master_config(eta=[[0, 1], 0]))


def test_observable_parsing():
    rc = RunConfig.from_dict(master_config(observables=["sx", "population"]))
    assert list(rc.observables) == ["sx", "population"]
    assert np.array_equal(rc.observables["population"], np.diag([0.0, 1.0]))
    named = RunConfig.from_dict(master_config(
        observables=[{"name": "proj", "matrix": [[1, 0], [0, 0]]}]))
    assert np.array_equal(named.observables["proj"], np.diag([1.0, 0.0]))
    mapped = RunConfig.from_dict(master_config(
        observables={"flip": [[0, 1], [1, 0]], "alias": "sz"}))
    assert set(mapped.observables) == {"flip", "sz"}

    with pytest.raises(ConfigError, match="unknown observable preset 'sq'"):
        RunConfig.from_dict(master_config(observables=["sq"]))
    with pytest.raises(ConfigError, match=r"has shape \(3, 3\)"):
        RunConfig.from_dict(master_config(
            observables={"big": [[0, 0, 0], [0, 0, 0], [0, 0, 0]]}))
    with pytest.raises(ConfigError, match="expected a preset name"):
        RunConfig.from_dict(master_config(observables=[42]))
    with pytest.raises(ConfigError, match="expected a list or mapping"):
        RunConfig.from_dict(master_config(observables=7))
    # presets are two-level shorthands; larger systems must spell matrices out
    dim3 = {"S": np.eye(3).tolist(),
            "L": np.zeros((3, 3)).tolist(),
            "H": np.zeros((3, 3)).tolist()}
    with pytest.raises(ConfigError, match="requires a two-level system"):
        RunConfig.from_dict(master_config(system=dim3, eta=[1, 0, 0],
                                          observables=["sz"]))


def test_mode_and_unknown_keys():
    with pytest.raises(ConfigError, match="unknown config keys: frobnicate"):
        RunConfig.from_dict(master_config(frobnicate=1))
    with pytest.raises(ConfigError, match="mode must be one of"):
        RunConfig.from_dict(master_config(mode="simulate"))
    with pytest.raises(ConfigError, match="mode must be one of"):
        RunConfig.from_dict({})
    with pytest.raises(ConfigError, match="top-level config must be a mapping"):
        RunConfig.from_dict([1, 2])


def test_required_keys_by_mode():
    for key in ("system", "pulse", "eta"):
        cfg = master_config()
        del cfg[key]
        with pytest.raises(ConfigError, match=f"missing required key '{key}'"):
            RunConfig.from_dict(cfg)
    cfg = trajectory_config()
    del cfg["dt_sde"]
    with pytest.raises(ConfigError,
                       match="missing required key 'dt_sde' for mode 'trajectory'"):
        RunConfig.from_dict(cfg)
    cfg = trajectory_config()
    del cfg["seed"]
    with pytest.raises(ConfigError, match="'seed' for mode 'trajectory'"):
        RunConfig.from_dict(cfg)
    with pytest.raises(ConfigError, match="'n_traj' for mode 'ensemble'"):
        RunConfig.from_dict(trajectory_config(mode="ensemble"))
    # validate mode needs no model at all
    rc = RunConfig.from_dict({"mode": "validate"})
    assert rc.system is None and rc.observables == {}
    # master mode may still pin dt_sde for downstream tooling
    rc = RunConfig.from_dict(master_config(dt_sde=5e-4))
    assert rc.dt_sde == 5e-4


def test_numeric_bounds():
    with pytest.raises(ConfigError, match="dt_ode: must be a positive finite"):
        RunConfig.from_dict(master_config(dt_ode=0))
    with pytest.raises(ConfigError, match="T: must be a positive finite"):
        RunConfig.from_dict(master_config(T=-1.0))
    with pytest.raises(ConfigError, match="w_floor: expected a number"):
        RunConfig.from_dict(master_config(w_floor="tiny"))
    for bad_seed in (-1, 2 ** 64, True, "7"):
        with pytest.raises(ConfigError, match="unsigned 64-bit"):
            RunConfig.from_dict(trajectory_config(seed=bad_seed))
    with pytest.raises(ConfigError, match="n_traj must be an integer >= 2"):
        RunConfig.from_dict(trajectory_config(mode="ensemble", n_traj=1))
    with pytest.raises(ConfigError, match="n_traj must be a positive integer"):
        RunConfig.from_dict(master_config(n_traj=0))
    with pytest.raises(ConfigError, match="n_threads must be a positive integer"):
        RunConfig.from_dict(master_config(n_threads=0))
    with pytest.raises(ConfigError, match="tolerances: expected a mapping"):
        RunConfig.from_dict(master_config(tolerances=[1]))
    with pytest.raises(ConfigError, match="pulse: unknown pulse shape"):
        RunConfig.from_dict(master_config(pulse={"shape": "sawtooth"}))
    with pytest.raises(ConfigError, match="missing key 'sigma'"):
        RunConfig.from_dict(master_config(pulse={"shape": "gaussian", "t0": 1}))
    rc = RunConfig.from_dict(master_config(tolerances={"cross_check": 5e-3}))
    assert rc.cross_check_tol == 5e-3
    assert rc.echo["tolerances"] == {"cross_check": 5e-3}


def test_checks_only_in_validate_mode():
    with pytest.raises(ConfigError, match="only valid in validate mode"):
        RunConfig.from_dict(master_config(checks=[1]))
    rc = RunConfig.from_dict({"mode": "validate", "checks": [1, 9]})
    assert rc.checks == [1, 9]
    assert rc.echo["checks"] == [1, 9]
    for bad in ([0], [10], ["3"], []):
        with pytest.raises(ConfigError, match="criterion numbers 1-9"):
            RunConfig.from_dict({"mode": "validate", "checks": bad})


def test_echo_is_portable():
    """The echo pins every resolved knob except where artifacts land, so a
    report's bytes do not depend on the output location."""
    rc = RunConfig.from_dict(trajectory_config(output="/tmp/elsewhere",
                                               n_traj=3, n_threads=2))
    assert "output" not in rc.echo
    assert str(rc.output) == "/tmp/elsewhere"
    for key in ("mode", "dt_ode", "T", "w_floor", "system", "pulse", "eta",
                "observables", "dt_sde", "seed", "n_traj", "n_threads",
                "tolerances"):
        assert key in rc.echo, key
    json.dumps(rc.echo)  # must be serializable as-is


def test_load_raw_and_load_config(tmp_path):
    with pytest.raises(ConfigError, match="config file not found"):
        load_raw(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{,}")
    with pytest.raises(ConfigError, match="parse error .* at line 1"):
        load_raw(bad)
    listy = tmp_path / "list.json"
    listy.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="must be a JSON object"):
        load_raw(listy)
    good = tmp_path / "run.json"
    good.write_text(json.dumps(master_config()))
    rc = load_config(good)
    assert rc.mode == "master"
    assert rc.system.dim == 2
