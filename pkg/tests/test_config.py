import json

import numpy as np
import pytest

from fchc import ParseError, ValidationError
from fchc.config import config_from_dict, load_config, parse_override
from fchc.io import write_field
from fchc.presets import PRESETS, load_preset, preset_dict

MINIMAL = {"domain": {"side_lengths": [1.0], "grid_points": [16]}, "time": {"horizon": 1.0, "steps": 8}}


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return path


def test_minimal_config_parses(tmp_path):
    cfg = load_config(write(tmp_path, MINIMAL))
    assert cfg.domain.shape == (16,)
    model = cfg.model()
    assert model.grid.steps == 8
    assert cfg.control().shape == (9, 16)
    assert cfg.y0().shape == (16,)


def test_tau_zero_cites_a3(tmp_path):
    with pytest.raises(ValidationError) as info:
        load_config(write(tmp_path, {**MINIMAL, "state": {"tau": 0.0}}))
    assert info.value.assumption == "A3"
    assert "(A3)" in str(info.value)


def test_negative_sigma_cites_a3():
    with pytest.raises(ValidationError) as info:
        config_from_dict({**MINIMAL, "operators": {"B": {"sigma": -0.1}}})
    assert info.value.assumption == "A3"


def test_vanishing_weights_cite_a6(tmp_path):
    data = {**MINIMAL, "cost": {"alpha1": 0.0, "alpha2": 0.0, "alpha3": 0.0}}
    with pytest.raises(ValidationError) as info:
        load_config(write(tmp_path, data))
    assert info.value.assumption == "A6"


def test_bad_rho_cites_a6():
    with pytest.raises(ValidationError) as info:
        config_from_dict({**MINIMAL, "admissible": {"rho1": 0.0}})
    assert info.value.assumption == "A6"


def test_log_parameters_cite_a4():
    with pytest.raises(ValidationError) as info:
        config_from_dict({**MINIMAL, "potential": {"kind": "logarithmic", "c1": 0.5}})
    assert info.value.assumption == "A4"


def test_initial_datum_outside_log_domain_cites_a5():
    data = {**MINIMAL, "potential": {"kind": "logarithmic"}, "y0": {"kind": "constant", "value": 1.0}}
    with pytest.raises(ValidationError) as info:
        config_from_dict(data)
    assert info.value.assumption == "A5"


def test_unknown_key_reports_line_and_field(tmp_path):
    data = {**MINIMAL, "state": {"tau": 1.0, "bogus": 3}}
    with pytest.raises(ParseError) as info:
        load_config(write(tmp_path, data))
    assert info.value.field == "state.bogus"
    text = (tmp_path / "cfg.json").read_text().splitlines()
    assert '"bogus"' in text[info.value.line - 1]


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "domain": {\n    "side_lengths": [1.0],,\n  }\n}\n')
    with pytest.raises(ParseError) as info:
        load_config(path)
    assert info.value.line == 3


def test_missing_required_section():
    with pytest.raises(ParseError):
        config_from_dict({"domain": MINIMAL["domain"]})


def test_wrong_type_rejected():
    with pytest.raises(ParseError) as info:
        config_from_dict({**MINIMAL, "time": {"horizon": 1.0, "steps": "many"}})
    assert info.value.field == "time.steps"


def test_missing_file():
    with pytest.raises(ParseError):
        load_config("/nonexistent/config.json")


def test_overrides():
    assert parse_override("state.tau=0.5") == (["state", "tau"], 0.5)
    assert parse_override("potential.kind=logarithmic") == (["potential", "kind"], "logarithmic")
    with pytest.raises(ParseError):
        parse_override("no-equals-sign")
    cfg = config_from_dict(MINIMAL, overrides=["state.tau=0.25", "time.steps=4", "seed=9"])
    assert cfg.state_config().tau == 0.25
    assert cfg.grid().steps == 4
    assert cfg.seed == 9
    with pytest.raises(ValidationError):
        config_from_dict(MINIMAL, overrides=["state.tau=-1"])


def test_config_hash_is_canonical():
    a = config_from_dict(MINIMAL)
    b = config_from_dict(json.loads(json.dumps(MINIMAL)))
    c = config_from_dict(MINIMAL, overrides=["seed=5"])
    assert a.config_hash == b.config_hash != c.config_hash


def test_mode_and_file_descriptors(tmp_path):
    field = np.linspace(-0.5, 0.5, 16)
    write_field(tmp_path / "y0.fchc", field, (16,))
    series = np.outer(np.arange(9.0), np.ones(16))
    write_field(tmp_path / "u.fchc", series, (16,))
    data = {
        **MINIMAL,
        "y0": {"kind": "file", "path": "y0.fchc"},
        "control": {"kind": "file", "path": "u.fchc"},
        "cost": {"y_omega": {"kind": "modes", "offset": 0.5, "terms": [[2, 1.0]]}},
    }
    cfg = load_config(write(tmp_path, data))
    np.testing.assert_array_equal(cfg.y0(), field)
    np.testing.assert_array_equal(cfg.control(), series)
    expected = 0.5 + cfg.basis_a.mode(1)
    np.testing.assert_allclose(cfg.cost().y_omega, expected, atol=1e-15)


def test_missing_referenced_file(tmp_path):
    data = {**MINIMAL, "y0": {"kind": "file", "path": "absent.fchc"}}
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, data))


def test_file_on_wrong_grid(tmp_path):
    write_field(tmp_path / "y0.fchc", np.zeros(8), (8,))
    data = {**MINIMAL, "y0": {"kind": "file", "path": "y0.fchc"}}
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, data))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_build(name):
    cfg = load_preset(name)
    model = cfg.model()
    assert model.domain.n_nodes == 64
    assert cfg.problem().shape == (129, 64)


def test_preset_contents():
    d = load_preset("example1_log").data
    assert d["potential"]["kind"] == "logarithmic"
    assert d["operators"]["B"] == {"bc": "neumann", "sigma": 0.5}
    assert load_preset("example3_growth").data["operators"]["B"]["bc"] == "dirichlet"
    with pytest.raises(KeyError):
        preset_dict("nope")
