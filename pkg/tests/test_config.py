import copy
import json

import pytest

from qpmomentum import config
from qpmomentum.quasilattice import SchemaError


def sample():
    return json.loads(config.sample_config_text())


def test_sample_parses():
    cfg = config.sample_config()
    assert cfg.potential.coupling == 0.05 and cfg.potential.l == 2
    assert cfg.schedule.radii(3) == (4, 2)
    assert cfg.thresholds.delta_exponent == 0.5
    assert cfg.seed is not None and cfg.phi_resolution >= 1024
    assert cfg.lambdas == (81.0, 256.0, 625.0)


def test_hash_stable_under_reserialization():
    data = sample()
    cfg = config.parse(data)
    again = config.parse(json.loads(json.dumps(cfg.normalized, indent=3)))
    assert cfg.config_hash() == again.config_hash()
    shuffled = json.loads(json.dumps(dict(reversed(list(data.items())))))
    assert config.parse(shuffled).config_hash() == cfg.config_hash()


def test_hash_changes_with_content():
    data = sample()
    data["seed"] += 1
    assert config.parse(data).config_hash() != config.sample_config().config_hash()


def test_defaults_fill_normalized_form():
    data = sample()
    del data["fraction"]
    cfg = config.parse(data)
    assert cfg.normalized["fraction"]["samples"] == 1000


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra=1),
    lambda d: d["thresholds"].update(delta=1),
    lambda d: d.update(lambdas="81"),
    lambda d: d.update(k=[[1.0]]),
    lambda d: d["schedule"].update(R1=1.5),
    lambda d: d.pop("potential"),
    lambda d: d["grids"]["spatial"].update(convention=2),
])
def test_schema_errors(mutate):
    data = sample()
    mutate(data)
    with pytest.raises(SchemaError):
        config.parse(data)


def test_semantic_problems_are_collected():
    data = sample()
    data["potential"]["coefficients"].append({"s1": [2, 0], "s2": [1, 0], "re": 1.0})
    data["thresholds"]["eta"] = 2.0
    data["grids"]["phi_resolution"] = 100
    with pytest.raises(config.ConfigInvalid) as exc:
        config.parse(data)
    msgs = exc.value.problems
    assert any("cutoff exceeded" in m and "(2, 0)" in m for m in msgs)
    assert any("eta" in m for m in msgs)
    assert any("phi_resolution" in m for m in msgs)


def test_lambda_floor_enforced():
    data = sample()
    data["lambdas"] = [4.0]
    with pytest.raises(config.ConfigInvalid, match="lambda_floor"):
        config.parse(data)


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        config.load(p)


def test_kgrid_points():
    g = config.KGrid(0.0, 1.0, 2.0, 3.0, 3)
    pts = g.points()
    assert len(pts) == 9 and pts[0] == (0.0, 2.0) and pts[-1] == (1.0, 3.0)


def test_sample_is_not_mutated_by_parse():
    data = sample()
    before = copy.deepcopy(data)
    config.parse(data)
    assert data == before
