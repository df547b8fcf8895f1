import json

import pytest

from torusflow.config import ExperimentConfig, override, parse_config, serialize_config, to_dict
from torusflow.errors import ConfigInvalid, ConfigSyntax, ResolutionTooCoarse
from torusflow.fields import GridSpec
from torusflow.skeleton import build_skeleton, calibrate_width


def test_minimal_config_defaults():
    cfg = parse_config('{"i_list":[2],"n":256,"t_end":1.0}')
    assert cfg.scheme == "imex" and cfg.stencil_radius == 2 and cfg.t_star == 0.2
    assert (cfg.points_kind, cfg.points_count, cfg.seed) == ("halton", 64, 7)
    assert cfg.emit_snapshots is False and cfg.n_for(2) == 256
    assert cfg.scheme_config().target_dt(1 / 256) == 1 / 1024


@pytest.mark.parametrize("i,n", [(2, 64), (3, 64), (3, 128), (3, 256), (4, 128)])
def test_feasibility_matches_calibration_dry_run(i, n):
    try:
        calibrate_width(GridSpec(n), i, build_skeleton(i))
        feasible = True
    except ResolutionTooCoarse:
        feasible = False
    text = json.dumps({"i_list": [i], "n": n})
    if feasible:
        assert parse_config(text).i_list == [i]
    else:
        with pytest.raises(ConfigInvalid, match=r"^n: "):
            parse_config(text)


def test_round_trip_is_identity():
    text = json.dumps({"i_list": [1, 2, 3], "n": {"1": 128, "2": 256, "3": 256}, "t_end": 0.5,
                       "scheme": "rk4", "points_kind": "explicit", "points": [[0.1, 0.2], [0.3, 0.4]]})
    cfg = parse_config(text, check_feasibility=False)
    again = parse_config(serialize_config(cfg), check_feasibility=False)
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)
    assert to_dict(cfg)["n"] == {"1": 128, "2": 256, "3": 256}


@pytest.mark.parametrize("text,field", [
    ('{"i_list":[2],"n":256,"tstar":0.1}', "tstar"),
    ('{"n":256}', "i_list"),
    ('{"i_list":[2]}', "n"),
    ('{"i_list":[],"n":256}', "i_list"),
    ('{"i_list":[0],"n":256}', "i_list"),
    ('{"i_list":[2],"n":100}', "n"),
    ('{"i_list":[2,3],"n":{"2":256}}', "n"),
    ('{"i_list":[2],"n":256,"scheme":"euler"}', "scheme"),
    ('{"i_list":[2],"n":256,"t_star":2.0}', "t_star"),
    ('{"i_list":[2],"n":256,"cfl":0}', "cfl"),
    ('{"i_list":[2],"n":256,"stencil_radius":5}', "stencil_radius"),
    ('{"i_list":[2],"n":256,"emit_snapshots":1}', "emit_snapshots"),
    ('{"i_list":[2],"n":256,"points_kind":"explicit"}', "points"),
])
def test_invalid_configs_name_the_field(text, field):
    with pytest.raises(ConfigInvalid, match=rf"^{field}\b"):
        parse_config(text, check_feasibility=False)


def test_syntax_error():
    with pytest.raises(ConfigSyntax):
        parse_config('{"i_list": [2], "n": 256,,}')
    with pytest.raises(ConfigInvalid):
        parse_config("[1, 2]")


def test_override_revalidates():
    cfg = ExperimentConfig(i_list=[2], n=128)
    assert override(cfg, check_feasibility=False, scheme=None, t_end=0.5).t_end == 0.5
    with pytest.raises(ConfigInvalid):
        override(cfg, check_feasibility=False, scheme="bogus")
