import json

import pytest

from mmot.config import DEFAULT_GRID, RunConfig, SweepConfig, TrainConfig, config_from_dict, config_to_dict, load_config
from mmot.errors import ConfigError


def test_defaults_round_trip():
    cfg = RunConfig()
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_default_grids():
    sw = SweepConfig()
    assert tuple(sw.lambda_grid) == DEFAULT_GRID == (0.1, 0.25, 0.5, 0.75, 1.0)
    assert tuple(sw.alpha_grid) == DEFAULT_GRID
    assert TrainConfig().lam == 0.25


@pytest.mark.parametrize(
    "doc",
    [{"bogus": 1}, {"train": {"bogus": 1}}, {"train": {"alpha": -1}}, {"seed": "x"},
     {"train": {"labeler": "magic"}}, {"sweep": {"repeats": 0}}, {"sweep": {"lambda_grid": []}}, {"model": []}],
)
def test_rejects_bad_documents(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_lambda_alias():
    assert config_from_dict({"train": {"lambda": 0.5}}).train.lam == 0.5


def test_json_and_key_value_files_agree(tmp_path):
    doc = {"seed": 7, "train": {"alpha": 0.5, "lam": 0.1}, "sweep": {"lambda_grid": [0.1, 0.25]}}
    js = tmp_path / "c.json"
    js.write_text(json.dumps(doc))
    kv = tmp_path / "c.cfg"
    kv.write_text("# run\nseed = 7\ntrain.alpha = 0.5\ntrain.lambda = 0.1\nsweep.lambda_grid = [0.1, 0.25]\n")
    assert load_config(js) == load_config(kv)


def test_key_value_errors(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("train.alpha\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("a.b.c = 1\n")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")
