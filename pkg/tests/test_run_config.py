import glob
import os

import numpy as np
import pytest

from conftest import RECIPES
from errors import ConfigError
from models import Family
from run_config import RunConfig, load_config, parse_config, to_toml

PULSED = """
[model]
family = "two_level"
omega = 0.2

[pulse]
enabled = true
tau = 0.08
delta = 0.04
psi = 1.5

[run]
t_end = 1.0
initial_state = [[1.0, 0.0], [0.0, 1.0]]
"""


def test_defaults():
    cfg = parse_config("")
    assert cfg.model.family is Family.TWO_LEVEL
    assert cfg.run.frame == "rotating"
    assert cfg.analytic.coarsen is None
    assert not cfg.pq.enabled
    assert cfg.initial_state() is None
    assert cfg.model_spec().kappa == 1.0


def test_qutrit_coupling_defaults_to_root_two():
    cfg = parse_config('[model]\nfamily = "qutrit"\nomega = 1.0\n')
    assert cfg.model_spec().kappa == pytest.approx(np.sqrt(2.0))
    assert cfg.model_spec().dimension == 3


def test_unknown_key_is_reported_with_its_line():
    text = '[model]\nfamily = "qutrit"\ncolour = "red"\n'
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert len(info.value.messages) == 1
    assert info.value.messages[0].startswith("<string>:3: model.colour:")


def test_every_problem_is_reported():
    text = "[correlation]\nGamma = -1.0\ngamma = 0.0\n\n[run]\nn_traj = 1\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text, source="bad.cfg")
    messages = info.value.messages
    assert len(messages) == 3
    assert messages[0].startswith("bad.cfg:2: correlation.Gamma:")
    assert messages[1].startswith("bad.cfg:3: correlation.gamma:")
    assert messages[2].startswith("bad.cfg:6: run.n_traj:")


@pytest.mark.parametrize("text,where", [
    ('[model]\nfamily = "four_level"\n', "model.family"),
    ("[pulse]\nenabled = true\ntau = 0.04\ndelta = 0.08\n", "pulse"),
    ('[output]\nlabel = "a b"\n', "output.label"),
    ("[run]\ncheckpoints = [1.0, -2.0]\n", "run.checkpoints"),
    ('[run]\nframe = "interaction"\n', "run.frame"),
    ("[analytic]\ncoarsen = 0\n", "analytic.coarsen"),
])
def test_invalid_values(text, where):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert f": {where}:" in str(info.value)


def test_syntax_error_has_line_number():
    with pytest.raises(ConfigError) as info:
        parse_config("[model]\nomega = \n")
    assert info.value.messages[0].startswith("<string>:2: syntax:")


def test_initial_state_must_match_dimension():
    with pytest.raises(ConfigError) as info:
        parse_config('[model]\nfamily = "qutrit"\n[run]\ninitial_state = [1.0, 0.0]\n')
    assert "needs 3 amplitudes" in str(info.value)
    with pytest.raises(ConfigError):
        parse_config("[run]\ninitial_state = [0.0, 0.0]\n")


def test_complex_amplitudes_are_normalised():
    cfg = parse_config(PULSED)
    assert cfg.initial_state() == pytest.approx(np.array([1.0, 1.0j]) / np.sqrt(2.0))


def test_pulsed_grid_is_aligned():
    cfg = parse_config(PULSED)
    grid = cfg.grid()
    assert grid.t_end == 1.0
    for edge in cfg.pulse_train().edges(1.0):
        grid.index_of(edge)


def test_toml_text_parses_back_to_the_same_config():
    cfg = parse_config(PULSED)
    again = parse_config(to_toml(cfg))
    assert again == cfg
    assert "directory" not in to_toml(cfg)


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(RECIPES, "*.cfg"))),
                         ids=os.path.basename)
def test_recipes_load(path):
    cfg = load_config(path)
    assert isinstance(cfg, RunConfig)
    cfg.grid()


def test_missing_file():
    with pytest.raises(ConfigError) as info:
        load_config("does/not/exist.cfg")
    assert ":0: cannot read configuration" in str(info.value)


def test_with_value_sets_one_axis():
    cfg = parse_config(PULSED)
    assert cfg.with_value("tau_over_delta", 3).pulse.tau == pytest.approx(0.12)
    assert cfg.with_value("gamma", 2).correlation.gamma == 2.0
    assert cfg.with_value("psi", 4).pulse.psi == 4.0
    assert cfg.pulse.tau == 0.08
    multi = parse_config('[model]\nfamily = "multi_level"\nN = 3\n')
    assert multi.with_value("N", 7.0).model.N == 7
    with pytest.raises(ConfigError):
        cfg.with_value("omega", 1.0)


def test_sweep_section_lists_axes():
    cfg = parse_config("[sweep]\ngamma = [0.2, 2.0]\npsi = [1.0]\n")
    assert cfg.sweep.axes() == {"gamma": [0.2, 2.0], "psi": [1.0]}
    assert parse_config("").sweep.axes() == {}
