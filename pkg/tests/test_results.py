import numpy as np
import pandas as pd
import pytest

import analytic
from models import solve_coefficients
from qsd import ensemble_fidelity
from results import (COLUMNS, EXTRA_COLUMNS, build_table, checkpoint_fidelities, read_result_table, table_path,
                     write_plot_script, write_sweep_summary)
from run_config import parse_config

SMALL = """
[model]
family = "two_level"
omega = 0.2

[correlation]
Gamma = 1.0
gamma = 0.5

[run]
t_end = 0.2
dt = 0.01
n_traj = 6
master_seed = 11
checkpoints = [0.1, 0.2]

[output]
label = "small"
"""


def _table(text=SMALL, with_analytic=True):
    cfg = parse_config(text)
    coeffs = solve_coefficients(cfg.model_spec(), cfg.correlation_spec(), cfg.pulse_train(), cfg.grid())
    curve = ensemble_fidelity(cfg.model_spec(), coeffs, cfg.run.n_traj, cfg.run.master_seed, threads=1)
    exact = analytic.evaluate(coeffs) if with_analytic else None
    return build_table(cfg, curve, exact)


def test_table_columns():
    table = _table()
    assert list(table.frame.columns) == COLUMNS + EXTRA_COLUMNS[:2]
    assert table.frame["fidelity_mc"].iloc[0] == pytest.approx(1.0)
    assert table.frame["fidelity_analytic"].iloc[0] == pytest.approx(1.0)
    assert (table.frame["n_traj"] == 6).all()


def test_written_table_reads_back(tmp_path):
    table = _table()
    path = table.write(table_path(tmp_path, table.label))
    assert path.endswith("small.csv")
    back = read_result_table(path)
    assert back.config == table.config
    assert back.master_seed == 11
    assert back.divergent_count == 0
    assert list(back.frame.columns) == list(table.frame.columns)
    assert np.allclose(back.frame.to_numpy(dtype=float), table.frame.to_numpy(dtype=float), rtol=1e-8)


def test_rewriting_a_read_table_gives_identical_bytes(tmp_path):
    first = _table().write(tmp_path / "a.csv")
    second = read_result_table(first).write(tmp_path / "b.csv")
    with open(first, "rb") as a, open(second, "rb") as b:
        assert a.read() == b.read()


def test_header_embeds_configuration(tmp_path):
    path = _table().write(tmp_path / "run.csv")
    with open(path, encoding="utf-8") as f:
        text = f.read()
    assert "# master_seed: 11" in text
    assert "# [correlation]" in text
    assert "# gamma = 0.5" in text


def test_missing_analytic_column_is_empty(tmp_path):
    table = _table(with_analytic=False)
    assert table.frame["fidelity_analytic"].isna().all()
    back = read_result_table(table.write(tmp_path / "mc.csv"))
    assert back.frame["fidelity_analytic"].isna().all()
    assert "F_analytic(t=0.1)" not in checkpoint_fidelities(back, [0.1])


def test_pq_population_columns():
    table = _table(SMALL + "\n[pq]\nenabled = true\n")
    assert list(table.frame.columns) == COLUMNS + EXTRA_COLUMNS
    assert table.frame["p_population_mc"].iloc[0] == pytest.approx(0.5)


def test_plot_script(tmp_path):
    csv_path = _table().write(tmp_path / "small.csv")
    plot_path = write_plot_script(csv_path)
    assert plot_path.endswith("small.gp")
    with open(plot_path, encoding="utf-8") as f:
        script = f.read()
    assert "plot 'small.csv'" in script
    assert "set output 'small.png'" in script


def test_sweep_summary(tmp_path):
    table = _table()
    path = table.write(tmp_path / "small.csv")
    rows = [({"gamma": 0.5}, table, path), ({"gamma": 0.5}, table, path)]
    frame = write_sweep_summary(rows, tmp_path / "summary.csv")
    assert list(frame.columns) == ["gamma", "master_seed", "table", "F_mc(t=0.1)", "F_analytic(t=0.1)",
                                   "F_mc(t=0.2)", "F_analytic(t=0.2)"]
    assert len(frame) == 2
    on_disk = pd.read_csv(tmp_path / "summary.csv", comment="#")
    assert on_disk["table"].tolist() == ["small.csv", "small.csv"]
    assert on_disk["F_mc(t=0.2)"].iloc[0] == pytest.approx(table.value_at(0.2), rel=1e-8)
