"""
Result tables: CSV files with a '#' metadata header that embeds the whole
run configuration, so every table can be reproduced from its own header.
"""
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

import config
from logger import get_logger
from run_config import RunConfig, parse_config, to_toml

COLUMNS = ["t", "fidelity_mc", "stderr_mc", "fidelity_analytic", "n_traj", "divergent_count"]
EXTRA_COLUMNS = ["norm_mc", "norm_stderr", "p_population_mc", "p_population_stderr"]

CONFIG_BEGIN = "# config:"
CONFIG_END = "# end config"


@dataclass(eq=False)
class ResultTable:
    frame: pd.DataFrame
    config: RunConfig
    master_seed: int
    divergent_count: int = 0
    version: str = config.ARTIFACT_VERSION

    @property
    def label(self):
        return self.config.output.label

    def header_lines(self):
        lines = [
            "# pq-diffusion result table",
            f"# artifact_version: {self.version}",
            f"# label: {self.label}",
            f"# master_seed: {self.master_seed}",
            f"# divergent_count: {self.divergent_count}",
            CONFIG_BEGIN,
        ]
        lines.extend(f"# {line}" if line else "#" for line in to_toml(self.config).splitlines())
        lines.append(CONFIG_END)
        return lines

    def write(self, path):
        """Write header and body; identical tables give byte-identical files"""
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write("\n".join(self.header_lines()) + "\n")
            self.frame.to_csv(f, index=False, float_format=f"%.{config.CSV_SIGNIFICANT_DIGITS}g",
                              lineterminator="\n")
        return path

    def value_at(self, t, column="fidelity_mc"):
        """Column value at time t (linear interpolation)"""
        return float(np.interp(t, self.frame["t"].to_numpy(), self.frame[column].to_numpy()))


def build_table(cfg: RunConfig, curve, analytic=None):
    """
    Combine a Monte-Carlo FidelityCurve and an optional analytic curve (any
    grid; interpolated to the Monte-Carlo sample times) into a ResultTable.
    """
    t = curve.grid.points
    data = {
        "t": t,
        "fidelity_mc": curve.mean,
        "stderr_mc": curve.stderr,
        "fidelity_analytic": (np.interp(t, analytic.grid.points, analytic.mean)
                              if analytic is not None else np.full(t.size, np.nan)),
        "n_traj": np.full(t.size, curve.n_traj, dtype=int),
        "divergent_count": np.full(t.size, curve.divergent, dtype=int),
    }
    frame = pd.DataFrame(data, columns=COLUMNS)
    if curve.norm_mean is not None:
        frame["norm_mc"] = curve.norm_mean
        frame["norm_stderr"] = curve.norm_stderr
    if cfg.pq.enabled and curve.population_mean is not None:
        frame["p_population_mc"] = curve.population_mean
        frame["p_population_stderr"] = curve.population_stderr
    return ResultTable(frame, cfg, cfg.run.master_seed, curve.divergent)


def read_result_table(path):
    """Parse a result file back into a ResultTable (configuration included)"""
    meta = {}
    config_lines = []
    inside = False
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.startswith("#"):
                break
            if line == CONFIG_BEGIN:
                inside = True
            elif line == CONFIG_END:
                inside = False
            elif inside:
                config_lines.append(line[2:] if line.startswith("# ") else "")
            elif ":" in line:
                key, value = line[1:].split(":", 1)
                meta[key.strip()] = value.strip()
    cfg = parse_config("\n".join(config_lines), source=f"{path} (header)")
    frame = pd.read_csv(path, comment="#")
    return ResultTable(frame, cfg, int(meta.get("master_seed", cfg.run.master_seed)),
                       int(meta.get("divergent_count", 0)), meta.get("artifact_version", config.ARTIFACT_VERSION))


def table_path(directory, label, suffix=""):
    return os.path.join(directory, f"{label}{suffix}.csv")


def write_plot_script(csv_path, plot_path=None, title=None):
    """gnuplot script rendering fidelity against Gamma t for one result table"""
    plot_path = plot_path or os.path.splitext(csv_path)[0] + ".gp"
    title = title or os.path.splitext(os.path.basename(csv_path))[0]
    data = os.path.basename(csv_path)
    image = os.path.splitext(data)[0] + ".png"
    script = "\n".join([
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 800,600",
        f"set output '{image}'",
        f"set title '{title}'",
        "set xlabel 'Gamma t'",
        "set ylabel 'fidelity'",
        "set yrange [0:1.05]",
        f"plot '{data}' using 1:2:3 with yerrorlines title 'Monte Carlo', \\",
        f"     '{data}' using 1:4 with lines lw 2 title 'analytic'",
        "",
    ])
    with open(plot_path, "w", encoding="utf-8", newline="") as f:
        f.write(script)
    return plot_path


def checkpoint_fidelities(table: ResultTable, times):
    """{'F(t=...)': value} for the Monte-Carlo and analytic columns"""
    out = {}
    for t in times:
        out[f"F_mc(t={t:g})"] = table.value_at(t, "fidelity_mc")
        if table.frame["fidelity_analytic"].notna().any():
            out[f"F_analytic(t={t:g})"] = table.value_at(t, "fidelity_analytic")
    return out


def write_sweep_summary(rows, path, checkpoints: Optional[list] = None):
    """
    One row per sweep point: its axis values, master seed, table file and
    fidelity at the checkpoint times.

    Args:
        rows: list of (axis_values dict, ResultTable, table file path)
        path: summary CSV path
        checkpoints: checkpoint times (defaults to each table's run.checkpoints or t_end)
    """
    records = []
    for values, table, file_path in rows:
        times = checkpoints or table.config.run.checkpoints or [table.config.run.t_end]
        record = dict(values)
        record["master_seed"] = table.master_seed
        record["table"] = os.path.basename(file_path)
        record.update(checkpoint_fidelities(table, times))
        records.append(record)
    frame = pd.DataFrame.from_records(records)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# pq-diffusion sweep summary\n# artifact_version: {config.ARTIFACT_VERSION}\n")
        frame.to_csv(f, index=False, float_format=f"%.{config.CSV_SIGNIFICANT_DIGITS}g", lineterminator="\n")
    get_logger().info(f"Sweep summary written: {path}")
    return frame
