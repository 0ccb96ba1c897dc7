"""Data behind the twelve figures, driven by the bundled recipe file.

Each recipe in ``data/figures.json`` names a ``kind`` and its parameters;
:func:`run_figure` dispatches on the kind and writes CSV/JSON files into a
directory.  Nothing is plotted.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import InvalidParameter
from .fock import KtcsParams
from .io import FigureTable, write_csv, write_qgrid
from .iontrap import SimConfig, evolve_density, mcwf_run
from .phase_space import count_peaks, fringe_minimum, q_slice
from .statistics import csi_measures, mandel, number_distribution

__all__ = ["load_recipes", "run_figure", "series_label"]


def load_recipes() -> Dict[str, dict]:
    text = resources.files("ktcs").joinpath("data/figures.json").read_text()
    return json.loads(text)


def series_label(s: dict) -> str:
    return f"K{s['K']}_j{s['j']}_p{s['p']}_q{s['q']}"


def _z_grid(r: dict) -> np.ndarray:
    return np.linspace(r["z_min"], r["z_max"], int(r["steps"]))


def _numdist(r, out: Path):
    cols = {"n": np.arange(r["n_max"] + 1)}
    for K, j in r["states"]:
        params = KtcsParams(r["xi"], 0.0, r["p"], r["q"], K, j)
        cols[f"P_K{K}_j{j}"] = number_distribution(params, cols["n"])
    return [FigureTable("numdist", cols).write(out)], {}


def _mandel(r, out: Path):
    z = _z_grid(r)
    panels = r.get("panels") or {"": r["series"]}
    paths = []
    for name, series in panels.items():
        cols = {"z": z}
        for s in series:
            params = KtcsParams(1.0, 0.0, s["p"], s["q"], s["K"], s["j"])
            vals = [mandel(params, zz) for zz in z]
            for mode in r["modes"]:
                cols[f"M{mode}_{series_label(s)}"] = [m[mode] for m in vals]
        table = "mandel" + (f"_{name}" if name else "")
        paths.append(FigureTable(table, cols).write(out))
    return paths, {}


def _csi(r, out: Path):
    z = _z_grid(r)
    cols = {"z": z}
    flagged = {}
    for s in r["series"]:
        params = KtcsParams(1.0, 0.0, s["p"], s["q"], s["K"], s["j"])
        vals = [csi_measures(params, zz) for zz in z]
        for pair in r["pairs"]:
            cols[f"G{pair}_{series_label(s)}"] = [v.G[pair] for v in vals]
        bad = sorted({p for v in vals for p in v.flagged})
        if bad:
            flagged[series_label(s)] = bad
    return [FigureTable("csi", cols).write(out)], {"printed_formula_flags": flagged}


def _qfunc(r, out: Path):
    paths, summary = [], {}
    for j in r["j"]:
        params = KtcsParams(r["xi"], 0.0, r["p"], r["q"], r["K"], j)
        grid = q_slice(params, nx=r["n"], half_width=r["half_width"])
        paths += write_qgrid(grid, out / f"q_K{r['K']}_j{j}.csv")
        fm = fringe_minimum(params)
        summary[f"j{j}"] = {"peaks": count_peaks(grid), "max": float(grid.values.max()),
                            "min": float(grid.values.min()),
                            "fringe_min_relative": fm.value,
                            "fringe_zero_interior": fm.interior}
    return paths, summary


def _sim_config(run: dict, r: dict, w: float, n_traj: Optional[int], record: float) -> SimConfig:
    data = {k: v for k, v in run.items() if k not in ("panel", "curve")}
    data.update({"w": w, "dt_gamma": r["dt_gamma"], "t_max_gamma": r["t_max_gamma"],
                 "n_traj": n_traj or r["n_traj"], "seed": r["seed"],
                 "record_every_gamma": record})
    return SimConfig.from_json(data)


def _phonon(r, out: Path, n_traj=None):
    paths, summary = [], {}
    for run in r["runs"]:
        cfg = _sim_config(run, r, run["w"], n_traj, 1.0)
        res = mcwf_run(cfg)
        n = np.arange(2 * cfg.M)
        ref = sum(wt * number_distribution(cfg.target(j), n)
                  for j, wt in enumerate(cfg.sector_weights()))
        for t in r["snapshots_gamma_t"]:
            pi, err = res.snapshot(t / cfg.gamma)
            name = f"phonon_{run['panel']}_t{t:g}.csv"
            paths.append(write_csv(out / name, ["n", "Pi_n", "Pi_n_err", "P_n_target"],
                                   zip(n, pi, err, ref)))
        last = res.phonon[-1]
        summary[run["panel"]] = {"w": cfg.w, "m_max": cfg.m_max,
                                 "even_weight": float(last[0::2].sum()),
                                 "odd_weight": float(last[1::2].sum())}
    return paths, summary


def _fidelity(r, out: Path, n_traj=None):
    paths, summary = [], {}
    for curve in r["curves"]:
        runs = {}
        for j in (0, 1):
            cfg = _sim_config(curve, r, float(j), n_traj, r["record_every_gamma"])
            runs[j] = (mcwf_run(cfg), evolve_density(cfg, method="exact"))
        m0, d0 = runs[0]
        m1, d1 = runs[1]
        cols = ["gamma_t", "F0", "F1", "F0_err", "F1_err", "F0_oracle", "F1_oracle"]
        rows = zip(m0.times * cfg.gamma, m0.fidelity[:, 0], m1.fidelity[:, 1],
                   m0.fidelity_err[:, 0], m1.fidelity_err[:, 1],
                   d0.fidelity[:, 0], d1.fidelity[:, 1])
        paths.append(write_csv(out / f"fidelity_curve{curve['curve']}.csv", cols, rows))
        summary[f"curve{curve['curve']}"] = {
            "final_1_minus_F0_oracle": float(1 - d0.fidelity[-1, 0]),
            "final_1_minus_F1_oracle": float(1 - d1.fidelity[-1, 1]),
        }
    return paths, summary


_KINDS = {"numdist": _numdist, "mandel": _mandel, "csi": _csi, "qfunc": _qfunc,
          "phonon": _phonon, "fidelity": _fidelity}


def run_figure(number: int, out_dir, n_traj: Optional[int] = None) -> Tuple[List[Path], dict]:
    """Compute the data of figure ``number`` and write it into ``out_dir``.

    Returns the written paths and a small summary dictionary.  ``n_traj``
    overrides the trajectory count of the stochastic figures.
    """
    recipes = load_recipes()
    key = str(number)
    if key not in recipes:
        raise InvalidParameter(f"no recipe for figure {number}; choose 1..{len(recipes)}")
    recipe = recipes[key]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fn = _KINDS[recipe["kind"]]
    if recipe["kind"] in ("phonon", "fidelity"):
        paths, summary = fn(recipe, out, n_traj)
    else:
        paths, summary = fn(recipe, out)
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps({"figure": number, "title": recipe["title"], **summary},
                                       indent=2, sort_keys=True))
    return paths + [summary_path], summary
