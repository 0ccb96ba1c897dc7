"""CSV and JSON artifacts.

CSV files follow RFC 4180 (comma separated, CRLF line ends, header row) and
print numbers with 12 significant digits, so reruns with the same inputs are
byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from . import __version__
from .errors import InvalidParameter
from .fock import KtcsParams, TrioState

__all__ = [
    "format_number", "write_csv", "read_csv", "FigureTable", "RunManifest",
    "dump_state", "load_state", "write_qgrid",
]

PathLike = Union[str, Path]


def format_number(x) -> str:
    """12 significant digits; integers stay integers."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    out = f"{x:.12g}"
    return "0" if out == "-0" else out


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
    return path


def read_csv(path: PathLike):
    """Header and float rows of a file written by :func:`write_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows)


@dataclass
class FigureTable:
    """Named columns plus free-form tags, written as one CSV."""

    name: str
    columns: dict
    tags: dict = field(default_factory=dict)

    def write(self, directory: PathLike) -> Path:
        header = list(self.columns)
        cols = [np.asarray(self.columns[h]) for h in header]
        lengths = {len(c) for c in cols}
        if len(lengths) != 1:
            raise InvalidParameter(f"columns of {self.name} differ in length: {lengths}")
        return write_csv(Path(directory) / f"{self.name}.csv", header, zip(*cols))


@dataclass
class RunManifest:
    """Record of one command: parameters, seed, outputs and wall time."""

    command: str
    params: dict
    seed: Optional[int] = None
    outputs: List[str] = field(default_factory=list)
    version: str = __version__
    wall_time: float = 0.0
    _start: float = field(default_factory=time.perf_counter, repr=False)

    def add(self, path: PathLike) -> None:
        self.outputs.append(str(path))

    def finish(self) -> "RunManifest":
        self.wall_time = time.perf_counter() - self._start
        return self

    def to_dict(self) -> dict:
        return {"command": self.command, "params": self.params, "version": self.version,
                "seed": self.seed, "outputs": self.outputs, "wall_time_s": self.wall_time}

    def write(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable))
        return path


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_state(state: TrioState, path: PathLike) -> Path:
    """Write ``{K, j, p, q, xi: [re, im], n_max, amplitudes: [[re, im], ...]}``."""
    params = state.params
    data = {
        "K": params.K if params else None,
        "j": params.j if params else None,
        "p": state.p,
        "q": state.q,
        "xi": [params.xi.real, params.xi.imag] if params else None,
        "n_max": state.n_max,
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1))
    return path


def load_state(path: PathLike) -> TrioState:
    data = json.loads(Path(path).read_text())
    amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
    params = None
    if data.get("K") is not None:
        params = KtcsParams.from_xi(complex(*data["xi"]), data["p"], data["q"], data["K"], data["j"])
    return TrioState(amps, data["p"], data["q"], params)


def write_qgrid(grid, path: PathLike) -> List[Path]:
    """Q values as a CSV matrix (rows = y, columns = x) with a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        for row in grid.values:
            writer.writerow([format_number(v) for v in row])
    meta = dict(grid.meta)
    meta.update({"x_range": list(grid.x_range), "y_range": list(grid.y_range),
                 "nx": grid.nx, "ny": grid.ny, "rows": "y", "columns": "x"})
    side = path.with_suffix(".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return [path, side]
