"""Dataset serialization: directory with x.csv, z.csv, events.csv, meta.json."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError
from .grid import CountingRecord, PathMatrix, TimeGrid
from .sim import DgpConfig, Rho0Spec, SimulatedDataset


@dataclass(frozen=True)
class Dataset:
    """Observed processes as loaded from disk (no simulator internals)."""

    x: PathMatrix
    z: PathMatrix
    record: CountingRecord
    meta: dict

    @property
    def n(self) -> int:
        return self.x.n

    @property
    def grid(self) -> TimeGrid:
        return self.x.grid


def _write_matrix(path, grid: TimeGrid, values: np.ndarray):
    header = ",".join(f"{t:.17g}" for t in grid.points)
    np.savetxt(path, values, delimiter=",", header=header, comments="", fmt="%.17g")


def _read_matrix(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    grid = TimeGrid(len(header))
    return grid, values


def config_to_meta(cfg: DgpConfig) -> dict:
    meta = asdict(cfg)
    meta["rho0"] = cfg.rho0.label()
    return meta


def meta_to_config(meta: dict) -> DgpConfig:
    meta = dict(meta)
    meta["rho0"] = Rho0Spec.parse(meta.get("rho0", "none"))
    return DgpConfig(**meta)


def save_dataset(ds: SimulatedDataset, out_dir: str):
    """Write the observed part of a simulated dataset to a directory."""
    os.makedirs(out_dir, exist_ok=True)
    _write_matrix(os.path.join(out_dir, "x.csv"), ds.grid, ds.x.values)
    _write_matrix(os.path.join(out_dir, "z.csv"), ds.grid, ds.z.values)
    event_index = ds.record.event_index
    with open(os.path.join(out_dir, "events.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject", "event_index", "censored"])
        for j in range(ds.n):
            e = int(event_index[j])
            writer.writerow([j, e if e >= 0 else "", int(e < 0)])
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(config_to_meta(ds.config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(in_dir: str) -> Dataset:
    """Load a dataset directory written by :func:`save_dataset`."""
    for name in ("x.csv", "z.csv", "events.csv", "meta.json"):
        if not os.path.exists(os.path.join(in_dir, name)):
            raise InputError(f"dataset directory is missing {name}")
    grid, xv = _read_matrix(os.path.join(in_dir, "x.csv"))
    grid_z, zv = _read_matrix(os.path.join(in_dir, "z.csv"))
    if grid_z.q != grid.q or xv.shape != zv.shape:
        raise InputError("x.csv and z.csv shapes disagree")
    n = xv.shape[0]
    event_index = np.full(n, -1, dtype=np.int64)
    with open(os.path.join(in_dir, "events.csv")) as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            j = int(row["subject"])
            if not 0 <= j < n:
                raise InputError(f"events.csv subject {j} out of range")
            if int(row["censored"]) == 0:
                event_index[j] = int(row["event_index"])
    with open(os.path.join(in_dir, "meta.json")) as fh:
        meta = json.load(fh)
    record = CountingRecord.from_survival(grid, event_index)
    return Dataset(PathMatrix(grid, xv), PathMatrix(grid, zv), record, meta)
