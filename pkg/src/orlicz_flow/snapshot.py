"""Lossless text snapshots of a flow state.

Floats are written with ``float.hex`` so a save/load round trip is bit exact.
The file ends with an ``end`` line; anything missing it is treated as
truncated.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import SnapshotError
from .flow import FlowState
from .geometry import SupportField, make_grid

MAGIC = "orlicz-flow-snapshot"
VERSION = 1


@dataclass(frozen=True)
class Snapshot:
    version: int
    state: FlowState
    config: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.state.field.grid.N


def save_snapshot(state: FlowState, path, config=None):
    lines = [
        f"{MAGIC} {VERSION}",
        f"N {state.field.grid.N}",
        f"t {float(state.t).hex()}",
        f"step_index {state.step_index}",
        f"eta {float(state.eta).hex()}",
        f"last_dt {float(state.last_dt).hex()}",
        f"config {json.dumps(config or {}, sort_keys=True)}",
        "h",
    ]
    lines += [float(x).hex() for x in state.field.h]
    lines.append("end")
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def _field(lines, i, name):
    try:
        key, value = lines[i].split(" ", 1)
    except (IndexError, ValueError):
        raise SnapshotError(f"corrupt snapshot: expected '{name}' at line {i + 1}") from None
    if key != name:
        raise SnapshotError(f"corrupt snapshot: expected '{name}' at line {i + 1}, found {key!r}")
    return value


def load_snapshot(path) -> Snapshot:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(MAGIC + " "):
        raise SnapshotError(f"{path}: not a snapshot file")
    try:
        version = int(lines[0].split()[1])
    except ValueError:
        raise SnapshotError(f"{path}: unreadable version") from None
    if version != VERSION:
        raise SnapshotError(f"{path}: snapshot version {version} unsupported (expected {VERSION})")
    try:
        N = int(_field(lines, 1, "N"))
        t = float.fromhex(_field(lines, 2, "t"))
        step_index = int(_field(lines, 3, "step_index"))
        eta = float.fromhex(_field(lines, 4, "eta"))
        last_dt = float.fromhex(_field(lines, 5, "last_dt"))
        config = json.loads(_field(lines, 6, "config"))
        if lines[7] != "h":
            raise SnapshotError(f"{path}: corrupt snapshot, missing sample block")
        body = lines[8:]
        if len(body) != N + 1 or body[-1] != "end":
            raise SnapshotError(f"{path}: truncated snapshot ({len(body) - 1} of {N} samples)")
        h = np.array([float.fromhex(x) for x in body[:-1]])
        grid = make_grid(N)
    except SnapshotError:
        raise
    except (ValueError, IndexError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"{path}: corrupt snapshot ({exc})") from None
    state = FlowState(t=t, step_index=step_index, field=SupportField(grid, h), eta=eta, last_dt=last_dt)
    return Snapshot(version=version, state=state, config=config)
