"""Deterministic artifact emission: CSV and JSON writers.

Every file starts with (or contains) a schema version; floats are written
with 17 significant digits so values round-trip exactly; JSON uses sorted
keys.  No timestamps or wall-clock data are written, so identical inputs
produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

__all__ = [
    "fmt_float",
    "write_trajectory_csv",
    "write_jet_csv",
    "write_moments_csv",
    "write_json",
]

SCHEMAS = {
    "trajectory": "flockuq.trajectory.v1",
    "jets": "flockuq.jets.v1",
    "moments": "flockuq.moments.v1",
    "flocking": "flockuq.flocking.v1",
    "stability": "flockuq.stability.v1",
    "gronwall": "flockuq.gronwall.v1",
    "fd": "flockuq.fd_check.v1",
    "verify": "flockuq.verify_all.v1",
}


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _open_out(path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="\n")


def write_trajectory_csv(path, traj) -> None:
    """Rows (t, agent, comp, x, v), one per time/agent/component."""
    with _open_out(path) as fh:
        fh.write(f"# schema: {SCHEMAS['trajectory']}\n")
        fh.write("t,agent,comp,x,v\n")
        K, N, d = traj.X.shape
        for k in range(K):
            t = fmt_float(traj.times[k])
            for i in range(N):
                for c in range(d):
                    fh.write(f"{t},{i},{c},{fmt_float(traj.X[k, i, c])},{fmt_float(traj.V[k, i, c])}\n")


def write_jet_csv(path, jet_traj) -> None:
    """Rows (t, order, agent, comp, dx, dv) for every saved jet coefficient."""
    with _open_out(path) as fh:
        fh.write(f"# schema: {SCHEMAS['jets']}\n")
        fh.write("t,order,agent,comp,dx,dv\n")
        K, N, d, M1 = jet_traj.Xj.shape
        for k in range(K):
            t = fmt_float(jet_traj.times[k])
            for order in range(M1):
                for i in range(N):
                    for c in range(d):
                        fh.write(
                            f"{t},{order},{i},{c},"
                            f"{fmt_float(jet_traj.Xj[k, i, c, order])},{fmt_float(jet_traj.Vj[k, i, c, order])}\n"
                        )


def write_moments_csv(path, times, rows) -> None:
    """Rows (t, quantity, mean, l2pi, hk, k); ``rows`` maps quantity -> dict of series."""
    with _open_out(path) as fh:
        fh.write(f"# schema: {SCHEMAS['moments']}\n")
        fh.write("t,quantity,mean,l2pi,hk,k\n")
        for name, data in rows.items():
            korder = data["k"]
            for idx, t in enumerate(times):
                fh.write(
                    f"{fmt_float(t)},{name},{fmt_float(data['mean'][idx])},"
                    f"{fmt_float(data['l2pi'][idx])},{fmt_float(data['hk'][idx])},{korder}\n"
                )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "unbounded" if x > 0 else "-unbounded"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, obj: dict, schema: str) -> None:
    payload = {"schema": SCHEMAS[schema]}
    payload.update(_jsonable(obj))
    with _open_out(path) as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
