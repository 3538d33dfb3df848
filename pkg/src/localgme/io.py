"""JSON (de)serialization of states, behaviors, certificates and reports."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .config import DEFAULT, Tolerances
from .correlations import LAYOUT, Behavior, MeasurementAssignment, Scenario
from .errors import ArgumentError
from .linalg import DensityMatrix


def complex_entries(m: np.ndarray) -> list[list[float]]:
    flat = np.asarray(m, dtype=np.complex128).ravel()
    return [[float(z.real), float(z.imag)] for z in flat]


def entries_to_complex(entries, shape) -> np.ndarray:
    a = np.asarray(entries, dtype=float)
    return (a[:, 0] + 1j * a[:, 1]).reshape(shape)


def envelope(kind: str, parameters: dict, tol: Tolerances = DEFAULT, seed: int | None = None) -> dict:
    return {
        "kind": kind,
        "tool": "localgme",
        "version": __version__,
        "seed": seed,
        "tolerances": tol.as_dict(),
        "parameters": parameters,
    }


def state_to_dict(rho: DensityMatrix, metadata: dict | None = None) -> dict:
    return {"dims": list(rho.dims), "entries": complex_entries(rho.matrix), "metadata": metadata or {}}


def state_from_dict(d: dict, tol: Tolerances = DEFAULT) -> DensityMatrix:
    dims = tuple(d["dims"])
    side = int(np.prod(dims))
    return DensityMatrix(entries_to_complex(d["entries"], (side, side)), dims, tol=tol)


def behavior_to_dict(b: Behavior) -> dict:
    return {"scenario": b.scenario.as_dict(), "layout": LAYOUT, "probabilities": b.flat().tolist()}


def behavior_from_dict(d: dict, validate: bool = True) -> Behavior:
    if d.get("layout", LAYOUT) != LAYOUT:
        raise ArgumentError(f"unsupported behavior layout {d.get('layout')!r}")
    s = d["scenario"]
    scen = Scenario(s["n_parties"], tuple(s["inputs_per_party"]), tuple(s["outputs_per_party"]))
    return Behavior.from_flat(scen, d["probabilities"], validate=validate)


def measurements_from_dict(d: dict) -> MeasurementAssignment:
    """``{"bloch": [[[x, y, z], ...], ...]}`` or ``{"operators": [[[[re, im] ...]]]}``.

    Operators are nested as party -> input -> outcome -> row-major entries.
    """
    if "bloch" in d:
        return MeasurementAssignment.from_bloch(d["bloch"])
    if "operators" in d:
        parties = []
        for party in d["operators"]:
            inputs = []
            for outcomes in party:
                ops = []
                for entries in outcomes:
                    side = int(round(np.sqrt(len(entries))))
                    ops.append(entries_to_complex(entries, (side, side)))
                inputs.append(ops)
            parties.append(np.array(inputs))
        return MeasurementAssignment(tuple(parties))
    raise ArgumentError("measurement spec needs a 'bloch' or 'operators' field")


def measurements_to_dict(m: MeasurementAssignment) -> dict:
    return {"operators": [[[complex_entries(op) for op in x] for x in party] for party in m.ops]}


def dump(obj: Any, path: str | Path | None) -> str:
    text = json.dumps(obj, indent=1, allow_nan=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def load(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
