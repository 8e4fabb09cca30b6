"""Serialization: CSV time series with config headers and JSON state dumps."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .eom import OrbitalSet
from .propagation import ObservableRecord, PropagationState


def _complex_array(a) -> dict:
    a = np.asarray(a)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _from_complex(d) -> np.ndarray:
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(path: Path, header_lines: list[str], columns: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def observable_columns(M: int, M_mol: int) -> list[str]:
    return (["t", "energy", "Na", "Nm", "norm_C"]
            + [f"occ_a_{i}" for i in range(1, M + 1)]
            + [f"occ_m_{i}" for i in range(1, M_mol + 1)])


def observable_row(rec: ObservableRecord) -> list[float]:
    return ([rec.time, rec.energy, rec.n_atoms, rec.n_molecules, rec.norm_C]
            + list(rec.occupations_a) + list(rec.occupations_m))


def write_density(path: Path, header_lines: list[str], x: np.ndarray, values: np.ndarray) -> None:
    write_csv(path, header_lines, ["x", "value"], zip(x, values))


def state_to_json(state: PropagationState, energy: float, config: dict | None = None) -> str:
    """JSON text of a state; the resolved config (if any) is the first key."""
    doc = {}
    if config is not None:
        doc["config"] = config
    doc.update({
        "time": state.time,
        "mode": state.mode,
        "energy": energy,
        "atomic_orbitals": _complex_array(state.orbitals.atomic),
        "molecular_orbitals": _complex_array(state.orbitals.molecular),
        "coefficients": _complex_array(state.C),
    })
    return json.dumps(doc, indent=1) + "\n"


def state_from_json(text: str) -> PropagationState:
    doc = json.loads(text)
    orbitals = OrbitalSet(_from_complex(doc["atomic_orbitals"]), _from_complex(doc["molecular_orbitals"]))
    return PropagationState(float(doc.get("time", 0.0)), orbitals, _from_complex(doc["coefficients"]))
