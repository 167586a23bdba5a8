"""JSON file formats for channels, datasets, states, and results.

Complex matrices are stored as nested arrays of ``[re, im]`` pairs.  Operator
bases are never serialized; they are rebuilt from the dimension.
"""

import json

import numpy as np

from .channels import KrausChannel, ProcessEnsemble
from .errors import ValidationError
from .estimator import EstimateResult
from .measurement import DensityMatrix, MeasurementDataset, Povm


def matrix_to_json(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in a]


def matrix_from_json(data) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix entry: {exc}") from exc
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValidationError(f"matrix must be nested [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def channel_to_json(ch: KrausChannel) -> dict:
    return {"d": ch.d, "kraus": [matrix_to_json(a) for a in ch.kraus], "label": ch.label}


def channel_from_json(data) -> KrausChannel:
    for key in ("d", "kraus"):
        if key not in data:
            raise ValidationError(f"channel record is missing field {key!r}")
    kraus = np.stack([matrix_from_json(a) for a in data["kraus"]])
    return KrausChannel(int(data["d"]), kraus, label=str(data.get("label", "")))


def save_ensemble(ens: ProcessEnsemble, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([channel_to_json(ch) for ch in ens.channels], fh)


def load_ensemble(path) -> ProcessEnsemble:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValidationError(f"{path}: ensemble file must be a JSON array of channels")
    return ProcessEnsemble(tuple(channel_from_json(item) for item in data))


def load_hamiltonians(path):
    """Hamiltonian records ``{"d": int, "h": matrix, "dt_us": real}``."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    out = []
    for item in data:
        for key in ("d", "h", "dt_us"):
            if key not in item:
                raise ValidationError(f"Hamiltonian record is missing field {key!r}")
        out.append((matrix_from_json(item["h"]), float(item["dt_us"])))
    return out


def save_state(state: DensityMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"d": state.d, "rho": matrix_to_json(state.rho)}, fh)


def load_state(path) -> DensityMatrix:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return DensityMatrix(int(data["d"]), matrix_from_json(data["rho"]))


def save_povm(povm: Povm, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"d": povm.d, "elements": [matrix_to_json(p) for p in povm.elements]}, fh)


def load_povm(path) -> Povm:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return Povm(int(data["d"]), np.stack([matrix_from_json(p) for p in data["elements"]]))


def dataset_to_json(ds: MeasurementDataset) -> dict:
    return {
        "y_hat": ds.y_hat.tolist(),
        "x_a0_hat": ds.x_a0_hat.tolist(),
        "c_j0_hat": ds.c_j0_hat.tolist(),
        "x01_bar": ds.x01_bar,
        "n0": ds.n0,
        "tp_flags": [bool(f) for f in ds.tp_flags],
        "anchor_index": ds.anchor_index,
    }


def dataset_from_json(data) -> MeasurementDataset:
    for key in ("y_hat", "x_a0_hat", "c_j0_hat", "x01_bar", "n0", "tp_flags"):
        if key not in data:
            raise ValidationError(f"dataset record is missing field {key!r}")
    return MeasurementDataset(
        y_hat=np.asarray(data["y_hat"], dtype=float),
        x_a0_hat=np.asarray(data["x_a0_hat"], dtype=float),
        c_j0_hat=np.asarray(data["c_j0_hat"], dtype=float),
        x01_bar=float(data["x01_bar"]),
        n0=int(data["n0"]),
        tp_flags=np.asarray(data["tp_flags"], dtype=bool),
        anchor_index=int(data.get("anchor_index", 1)),
    )


def save_dataset(ds: MeasurementDataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_json(ds), fh)


def load_dataset(path) -> MeasurementDataset:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return dataset_from_json(data)


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def result_to_json(result: EstimateResult) -> dict:
    return {
        "rho_hat": matrix_to_json(result.rho_hat.rho),
        "povm_hat": [matrix_to_json(p) for p in result.povm_hat.elements],
        "rho_bar": matrix_to_json(result.rho_bar),
        "povm_bar": [matrix_to_json(p) for p in result.povm_bar],
        "diagnostics": _plain(result.diagnostics),
    }


def save_result(result: EstimateResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result_to_json(result), fh)
