"""JSON configuration documents for the command-line tools.

Matrices are row-major nested lists whose entries are either real numbers or
``[re, im]`` pairs. A missing section falls back to the desk-scale default: a
64-point grid with unit spacing and hbar, a width-4 Gaussian probe and a
centered width-4 Gaussian object state, measuring position and disturbing
momentum with the von Neumann interaction.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qmeter.exceptions import ConfigError
from qmeter.grid import CyclicGrid, delta_state, gaussian_state, momentum_op, position_op
from qmeter.instrument import Channel, Instrument, identity_channel, luders_instrument
from qmeter.model import IndirectModel, canonical_model, realize_instrument
from qmeter.operators import check_observable, check_state, ket_to_state
from qmeter.povm import Povm
from qmeter.zoo import noiseless_position_model, von_neumann_model

GRID_KINDS = ("von_neumann", "noiseless_position", "canonical")
MODEL_KINDS = GRID_KINDS + ("custom", "instrument")

PAULI = {
    "pauli_x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "pauli_y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "pauli_z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

DEFAULTS = {
    "model": {"kind": "von_neumann", "probe": {"kind": "gaussian", "center": 0.0, "width": 4.0}},
    "grid": {"n_points": 64, "spacing": 1.0, "hbar": 1.0},
    "a": "position",
    "b": "momentum",
    "state": {"kind": "gaussian", "center": 0.0, "width": 4.0},
}


@dataclass(frozen=True)
class Analysis:
    """A resolved configuration: apparatus, observables and input state."""

    model: IndirectModel
    a: np.ndarray
    b: np.ndarray
    rho: np.ndarray
    grid: CyclicGrid | None


def load_document(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def with_defaults(doc: dict | None) -> dict:
    """Fill in every missing top-level section with its default."""
    doc = copy.deepcopy(doc or {})
    for key, value in DEFAULTS.items():
        doc.setdefault(key, copy.deepcopy(value))
    model = doc["model"]
    if not isinstance(model, dict):
        raise ConfigError("'model' must be an object")
    if model.get("kind", "von_neumann") in GRID_KINDS:
        model.setdefault("probe", copy.deepcopy(DEFAULTS["model"]["probe"]))
        grid = doc["grid"]
        for key, value in DEFAULTS["grid"].items():
            grid.setdefault(key, value)
    return doc


def _entry(x) -> complex:
    if isinstance(x, bool):
        raise ConfigError("booleans are not matrix entries")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(y, (int, float)) and not isinstance(y, bool) for y in x):
        return complex(x[0], x[1])
    raise ConfigError(f"matrix entry {x!r} is neither a number nor an [re, im] pair")


def parse_vector(data) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise ConfigError("vector must be a nonempty list")
    return np.array([_entry(x) for x in data], dtype=np.complex128)


def parse_matrix(data) -> np.ndarray:
    if not isinstance(data, list) or not data or not all(isinstance(row, list) for row in data):
        raise ConfigError("matrix must be a nonempty list of rows")
    rows = [[_entry(x) for x in row] for row in data]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError("matrix rows differ in length")
    return np.array(rows, dtype=np.complex128)


def encode_matrix(m) -> list:
    """Inverse of ``parse_matrix``: every entry as an ``[re, im]`` pair."""
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _require(section: dict, key: str, what: str):
    if key not in section:
        raise ConfigError(f"{what} needs '{key}'")
    return section[key]


def resolve_grid(doc: dict) -> CyclicGrid:
    g = doc["grid"]
    try:
        return CyclicGrid(int(g["n_points"]), float(g["spacing"]), float(g["hbar"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad grid section: {exc}") from exc


def resolve_wavefunction(spec, grid: CyclicGrid | None, what: str) -> np.ndarray:
    if not isinstance(spec, dict):
        raise ConfigError(f"{what} must be an object")
    kind = spec.get("kind", "gaussian")
    if kind == "vector":
        return parse_vector(_require(spec, "amplitudes", what))
    if grid is None:
        raise ConfigError(f"{what} of kind '{kind}' needs a grid model")
    if kind == "gaussian":
        return gaussian_state(grid, float(spec.get("center", 0.0)), float(spec.get("width", 1.0)),
                              float(spec.get("momentum", 0.0)))
    if kind == "delta":
        return delta_state(grid, float(spec.get("center", 0.0)))
    raise ConfigError(f"unknown {what} kind '{kind}'")


def resolve_state(spec, grid: CyclicGrid | None) -> np.ndarray:
    if isinstance(spec, dict) and spec.get("kind") == "matrix":
        return check_state(parse_matrix(_require(spec, "matrix", "matrix state")))
    if isinstance(spec, dict) and spec.get("kind") == "basis":
        dim = grid.n_points if grid is not None else int(_require(spec, "dim", "basis state"))
        ket = np.zeros(dim, dtype=np.complex128)
        ket[int(_require(spec, "index", "basis state"))] = 1.0
        return ket_to_state(ket)
    return ket_to_state(resolve_wavefunction(spec, grid, "state"))


def resolve_observable(spec, grid: CyclicGrid | None) -> np.ndarray:
    if isinstance(spec, str):
        if spec in PAULI:
            return PAULI[spec].copy()
        if spec in ("position", "momentum"):
            if grid is None:
                raise ConfigError(f"builtin observable '{spec}' needs a grid model")
            return position_op(grid) if spec == "position" else momentum_op(grid)
        raise ConfigError(f"unknown builtin observable '{spec}'")
    return check_observable(parse_matrix(spec))


def _kraus_families(spec) -> tuple[np.ndarray, tuple[np.ndarray, ...]]:
    values = [float(v) for v in _require(spec, "values", "instrument")]
    kraus = _require(spec, "kraus", "instrument")
    if not isinstance(kraus, list) or len(kraus) != len(values):
        raise ConfigError("instrument needs one list of Kraus matrices per value")
    return np.array(values), tuple(np.stack([parse_matrix(k) for k in fam]) for fam in kraus)


def resolve_instrument(spec: dict) -> Instrument:
    if spec.get("kind") == "luders":
        return luders_instrument(resolve_observable(_require(spec, "observable", "Lueders instrument"), None))
    values, fams = _kraus_families(spec)
    return Instrument(values, fams)


def resolve_povm(spec: dict) -> Povm:
    values = [float(v) for v in _require(spec, "values", "POVM")]
    effects = tuple(parse_matrix(e) for e in _require(spec, "effects", "POVM"))
    return Povm(np.array(values), effects)


def resolve_channel(spec: dict) -> Channel:
    if "identity" in spec:
        return identity_channel(int(spec["identity"]))
    return Channel(np.stack([parse_matrix(k) for k in _require(spec, "kraus", "channel")]))


def resolve_model(doc: dict, grid: CyclicGrid | None) -> IndirectModel:
    spec = doc["model"]
    kind = spec.get("kind", "von_neumann")
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind '{kind}'")
    if kind in GRID_KINDS:
        probe = resolve_wavefunction(spec["probe"], grid, "probe")
        if kind == "von_neumann":
            return von_neumann_model(grid, probe)
        if kind == "noiseless_position":
            return noiseless_position_model(grid, probe)
        return canonical_model(resolve_observable(_require(spec, "observable", "canonical model"), None), grid, probe)
    if kind == "instrument":
        return realize_instrument(resolve_instrument(_require(spec, "instrument", "instrument model")))
    u = parse_matrix(_require(spec, "unitary", "custom model"))
    sigma = resolve_state(_require(spec, "probe_state", "custom model"), None)
    meter = parse_matrix(_require(spec, "meter", "custom model"))
    dim_probe = sigma.shape[0]
    if u.shape[0] % dim_probe:
        raise ConfigError("unitary dimension is not a multiple of the probe dimension")
    return IndirectModel(u.shape[0] // dim_probe, dim_probe, sigma, u, meter, float(spec.get("hbar", 1.0)))


def resolve(doc: dict | None) -> Analysis:
    """Build the apparatus, observables and state described by ``doc``."""
    doc = with_defaults(doc)
    grid = resolve_grid(doc) if doc["model"].get("kind", "von_neumann") in GRID_KINDS else None
    model = resolve_model(doc, grid)
    if grid is None and doc["state"] == DEFAULTS["state"]:
        raise ConfigError("non-grid models need an explicit 'state'")
    return Analysis(
        model,
        resolve_observable(doc["a"], grid),
        resolve_observable(doc["b"], grid),
        resolve_state(doc["state"], grid),
        grid,
    )


SWEEP_PARAMETERS = {
    "probe_width": ("model", "probe", "width"),
    "probe_center": ("model", "probe", "center"),
    "object_width": ("state", "width"),
    "object_center": ("state", "center"),
    "grid_size": ("grid", "n_points"),
    "spacing": ("grid", "spacing"),
    "hbar": ("grid", "hbar"),
}


def set_parameter(doc: dict, name: str, value: float) -> dict:
    """Copy of ``doc`` (defaults filled in) with one sweep parameter replaced."""
    if name not in SWEEP_PARAMETERS:
        raise ConfigError(f"unknown sweep parameter '{name}'")
    doc = with_defaults(doc)
    *path, leaf = SWEEP_PARAMETERS[name]
    node = doc
    for key in path:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set '{name}' in this config")
    node[leaf] = int(value) if name == "grid_size" else float(value)
    return doc
