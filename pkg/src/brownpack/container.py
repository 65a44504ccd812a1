"""Bit-exact binary persistence for every artifact kind.

File layout (all integers little-endian):

    bytes 0..3    magic "BIDE"
    bytes 4..7    format version, uint32 (currently 1)
    bytes 8..15   header length in bytes, uint64
    header        UTF-8 canonical JSON (sorted keys, no whitespace)
    payload       concatenated float64 arrays, as declared by the header

The header declares the artifact kind, its dimensions and provenance
(seed, model spec, hyperparameters) and a table of byte offsets/lengths
for each payload array. Writing the same content twice produces the same
bytes: the JSON is canonical and nothing time- or host-dependent is
stored.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .covariates import CovariateBasis
from .dynamics import IdentityEnsemble, VariationSet
from .errors import (
    ContainerCorruptionError,
    ContainerFormatError,
    ContainerHeaderError,
    NumericError,
    UnsupportedVersionError,
)
from .losses import TrainingSetEmbeddings
from .models import ModelSpec
from .params import HyperParams

MAGIC = b"BIDE"
VERSION = 1
KINDS = ("identities", "variations", "embeddings", "covariates", "trace")


@dataclass
class TraceData:
    """Named scalar series read back from a trace container."""

    series: dict[str, np.ndarray]

    @property
    def n_records(self) -> int:
        return next(iter(self.series.values())).shape[0] if self.series else 0


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_container(path, kind: str, header_fields: dict, arrays: dict[str, np.ndarray]) -> None:
    """Lay out a container file exactly as documented above."""
    if kind not in KINDS:
        raise ContainerHeaderError(f"unknown container kind {kind!r}, expected one of {KINDS}")
    blobs = []
    table = []
    offset = 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype=np.float64)
        if a.size and not np.isfinite(a).all():
            raise NumericError(f"refusing to write non-finite values in array {name!r}")
        raw = a.astype("<f8").tobytes(order="C")
        table.append({"name": name, "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = dict(header_fields)
    header["kind"] = kind
    header["arrays"] = table
    header_bytes = _canonical_json(header)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for raw in blobs:
            fh.write(raw)


def _read_raw(path) -> tuple[dict, bytes]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16 or data[:4] != MAGIC:
        raise ContainerFormatError(f"{path}: not a container file (bad magic)")
    (version,) = struct.unpack("<I", data[4:8])
    if version > VERSION:
        raise UnsupportedVersionError(
            f"{path}: container version {version} is newer than the supported version {VERSION}"
        )
    (header_len,) = struct.unpack("<Q", data[8:16])
    if len(data) < 16 + header_len:
        raise ContainerCorruptionError(f"{path}: truncated header")
    try:
        header = json.loads(data[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerHeaderError(f"{path}: header is not valid JSON: {exc}") from exc
    payload = data[16 + header_len:]
    if not isinstance(header, dict) or "kind" not in header or "arrays" not in header:
        raise ContainerHeaderError(f"{path}: header lacks 'kind' or 'arrays'")
    if header["kind"] not in KINDS:
        raise ContainerHeaderError(f"{path}: unknown kind {header['kind']!r}")
    declared = 0
    for entry in header["arrays"]:
        if not {"name", "offset", "nbytes"} <= set(entry):
            raise ContainerHeaderError(f"{path}: malformed array table entry {entry!r}")
        if entry["offset"] != declared or entry["nbytes"] % 8 != 0:
            raise ContainerHeaderError(f"{path}: inconsistent array table at {entry['name']!r}")
        declared += entry["nbytes"]
    if declared != len(payload):
        raise ContainerCorruptionError(
            f"{path}: payload holds {len(payload)} bytes, header declares {declared}"
        )
    return header, payload


def _arrays(header: dict, payload: bytes) -> dict[str, np.ndarray]:
    out = {}
    for entry in header["arrays"]:
        raw = payload[entry["offset"]:entry["offset"] + entry["nbytes"]]
        out[entry["name"]] = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return out


def _require(header: dict, path, *names):
    for name in names:
        if name not in header:
            raise ContainerHeaderError(f"{path}: header is missing field {name!r}")


def _reshape(path, arrays: dict, name: str, shape: tuple[int, ...]) -> np.ndarray:
    if name not in arrays:
        raise ContainerHeaderError(f"{path}: payload array {name!r} is missing")
    arr = arrays[name]
    expected = int(np.prod(shape)) if shape else 0
    if arr.size != expected:
        raise ContainerHeaderError(
            f"{path}: array {name!r} holds {arr.size} values, expected {expected}"
        )
    return arr.reshape(shape)


def read_container(path):
    """Validate a container and reconstruct the typed object for its kind."""
    header, payload = _read_raw(path)
    arrays = _arrays(header, payload)
    kind = header["kind"]

    if kind == "identities":
        _require(header, path, "n_id", "d_w", "seed", "iterations_done", "model_spec", "params")
        n_id, d_w = header["n_id"], header["d_w"]
        return IdentityEnsemble(
            latents=_reshape(path, arrays, "latents", (n_id, d_w)),
            model_spec=ModelSpec.from_dict(header["model_spec"]),
            params=HyperParams.from_dict(header["params"]),
            seed=header["seed"],
            iterations_done=header["iterations_done"],
            w_avg=_reshape(path, arrays, "w_avg", (d_w,)),
        )

    if kind == "variations":
        _require(header, path, "n_id", "n_var", "d_w", "d_e", "seed",
                 "iterations_done", "model_spec", "params")
        n_id, n_var, d_w, d_e = (header[k] for k in ("n_id", "n_var", "d_w", "d_e"))
        return VariationSet(
            variations=_reshape(path, arrays, "variations", (n_id, n_var, d_w)),
            reference_latents=_reshape(path, arrays, "reference_latents", (n_id, d_w)),
            reference_embeddings=_reshape(path, arrays, "reference_embeddings", (n_id, d_e)),
            model_spec=ModelSpec.from_dict(header["model_spec"]),
            params=HyperParams.from_dict(header["params"]),
            seed=header["seed"],
            iterations_done=header["iterations_done"],
            w_avg=_reshape(path, arrays, "w_avg", (d_w,)),
        )

    if kind == "embeddings":
        _require(header, path, "n", "d_e")
        return TrainingSetEmbeddings(
            embeddings=_reshape(path, arrays, "embeddings", (header["n"], header["d_e"])),
            labels=header.get("labels"),
        )

    if kind == "covariates":
        _require(header, path, "k", "d_w", "names")
        return CovariateBasis(
            directions=_reshape(path, arrays, "directions", (header["k"], header["d_w"])),
            names=list(header["names"]),
        )

    # trace
    _require(header, path, "n_records", "series")
    n = header["n_records"]
    series = {name: _reshape(path, arrays, name, (n,)) for name in header["series"]}
    return TraceData(series=series)


# ---------------------------------------------------------------------------
# typed writers
# ---------------------------------------------------------------------------

def save_ensemble(path, ensemble: IdentityEnsemble) -> None:
    write_container(
        path, "identities",
        {
            "n_id": ensemble.n_id,
            "d_w": ensemble.model_spec.d_w,
            "seed": ensemble.seed,
            "iterations_done": ensemble.iterations_done,
            "model_spec": ensemble.model_spec.to_dict(),
            "params": ensemble.params.to_dict(),
        },
        {"latents": ensemble.latents, "w_avg": ensemble.w_avg},
    )


def save_variations(path, vs: VariationSet) -> None:
    write_container(
        path, "variations",
        {
            "n_id": vs.n_id,
            "n_var": vs.n_var,
            "d_w": vs.model_spec.d_w,
            "d_e": vs.model_spec.d_e,
            "seed": vs.seed,
            "iterations_done": vs.iterations_done,
            "model_spec": vs.model_spec.to_dict(),
            "params": vs.params.to_dict(),
        },
        {
            "variations": vs.variations,
            "reference_latents": vs.reference_latents,
            "reference_embeddings": vs.reference_embeddings,
            "w_avg": vs.w_avg,
        },
    )


def save_embeddings(path, training: TrainingSetEmbeddings) -> None:
    write_container(
        path, "embeddings",
        {
            "n": training.n,
            "d_e": training.embeddings.shape[1],
            "labels": list(training.labels) if training.labels is not None else None,
        },
        {"embeddings": training.embeddings},
    )


def save_covariates(path, basis: CovariateBasis) -> None:
    write_container(
        path, "covariates",
        {"k": basis.k, "d_w": basis.directions.shape[1], "names": list(basis.names)},
        {"directions": basis.directions},
    )


def save_trace(path, series: dict[str, np.ndarray]) -> None:
    series = {name: np.ascontiguousarray(arr, dtype=np.float64)
              for name, arr in series.items()}
    lengths = {arr.shape[0] for arr in series.values()}
    if len(lengths) > 1:
        raise ContainerHeaderError(f"trace series have unequal lengths: {sorted(lengths)}")
    n = lengths.pop() if lengths else 0
    write_container(
        path, "trace",
        {"n_records": n, "series": list(series)},
        dict(series),
    )
