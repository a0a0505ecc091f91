"""Model catalog: JSON documents with base64 float32 weight blobs.

Document layout::

    {
      "format": "oranslice-catalog/1",
      "entry_id": "embb-ep0200",
      "slice_type": "EMBB",
      "encoder": {...EncoderConfig...},
      "policy": [{"name": "W0", "shape": [24, 30], "data": "<b64 <f4>"}, ...],
      "value":  [...same, scalar head...],
      "metadata": {"seed": 1, "episodes": 200, "dataset_hash": "..."},
      "checksum": "sha256:<hex over all decoded blobs, policy then value>"
    }
"""
from __future__ import annotations

import base64
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import CatalogError
from ..ran.types import SliceType
from .encoder import EncoderConfig
from .networks import layer_sizes

FORMAT = "oranslice-catalog/1"
DEPLOYED_FILE = "deployed.json"


def expected_shapes(n_out, n_in=24, hidden_layers=5, hidden_units=30):
    sizes = layer_sizes(n_in, n_out, hidden_layers, hidden_units)
    return [((a, b), (b,)) for a, b in zip(sizes[:-1], sizes[1:])]


@dataclass
class CatalogEntry:
    entry_id: str
    slice_type: SliceType
    encoder: EncoderConfig
    policy: list  # [(W float32, b float32), ...]
    value: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.slice_type = SliceType.parse(self.slice_type)
        self.policy = [(np.asarray(w, "<f4"), np.asarray(b, "<f4")) for w, b in self.policy]
        self.value = [(np.asarray(w, "<f4"), np.asarray(b, "<f4")) for w, b in self.value]

    def checksum(self):
        return "sha256:" + hashlib.sha256(_weight_bytes(self.policy) + _weight_bytes(self.value)).hexdigest()


def _weight_bytes(params):
    return b"".join(w.astype("<f4").tobytes() + b.astype("<f4").tobytes() for w, b in params)


def _encode_params(params):
    out = []
    for i, (w, b) in enumerate(params):
        for name, arr in ((f"W{i}", w), (f"b{i}", b)):
            out.append({
                "name": name,
                "shape": list(arr.shape),
                "data": base64.b64encode(np.ascontiguousarray(arr, "<f4").tobytes()).decode("ascii"),
            })
    return out


def _decode_params(blobs, what):
    if len(blobs) % 2:
        raise CatalogError(f"{what}: odd number of weight blobs")
    arrays = []
    for blob in blobs:
        try:
            raw = base64.b64decode(blob["data"], validate=True)
            shape = tuple(int(s) for s in blob["shape"])
        except (KeyError, ValueError, TypeError) as exc:
            raise CatalogError(f"{what}: malformed blob ({exc})") from None
        if len(raw) != 4 * int(np.prod(shape)):
            raise CatalogError(f"{what}/{blob.get('name')}: {len(raw)} bytes for shape {shape}")
        arrays.append(np.frombuffer(raw, "<f4").reshape(shape).copy())
    return [(arrays[i], arrays[i + 1]) for i in range(0, len(arrays), 2)]


def _check_shapes(params, n_out, what):
    want = expected_shapes(n_out)
    got = [(w.shape, b.shape) for w, b in params]
    if got != want:
        raise CatalogError(f"{what} shapes {got} do not match {want}")
    for w, b in params:
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise CatalogError(f"{what} has non-finite weights")


def save_model(entry: CatalogEntry, path):
    """Write ``entry`` to ``path``; refuses to overwrite an existing file."""
    _check_shapes(entry.policy, 3, "policy")
    _check_shapes(entry.value, 1, "value")
    doc = {
        "format": FORMAT,
        "entry_id": entry.entry_id,
        "slice_type": entry.slice_type.name,
        "encoder": entry.encoder.to_dict(),
        "policy": _encode_params(entry.policy),
        "value": _encode_params(entry.value),
        "metadata": entry.metadata,
        "checksum": entry.checksum(),
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, indent=1, sort_keys=True))
    try:
        os.link(tmp, path)  # atomic create-or-fail
    except FileExistsError:
        raise CatalogError(f"{path} exists; catalog entries are immutable") from None
    finally:
        tmp.unlink()
    return path


def load_model(path):
    """Read and verify a catalog entry (format, shapes, checksum)."""
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CatalogError(f"no catalog entry at {path}") from None
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path}: not JSON ({exc})") from None
    if doc.get("format") != FORMAT:
        raise CatalogError(f"{path}: unsupported format {doc.get('format')!r}")
    for key in ("entry_id", "slice_type", "encoder", "policy", "value", "checksum"):
        if key not in doc:
            raise CatalogError(f"{path}: missing {key!r}")
    policy = _decode_params(doc["policy"], "policy")
    value = _decode_params(doc["value"], "value")
    _check_shapes(policy, 3, "policy")
    _check_shapes(value, 1, "value")
    entry = CatalogEntry(
        entry_id=doc["entry_id"],
        slice_type=doc["slice_type"],
        encoder=EncoderConfig.from_dict(doc["encoder"]),
        policy=policy,
        value=value,
        metadata=doc.get("metadata", {}),
    )
    if entry.checksum() != doc["checksum"]:
        raise CatalogError(f"{path}: checksum mismatch")
    return entry


class ModelCatalog:
    """Directory of catalog entries plus a ``deployed.json`` selection."""

    def __init__(self, root):
        self.root = Path(root)

    def path(self, entry_id):
        return self.root / f"{entry_id}.json"

    def put(self, entry: CatalogEntry):
        self.root.mkdir(parents=True, exist_ok=True)
        return save_model(entry, self.path(entry.entry_id))

    def get(self, entry_id):
        return load_model(self.path(entry_id))

    def entries(self):
        return sorted(p.stem for p in self.root.glob("*.json") if p.name != DEPLOYED_FILE)

    def deploy(self, mapping):
        """Record which entry serves each slice type."""
        self.root.mkdir(parents=True, exist_ok=True)
        doc = {SliceType.parse(k).name: v for k, v in mapping.items()}
        (self.root / DEPLOYED_FILE).write_text(json.dumps(doc, indent=1, sort_keys=True))

    def deployed(self):
        p = self.root / DEPLOYED_FILE
        if not p.exists():
            raise CatalogError(f"{self.root}: nothing deployed")
        return {SliceType.parse(k): v for k, v in json.loads(p.read_text()).items()}
