"""Access to the shipped golden-vector file."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources


@dataclass(frozen=True)
class GoldenVector:
    name: str
    kind: str
    frame: bytes
    expected: dict


def load_golden_vectors(text=None):
    """Parse ``golden_frames.hex`` (or ``text`` in the same format)."""
    if text is None:
        text = resources.files(__package__).joinpath("data/golden_frames.hex").read_text()
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, kind, hexstr, expected = (p.strip() for p in line.split("|", 3))
        out.append(GoldenVector(name, kind, bytes.fromhex("".join(hexstr.split())), json.loads(expected)))
    return out
