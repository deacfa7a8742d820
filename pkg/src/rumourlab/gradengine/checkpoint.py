"""Self-describing text checkpoints with full round-trip precision.

Format: a version line, then one line per parameter:
``<name> <d1>x<d2>x... <value> <value> ...`` with repr-precision floats.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Union

import numpy as np

from ..errors import ParseError, ValidationError
from .tensor import Tensor

CKPT_FORMAT_VERSION = "rumourlab-ckpt v1"


def save_checkpoint(params: Mapping[str, Union[Tensor, np.ndarray]], path) -> None:
    lines = [f"# {CKPT_FORMAT_VERSION}"]
    for name in sorted(params):
        if " " in name:
            raise ValidationError(f"parameter name {name!r} contains a space")
        values = params[name].values if isinstance(params[name], Tensor) else np.asarray(params[name])
        shape = "x".join(str(d) for d in values.shape) or "1"
        payload = " ".join(repr(float(v)) for v in values.reshape(-1))
        lines.append(f"{name} {shape} {payload}".rstrip())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path) -> dict[str, np.ndarray]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != f"# {CKPT_FORMAT_VERSION}":
        raise ParseError(f"{path}: not a {CKPT_FORMAT_VERSION} checkpoint")
    params: dict[str, np.ndarray] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(" ")
        if len(parts) < 2:
            raise ParseError(f"{path} line {line_no}: malformed parameter line")
        name, shape_text = parts[0], parts[1]
        try:
            shape = tuple(int(d) for d in shape_text.split("x"))
            values = np.array([float(v) for v in parts[2:]], dtype=np.float64)
        except ValueError:
            raise ParseError(f"{path} line {line_no}: malformed parameter line") from None
        expected = int(np.prod(shape))
        if values.size != expected:
            raise ParseError(
                f"{path} line {line_no}: {values.size} values for shape {shape_text}"
            )
        params[name] = values.reshape(shape)
    return params
