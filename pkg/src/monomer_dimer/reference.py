"""Persisted critical-point constants shared between modules."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .meanfield import critical_point

DEFAULT_TOL = 1e-8


class StaleReferenceError(RuntimeError):
    pass


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class ReferenceValues:
    h_c: float
    J_c: float
    m_c: float
    t_star: float
    lambda_c: float
    tolerances: dict = field(default_factory=dict)
    provenance: str = "derived"
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def write(self, path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def from_json(cls, text: str) -> "ReferenceValues":
        data = json.loads(text)
        expected = {f for f in cls.__dataclass_fields__}
        if set(data) != expected:
            raise ValueError(f"reference file keys {sorted(data)} != {sorted(expected)}")
        return cls(**data)

    @classmethod
    def read(cls, path) -> "ReferenceValues":
        ref = cls.from_json(Path(path).read_text())
        if ref.version != __version__:
            raise StaleReferenceError(
                f"{path}: written by version {ref.version}, running {__version__}; "
                f"regenerate with `monomer-dimer meanfield critical --out {path}`"
            )
        return ref


def compute_reference(tol: float = DEFAULT_TOL) -> ReferenceValues:
    cp = critical_point(tol)
    return ReferenceValues(
        h_c=cp.h_c,
        J_c=cp.J_c,
        m_c=cp.m_c,
        t_star=cp.t_star,
        lambda_c=cp.lambda_c,
        tolerances={"critical_point": tol},
    )
