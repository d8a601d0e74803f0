import json
import math

import pytest

from monomer_dimer import __version__
from monomer_dimer.reference import (
    ReferenceValues,
    StaleReferenceError,
    atomic_write_text,
    compute_reference,
)


@pytest.fixture(scope="module")
def ref():
    return compute_reference()


def test_reference_constants(ref):
    s = math.sqrt(2.0)
    assert ref.m_c == pytest.approx(2 - s, abs=1e-12)
    assert ref.J_c == pytest.approx((3 + 2 * s) / 4, abs=1e-12)
    assert ref.lambda_c == pytest.approx(-(12 + 17 / s), rel=1e-9)
    assert ref.provenance == "derived" and ref.version == __version__


def test_round_trip(tmp_path, ref):
    p = tmp_path / "sub" / "ref.json"
    ref.write(p)
    assert ReferenceValues.read(p) == ref
    # writing twice gives identical bytes
    first = p.read_bytes()
    ref.write(p)
    assert p.read_bytes() == first
    assert not [f for f in p.parent.iterdir() if f.name.endswith(".tmp")]


def test_unknown_or_missing_keys_rejected(ref):
    doc = json.loads(ref.to_json())
    doc["extra"] = 1
    with pytest.raises(ValueError):
        ReferenceValues.from_json(json.dumps(doc))
    del doc["extra"], doc["h_c"]
    with pytest.raises(ValueError):
        ReferenceValues.from_json(json.dumps(doc))


def test_stale_version_names_regeneration_command(tmp_path, ref):
    doc = json.loads(ref.to_json())
    doc["version"] = "0.0.0-old"
    p = tmp_path / "ref.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(StaleReferenceError, match="meanfield critical"):
        ReferenceValues.read(p)


def test_atomic_write_leaves_old_file_on_failure(tmp_path):
    p = tmp_path / "a.txt"
    atomic_write_text(p, "old")
    with pytest.raises(TypeError):
        atomic_write_text(p, 12345)  # not a str
    assert p.read_text() == "old"
    assert [f.name for f in tmp_path.iterdir()] == ["a.txt"]
