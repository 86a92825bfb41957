"""Manifest digests and read/write round trip."""

import json

import pytest

from nlwave import manifest
from nlwave.errors import ValidationError


def test_fnv1a64_known_vectors():
    # offset basis and the reference values for short ASCII inputs
    assert manifest.fnv1a64(b"") == 0xCBF29CE484222325
    assert manifest.fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert manifest.fnv1a64(b"foobar") == 0x85944171F73967E8


def test_digest_file_matches_bytes(tmp_path):
    path = tmp_path / "blob.bin"
    path.write_bytes(b"foobar")
    assert manifest.digest_file(path) == format(0x85944171F73967E8, "016x")
    assert len(manifest.digest_file(path)) == 16


def test_digest_sensitive_to_content(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("t,spin\n0,1\n")
    b.write_text("t,spin\n0,2\n")
    assert manifest.digest_file(a) != manifest.digest_file(b)


def test_write_read_round_trip(tmp_path):
    (tmp_path / "out.csv").write_text("t,spin\n0,0\n")
    cfg = {"model": {"q": 3}, "run": {"seed": 0}}
    manifest.write_manifest(tmp_path, cfg, ["out.csv"], 1.25, "0.1.0")
    loaded = manifest.read_manifest(tmp_path / manifest.MANIFEST_NAME)
    assert loaded["version"] == "0.1.0"
    assert loaded["config"] == cfg
    assert loaded["duration_seconds"] == 1.25
    digests = manifest.output_digests(loaded)
    assert digests == {"out.csv": manifest.digest_file(tmp_path / "out.csv")}


def test_manifest_is_plain_json(tmp_path):
    (tmp_path / "x.txt").write_text("value=1\n")
    manifest.write_manifest(tmp_path, {"run": {}}, ["x.txt"], 0.0, "0")
    raw = json.loads((tmp_path / manifest.MANIFEST_NAME).read_text())
    assert set(raw) >= {"version", "config", "outputs", "duration_seconds",
                        "platform"}
    assert raw["outputs"][0]["file"] == "x.txt"


def test_read_manifest_rejects_bad_input(tmp_path):
    with pytest.raises(ValidationError):
        manifest.read_manifest(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError):
        manifest.read_manifest(bad)
    partial = tmp_path / "partial.json"
    partial.write_text(json.dumps({"version": "0"}))
    with pytest.raises(ValidationError):
        manifest.read_manifest(partial)
