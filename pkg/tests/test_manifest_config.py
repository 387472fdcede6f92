import shutil
import subprocess

import jsonschema
import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from fkl.config import Config
from fkl.errors import ConfigError
from fkl.manifest import RunManifest, content_hash, plain, validate


def manifest(**kw):
    base = dict(command="scale", params={"s": 0.5, "b": 1.0},
                grid={"dim": 1, "half_width": 200.0, "points_per_axis": 8192},
                solver={"tol": 1e-12}, outputs=["U.field"], results={"E0": 2.5})
    base.update(kw)
    return RunManifest(**base)


def test_manifest_roundtrip():
    m = manifest(results={"E0": np.float64(2.5), "ok": np.bool_(True), "v": np.arange(3)})
    back = RunManifest.loads(m.dumps())
    assert back.to_dict() == m.to_dict()
    assert back.results == {"E0": 2.5, "ok": True, "v": [0, 1, 2]}


def test_manifest_is_indented_yaml():
    text = manifest().dumps()
    assert "\n  dim: 1\n" in text
    assert yaml.safe_load(text)["schema"] == "fkl-manifest/1"


def test_schema_rejects_bad_documents():
    d = manifest().to_dict()
    for key, bad in (("command", "serve"), ("input_hash", "xyz"), ("wall_clock_seconds", -1)):
        broken = dict(d, **{key: bad})
        with pytest.raises(jsonschema.ValidationError):
            validate(broken)
    with pytest.raises(jsonschema.ValidationError):
        validate(dict(d, extra=1))
    missing = dict(d)
    del missing["outputs"]
    with pytest.raises(jsonschema.ValidationError):
        validate(missing)


def test_input_hash_depends_only_on_inputs():
    a, b = manifest(), manifest(results={"E0": 9.0}, wall_clock_seconds=3.0)
    assert a.input_hash == b.input_hash
    assert manifest(params={"s": 0.75, "b": 1.0}).input_hash != a.input_hash


def test_nonfinite_values_are_serialised_as_strings():
    assert plain({"x": float("nan"), "y": (1, np.inf)}) == {"x": "nan", "y": [1, "inf"]}


@pytest.mark.skipif(shutil.which("git") is None, reason="git not available")
@settings(max_examples=20, deadline=None)
@given(st.dictionaries(st.text(max_size=8), st.one_of(st.integers(), st.text(max_size=8),
                                                       st.floats(allow_nan=False,
                                                                 allow_infinity=False)),
                       max_size=5))
def test_content_hash_matches_git(payload):
    import json
    body = json.dumps(plain(payload), sort_keys=True, separators=(",", ":")).encode()
    out = subprocess.run(["git", "hash-object", "--stdin"], input=body, capture_output=True,
                         check=True).stdout.decode().strip()
    assert content_hash(payload) == out


CFG = """
[model]
s = 0.5
p = 2
b = 0.5
[grid]
half_width = 100
points = 2048
"""


def test_config_defaults():
    c = Config.from_string(CFG)
    assert c.model.a == 1.0 and c.model.m == 1.0 and c.model.b == 0.5
    assert c.grid.L == 100.0 and c.grid.n == 2048
    assert c.sections["spectrum"]["sector"] == "full"
    d = Config.from_string("[model]\ndim = 2\ns = 0.75\n")
    assert d.grid.n == 256 and d.grid.L == 40.0


@pytest.mark.parametrize("text,msg", [
    ("[modle]\ns = 0.5\n", "unknown section"),
    ("[model]\nsigma = 0.5\n", "unknown key"),
    ("[model]\ns = half\n", "cannot parse"),
    ("[model]\ns = 0.2\n", "requires s > N/4"),
    ("[model]\ns = 0.6\np = 9\ndim = 2\n", "not subcritical"),
    ("[spectrum]\nsector = radial\n", "sector"),
    ("[scale]\nb_list = 0 -1\n", "b_list"),
    ("[potential]\nkind = quadratic_well\nbase = 1\n[semiclassical]\neps = -0.1\n", "positive"),
    ("[potential]\nkind = quadratic_well\nbase = 1\n[semiclassical]\ndelta = 2\n", "delta"),
    ("[model]\ns = 0.5\n[model]\ns = 0.6\n", "malformed"),
])
def test_config_rejections(text, msg):
    with pytest.raises(ConfigError, match=msg):
        Config.from_string(text)


def test_config_potential_and_semiclassical_model():
    c = Config.from_string(CFG + "[potential]\nkind = quadratic_well\nx0 = 0.3\nbase = 2\n")
    pot = c.potential()
    assert pot.x0 == (0.3,) and pot.value_at_x0 == 2.0
    assert c.semiclassical_model().m == 2.0
    with pytest.raises(ConfigError, match="missing"):
        Config.from_string(CFG).potential()


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        Config.from_file(tmp_path / "nope.cfg")
