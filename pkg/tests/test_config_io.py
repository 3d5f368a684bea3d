import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radproj.config import Lattice, Params, load_config, parse_config
from radproj.errors import ConfigError
from radproj.io import csv_text, json_text, read_measure, read_pgm, write_measure, write_pgm
from radproj.measures import PointMeasure


# ------------------------------------------------------------------ measure files


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]), st.integers(0, 40))
def test_measure_round_trip_is_exact(tmp_path_factory, seed, d, n):
    rng = np.random.default_rng(seed)
    mu = PointMeasure(rng.normal(size=(n, d)), rng.uniform(0, 1, n)) if n else PointMeasure.empty(d)
    path = tmp_path_factory.mktemp("m") / "mu.txt"
    write_measure(mu, path)
    back = read_measure(path)
    assert back.dim == d
    assert np.array_equal(back.locations, mu.locations) and np.array_equal(back.weights, mu.weights)


def test_read_measure_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0.1 0.2 1.0\n")
    with pytest.raises(ConfigError, match="#dim"):
        read_measure(p)
    p.write_text("#dim 2\n0.1 0.2\n")
    with pytest.raises(ConfigError, match="columns"):
        read_measure(p)
    p.write_text("#dim 2\n0.1 zz 1\n")
    with pytest.raises(ConfigError):
        read_measure(p)
    with pytest.raises(ConfigError, match="not found"):
        read_measure(tmp_path / "missing.txt")


# ------------------------------------------------------------------ reports


def test_csv_cells():
    text = csv_text(["a", "b", "c", "d"], [[True, 0.1, None, 3]])
    assert text == "a,b,c,d\n1,0.1,,3\n"


def test_json_nonfinite_and_sorted():
    text = json_text({"b": math.inf, "a": np.float64(1.5), "c": np.array([1, 2]), "d": math.nan})
    assert text.index('"a"') < text.index('"b"')
    assert '"inf"' in text and '"nan"' in text and "[\n    1,\n    2\n  ]" in text


def test_pgm_round_trip(tmp_path):
    vals = np.array([[0.0, 0.5, 1.0], [np.nan, 2.0, -1.0]])
    write_pgm(tmp_path / "x.pgm", vals, 0.0, 1.0)
    img = read_pgm(tmp_path / "x.pgm")
    assert img.tolist() == [[0, 128, 255], [0, 255, 0]]


def test_pgm_pixel_bytes_that_look_like_whitespace(tmp_path):
    vals = np.array([[10 / 255, 32 / 255, 13 / 255, 9 / 255]])
    write_pgm(tmp_path / "w.pgm", vals, 0.0, 1.0)
    assert read_pgm(tmp_path / "w.pgm").tolist() == [[10, 32, 13, 9]]


# ------------------------------------------------------------------ configs


FULL = """
[run]
seed = 7
[E]
kind = circle
center = 0 0
radius = 1
n = 100
scale = 2
rotate = 0.5
offset = 1 1
[F]
kind = random
lo = 3 3
hi = 4 4
n = 50
[viewpoints]
lo = -1 -1
hi = 1 1
spacing = 0.5 1
[params]
window = 2 5
tau = 0.7  # inline comment
s_E = 1.0
p = 1.5
[output]
dir = results
prefix = run1
pgm = no
"""


def test_parse_full_config(tmp_path):
    cfg = parse_config(FULL, base_dir=tmp_path)
    assert cfg.seed == 7
    assert cfg.params.window == (2, 5) and cfg.params.tau == 0.7 and cfg.params.s_E == 1.0
    assert cfg.viewpoints.shape == (5, 3)
    assert cfg.output.dir == tmp_path / "results" and not cfg.output.pgm
    E = cfg.build_E()
    # scale about the bounding-box centre keeps the centre, then the offset moves it
    centre = E.locations.mean(axis=0)
    assert np.allclose(centre, [1.0, 1.0], atol=1e-9)
    assert np.allclose(np.linalg.norm(E.locations - centre, axis=1), 2.0)


def test_random_measures_follow_seed(tmp_path):
    a = parse_config(FULL).build_F()
    b = parse_config(FULL).build_F()
    c = parse_config(FULL.replace("seed = 7", "seed = 8")).build_F()
    assert np.array_equal(a.locations, b.locations)
    assert not np.array_equal(a.locations, c.locations)


def test_lattice_c_order():
    lat = Lattice([0, 0], [1, 2], [1, 1])
    assert lat.points().tolist() == [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]


@pytest.mark.parametrize(
    "text,match",
    [
        ("[F]\nkind = grid\nlo = 0 0\nhi = 1 1\nn = 2\n", "needs an \\[E\\]"),
        ("[E]\nkind = blob\n", "kind"),
        ("[E]\nkind = segment\na = 0 0\nb = 1 0\n[extra]\n", "unknown section"),
        ("[E]\nkind = segment\na = 0 0\nb = 1 0\nn = 4\n[params]\ntau = high\n", "tau"),
        ("[E]\nkind = segment\na = 0 0\nb = 1 0\nn = 4\n[params]\nwindow = 5 2\n", "window"),
        ("[E]\nkind = segment\na = 0 0\nb = 1 0\nn = 4\n[params]\ngamma = 1\n", "unknown key"),
        ("[E]\nkind = segment\na = 0 0\nb = 1 0\nn = 4\n[params]\np = 1\n", "p must"),
        ("[E]\nkind = segment\na = 0 0\nb = 1 0\nn = 4\n[viewpoints]\nlo = 0 0\nhi = 1 1\n", "spacing"),
        ("[E]\nkind = segment\na = 0 0\nb = 1 0\nn = 4\n[viewpoints]\nlo = 0 0\nhi = 1 1\nspacing = 0\n", "positive"),
        ("[E]\nkind = segment\na = 0 0\nb = 1 0\nn = 4\n[output]\npgm = maybe\n", "pgm"),
        ("not an ini", "syntax"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_missing_measure_key_is_named():
    cfg = parse_config("[E]\nkind = segment\na = 0 0\nn = 4\n")
    with pytest.raises(ConfigError, match="'b'"):
        cfg.build_E()


def test_file_measure_relative_to_config(tmp_path):
    write_measure(PointMeasure([[0.0, 0.0], [1.0, 1.0]], [0.5, 0.5]), tmp_path / "m.txt")
    (tmp_path / "c.ini").write_text("[E]\nkind = file\npath = m.txt\n")
    assert load_config(tmp_path / "c.ini").build_E().n_atoms == 2


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.ini")


def test_params_defaults():
    p = Params()
    assert p.slack == 0.1 and p.epsilon == 0.05 and p.rho0 == 0.5 and p.beta is None


def test_build_F_without_section():
    with pytest.raises(ConfigError):
        parse_config("[E]\nkind = segment\na = 0 0\nb = 1 0\nn = 4\n").build_F()
