import numpy as np
import pytest

from morsecx.catalog import double_well
from morsecx.errors import SpecError
from morsecx.morse.restpoints import find_rest_points
from morsecx.specfile import load, loads, parse_builtin

CUSTOM = '''name = "wells"

[custom]
dim = 2
lyapunov = "(x1^2 - 1)^2 + x2^2"
seeds = [[1.2, 0.1], [-0.8, 0.0], [0.1, 0.1]]
lo = [-2, -2]
hi = [2, 2]
'''


@pytest.mark.parametrize("text, name, params", [
    ("sphere_height", "sphere_height", {}),
    ("ex2_quadratic(10, 0.01)", "ex2_quadratic", {"K": 10, "eps": 0.01}),
    ("tilted_torus(2.0, 1.0, 0.2)", "tilted_torus", {"R": 2.0, "r": 1.0, "tilt": 0.2}),
    (" costra( 3 , 2 ) ", "costra", {"n_half": 3, "k": 2}),
])
def test_parse_builtin(text, name, params):
    assert parse_builtin(text) == (name, params)


@pytest.mark.parametrize("text", ["klein_bottle", "costra(1, 2, 3)", "costra('a', 1)", "costra(3,", "2x"])
def test_parse_builtin_errors(text):
    with pytest.raises(SpecError):
        parse_builtin(text)


def test_builtin_defaults_and_params_table():
    spec = loads('builtin = "costra"\n')
    assert spec.kind == "linear" and spec.params == {"n_half": 3, "k": 1}
    spec = loads('builtin = "pinched_sphere"\n[params]\nalpha = 0.7\n')
    assert spec.params == {"alpha": 0.7}
    assert loads('builtin = "exc_field"').params == {"K": 20}


# value errors point at their key; TOML syntax errors at the offending character
@pytest.mark.parametrize("text, line, col", [
    ('builtin = "sphere_height"\ncolour = 3\n', 2, 1),
    ('builtin = "costra(2, 3)"\n', 1, 1),
    ('builtin = "sphere_height"\n[tolerances]\nrtol = -1\n', 3, 1),
    ('builtin = "sphere_height"\n[tolerances]\nwobble = 1e-3\n', 3, 1),
    ('builtin = "sphere_height"\n[run]\nseed = -2\n', 3, 1),
    ('builtin = "sphere_height"\n[run]\nthreads = 0\n', 3, 1),
    ('builtin = "pinched_sphere"\n[debug]\nflip = [0, 1]\n', 3, 1),
    ('builtin = "sphere_height\n', 1, 25),
    ('builtin = = 3\n', 1, 11),
])
def test_errors_point_at_key(text, line, col):
    with pytest.raises(SpecError) as err:
        loads(text)
    assert (err.value.line, err.value.column) == (line, col)


def test_builtin_and_custom_are_exclusive():
    with pytest.raises(SpecError):
        loads('builtin = "sphere_height"\n' + CUSTOM.split("\n", 1)[1])
    with pytest.raises(SpecError):
        loads('name = "empty"\n')


def test_custom_matches_builtin():
    spec = loads(CUSTOM)
    assert spec.name == "wells" and spec.kind == "morse"
    rps = find_rest_points(spec.build())
    ref = find_rest_points(double_well())
    assert sorted(p.morse_index for p in rps) == sorted(p.morse_index for p in ref)
    got = sorted(tuple(np.round(p.location, 8)) for p in rps)
    assert got == sorted(tuple(np.round(p.location, 8)) for p in ref)


def test_custom_expression_error_position():
    text = CUSTOM.replace('"(x1^2 - 1)^2 + x2^2"', '"(x1^2 - 1)^2 + * x2^2"')
    with pytest.raises(SpecError) as err:
        loads(text)
    # the '*' in the lyapunov string, counted in the file
    assert (err.value.line, err.value.column) == (5, 28)


def test_custom_field_error_position():
    text = CUSTOM + 'field = ["-4*x1*(x1^2 - 1)",\n         "-2*x3"]\n'
    with pytest.raises(SpecError) as err:
        loads(text)
    assert (err.value.line, err.value.column) == (10, 14)


@pytest.mark.parametrize("old, new", [
    ("seeds = [[1.2, 0.1]", "seeds = [[3.2, 0.1]"),
    ("dim = 2", "dim = 0"),
    ("lo = [-2, -2]", "lo = [-2, -2, 0]"),
    ("hi = [2, 2]", "hi = [2, -3]"),
    ("lo = [-2, -2]\n", "lo = [-2, -2]\ncomparison_V = [3]\n"),
    ("lo = [-2, -2]\n", "lo = [-2, -2]\nbogus = 1\n"),
    ('lyapunov = "(x1^2 - 1)^2 + x2^2"', 'lyapunov = "log(x1 - 5)"'),
])
def test_custom_validation(old, new):
    with pytest.raises(SpecError) as err:
        loads(CUSTOM.replace(old, new))
    assert err.value.line is not None


def test_tolerances_and_scale():
    spec = loads('builtin = "double_well"\n[tolerances]\norbit = 2e-3\n')
    p = spec.build(tol_scale=0.5)
    assert p.tol.orbit == pytest.approx(1e-3)
    assert p.tol.rtol == pytest.approx(0.5e-10)


def test_run_and_debug_tables():
    spec = loads('builtin = "pinched_sphere"\n[run]\nseed = 4\nthreads = 2\ntol_scale = 0.5\n'
                 '[debug]\nflip = [0, 1, 0]\n')
    assert spec.run == {"seed": 4, "threads": 2, "tol_scale": 0.5}
    assert spec.flip == (0, 1, 0)


def test_load_missing_file(tmp_path):
    with pytest.raises(SpecError):
        load(tmp_path / "nothing.toml")


def test_load_file_uses_stem(tmp_path):
    path = tmp_path / "mywells.toml"
    path.write_text(CUSTOM.replace('name = "wells"\n', ""))
    assert load(path).name == "mywells"
