import numpy as np
import pytest

from fieldrecon.field import (
    EmptyDataError,
    FieldFormatError,
    ScalarField,
    constant_field,
    error_map,
    field_to_state,
    gaussian_field,
    load_gridded_csv,
    save_gridded_csv,
    state_to_field,
    synthetic_salinity,
)
from fieldrecon.graph import build_chain, build_grid, build_grid as grid


def test_gaussian_examples():
    assert not gaussian_field(4, 4, amplitude=0.0).values.any()
    f = gaussian_field(10, 10, (0.5, 0.5), (0.2, 0.2), 1.0)
    assert f.values[0, 0] == pytest.approx(np.exp(-5.0625), rel=1e-14)
    v = f.values
    np.testing.assert_allclose(v, v[::-1], atol=1e-15)
    np.testing.assert_allclose(v, v[:, ::-1], atol=1e-15)
    np.testing.assert_allclose(v, v.T, atol=1e-15)
    with pytest.raises(ValueError):
        gaussian_field(3, 3, sigma=(0.0, 1.0))


def test_gaussian_peak_and_monotone_rays():
    f = gaussian_field(11, 9, center=(0.3, 0.6), sigma=(0.15, 0.25))
    xs, ys = f.coordinates()
    r0 = int(np.argmin(np.abs(ys - 0.6)))
    c0 = int(np.argmin(np.abs(xs - 0.3)))
    assert np.unravel_index(np.argmax(f.values), f.shape) == (r0, c0)
    row, col = f.values[r0], f.values[:, c0]
    assert np.all(np.diff(row[c0:]) < 0) and np.all(np.diff(row[:c0 + 1]) > 0)
    assert np.all(np.diff(col[r0:]) < 0) and np.all(np.diff(col[:r0 + 1]) > 0)


def test_field_to_state_examples():
    f = ScalarField([[0, 1], [2, 3]])
    np.testing.assert_array_equal(field_to_state(f, build_grid(2, 2)), [0, 1, 2, 3])
    np.testing.assert_array_equal(field_to_state(f, build_chain(4)), [0, 1, 3, 2])
    c = constant_field(3, 4, 2.5)
    np.testing.assert_array_equal(field_to_state(c, build_chain(12)), np.full(12, 2.5))
    with pytest.raises(ValueError):
        field_to_state(f, build_chain(5))


@pytest.mark.parametrize("shape", [(2, 2), (3, 4), (5, 3), (10, 10)])
def test_mapping_bijection_and_adjacency(shape):
    rng = np.random.default_rng(0)
    f = ScalarField(rng.normal(size=shape))
    n = shape[0] * shape[1]
    for g in (build_chain(n), grid(*shape)):
        np.testing.assert_array_equal(state_to_field(field_to_state(f, g), shape, g), f.values)
    # consecutive chain nodes sit in neighbouring cells
    idx = state_to_field(np.arange(n), shape, build_chain(n))
    pos = {int(idx[r, c]): (r, c) for r in range(shape[0]) for c in range(shape[1])}
    for i in range(n - 1):
        (r1, c1), (r2, c2) = pos[i], pos[i + 1]
        assert max(abs(r1 - r2), abs(c1 - c2)) == 1


def test_error_map():
    f = gaussian_field(4, 4)
    g = build_grid(4, 4)
    x = field_to_state(f, g)
    em = error_map(f, x, g)
    assert em.l2_relative == 0 and em.max_abs == 0
    em = error_map(f, x + 0.01, g)
    assert em.max_abs == pytest.approx(0.01)
    np.testing.assert_allclose(em.values, 0.01)
    em = error_map(f, field_to_state(f, build_chain(16)) - 0.1, build_chain(16))
    np.testing.assert_allclose(em.values, 0.1)
    assert em.summary["l2_relative"] == pytest.approx(0.4 / np.linalg.norm(f.values))


def test_csv_parse(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("0,1\n2,3\n")
    f = load_gridded_csv(p)
    np.testing.assert_array_equal(f.values, [[0, 1], [2, 3]])
    assert f.extent == (0.0, 1.0, 0.0, 1.0) and f.fill_count == 0


def test_csv_header_and_fill(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("# extent: -70,-60,30,40 units: psu\n1,2,3\n4,5,6\n7,8,\n")
    f = load_gridded_csv(p)
    assert f.extent == (-70.0, -60.0, 30.0, 40.0) and f.units == "psu"
    assert f.fill_count == 1
    assert f.values[2, 2] in (6.0, 8.0)
    p.write_text("NaN,1\n2,3\n")
    f = load_gridded_csv(p)
    assert f.fill_count == 1 and f.values[0, 0] in (1.0, 2.0)


def test_csv_errors(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("1,2\n3\n")
    with pytest.raises(FieldFormatError, match="line 2"):
        load_gridded_csv(p)
    p.write_text(",\nNaN,\n")
    with pytest.raises(EmptyDataError):
        load_gridded_csv(p)
    p.write_text("1,x\n3,4\n")
    with pytest.raises(FieldFormatError):
        load_gridded_csv(p)


def test_csv_roundtrip(tmp_path):
    f = synthetic_salinity(7, 5, extent=(-70.0, -60.0, 30.0, 40.0))
    p = tmp_path / "s.csv"
    save_gridded_csv(f, p)
    back = load_gridded_csv(p)
    np.testing.assert_array_equal(back.values, f.values)
    assert back.extent == f.extent and back.units == "psu"


def test_field_validation():
    with pytest.raises(ValueError):
        ScalarField(np.zeros((1, 5)))
    with pytest.raises(ValueError):
        ScalarField(np.zeros((2, 2)), extent=(0, 0, 0, 1))
    with pytest.raises(ValueError):
        ScalarField([[np.inf, 0], [0, 0]])
