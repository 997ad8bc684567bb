import itertools
from fractions import Fraction

import pytest

from oracles import DOE_FIRST_ROWS, DOE_GRID_CSV
from stabex.doe import (
    DoeError,
    FactorGrid,
    distinct_per_column,
    full_factorial,
    generate,
    latin_hypercube,
    load_grid,
    rows_within,
    save_matrix,
    sukharev_grid,
    uniform_random,
)

F = Fraction


@pytest.fixture
def grid(tmp_path):
    p = tmp_path / "grid.csv"
    p.write_text(DOE_GRID_CSV)
    return load_grid(p)


def test_grid_ragged_columns(grid):
    assert grid.labels == ["a", "b", "c"]
    assert [len(v) for _, v in grid.factors] == [4, 3, 4]


def test_full_factorial_golden(grid, tmp_path):
    m = full_factorial(grid)
    assert len(m) == 48
    assert [tuple(float(v) for v in r) for r in m.rows[:9]] == DOE_FIRST_ROWS
    # every combination exactly once
    levels = [set(v) for _, v in grid.factors]
    assert set(m.rows) == set(itertools.product(*levels))
    save_matrix(m, tmp_path / "out.csv")
    lines = (tmp_path / "out.csv").read_text().splitlines()
    assert lines[:3] == ["a,b,c", "2.3,-1,0.1", "3.6,-1,0.1"]
    assert len(lines) == 49


def test_latin_hypercube_distinct(grid):
    for seed in range(20):
        m = latin_hypercube(grid, 3, seed)
        assert len(m) == 3 and distinct_per_column(m)
        for col, (_, vals) in zip(zip(*m.rows), grid.factors):
            assert set(col) <= set(vals)


def test_latin_hypercube_limits(grid):
    with pytest.raises(DoeError, match="shortest"):
        latin_hypercube(grid, 4)
    assert len(latin_hypercube(grid, 0)) == 0
    assert latin_hypercube(grid, 3, 7) == latin_hypercube(grid, 3, 7)


def test_sukharev_examples():
    g = FactorGrid.of({"a": [0, 1]})
    assert [r[0] for r in sukharev_grid(g, 2).rows] == [F(1, 4), F(3, 4)]
    g2 = FactorGrid.of({"a": [0, 1], "b": [0, 2]})
    m = sukharev_grid(g2, 5)
    assert len(m) == 4
    assert set(m.rows) == {(a, b) for a in (F(1, 4), F(3, 4)) for b in (F(1, 2), F(3, 2))}
    assert len(sukharev_grid(g2, 1)) == 1 and len(sukharev_grid(g2, 9)) == 9


def test_uniform_random(grid):
    m = uniform_random(grid, 50, seed=3)
    assert len(m) == 50 and rows_within(m, grid)
    assert m == uniform_random(grid, 50, seed=3)
    assert m != uniform_random(grid, 50, seed=4)
    assert len(uniform_random(grid, 0)) == 0


def test_generate_dispatch(grid):
    assert len(generate("full_factorial", grid)) == 48
    with pytest.raises(DoeError, match="sample count"):
        generate("sukharev", grid)
    with pytest.raises(DoeError, match="unsupported"):
        generate("box_behnken", grid, 4)


def test_bad_grid_files(tmp_path):
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(DoeError, match="empty"):
        load_grid(tmp_path / "e.csv")
    (tmp_path / "n.csv").write_text("a\nfoo\n")
    with pytest.raises(DoeError, match="non-numeric"):
        load_grid(tmp_path / "n.csv")
    (tmp_path / "d.csv").write_text("a,a\n1,2\n")
    with pytest.raises(DoeError, match="duplicate"):
        load_grid(tmp_path / "d.csv")
