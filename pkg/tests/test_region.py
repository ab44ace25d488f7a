import csv
import io
import json
import math
import random

import numpy as np
import pytest

from parrondo.chains import GameParams
from parrondo.region import (
    CSV_HEADER,
    ProfitEvaluator,
    classify,
    classify_values,
    fair_surface,
    inverted_columns,
    lattice,
    scan,
)
from parrondo.solver import mu_exact, mu_li

TORAL = (1.0, 0.16, 0.7)


@pytest.fixture(scope="module")
def mesh_b():
    return fair_surface(4, 0.5, "B", "exact", resolution=10)


@pytest.fixture(scope="module")
def mesh_b_li():
    return fair_surface(4, 0.5, "B", "li", resolution=10)


def test_classify_values():
    assert classify_values(-0.1, 0.2) == "parrondo"
    assert classify_values(0.0, 0.2) == "parrondo"
    assert classify_values(0.1, -0.2) == "anti_parrondo"
    assert classify_values(0.1, 0.2) == "neither"
    assert classify_values(-0.1, -0.2) == "neither"
    assert classify_values(0.0, 0.0) == "neither"


def test_classification_examples():
    assert classify(GameParams(*TORAL, 0.5, 5)).classification == "parrondo"
    assert classify(GameParams(*TORAL, 0.5, 4)).classification == "neither"
    assert classify(GameParams(0.5, 0.5, 0.5, 0.5, 6)).classification == "neither"
    pt = classify(GameParams(0.0, 0.5, 1.0, 0.5, 4))
    assert pt.classification == "error" and math.isnan(pt.mu_B) and pt.message


@pytest.mark.parametrize("engine", ["exact", "li"])
@pytest.mark.parametrize("N", [3, 4, 7])
def test_evaluator_matches_solver(N, engine):
    ev = ProfitEvaluator(N, 0.5, engine)
    solve = mu_exact if engine == "exact" else mu_li
    rng = random.Random(N)
    for _ in range(5):
        p = (rng.random(), rng.random(), rng.random())
        params = GameParams(*p, 0.5, N)
        for game in ("B", "C'"):
            assert ev.mu(p[0], p[1], p[2], game) == pytest.approx(solve(params, game).mu, abs=1e-13)
        pt = ev.classify(*p)
        assert pt.classification == classify(params, engine).classification


def test_evaluator_rejects_other_targets():
    with pytest.raises(ValueError):
        ProfitEvaluator(4, 0.5, "exact").mu(0.1, 0.2, 0.3, "C")
    with pytest.raises(ValueError):
        ProfitEvaluator(4, 0.5, "full")


def test_lattice_order():
    pts = lattice(2)
    assert len(pts) == 27
    assert pts[:3] == [(0.0, 0.0, 0.0), (0.0, 0.0, 0.5), (0.0, 0.0, 1.0)]
    assert pts[3] == (0.0, 0.5, 0.0)
    with pytest.raises(ValueError):
        lattice(0)


def test_corner_scan_completes():
    res = scan(3, 0.5, resolution=1)
    assert len(res.points) == 8
    assert {pt.classification for pt in res.points} <= {"parrondo", "anti_parrondo", "neither", "error"}
    assert res.grid().shape == (2, 2, 2)


def test_scan_order_is_independent_of_workers():
    a = scan(4, 0.5, resolution=4, workers=1)
    b = scan(4, 0.5, resolution=4, workers=2)
    assert a.to_csv() == b.to_csv()


def test_scan_csv_and_json():
    R = 3
    res = scan(4, 0.5, resolution=R)
    rows = list(csv.reader(io.StringIO(res.to_csv())))
    assert rows[0] == CSV_HEADER
    assert len(rows) - 1 == (R + 1) ** 3
    # the Parrondo count is reproducible from the exported values
    for row in rows[1:]:
        if row[5] != "error":
            assert row[5] == classify_values(float(row[3]), float(row[4]))
    d = json.loads(json.dumps(res.to_dict()))
    assert d["N"] == 4 and d["resolution"] == R and len(d["points"]) == (R + 1) ** 3
    assert set(d["points"][0]) == {"p0", "p2", "p1", "mu_B", "mu_C", "class"}


def test_approximate_engine_changes_some_classifications():
    a = scan(4, 0.5, resolution=5, engine="exact").grid()
    b = scan(4, 0.5, resolution=5, engine="li").grid()
    assert (a != b).any()


# -- fair surfaces -------------------------------------------------------------------------------

def test_surface_points_are_bracketed_roots(mesh_b):
    ev = ProfitEvaluator(4, 0.5, "exact")
    assert mesh_b.points
    for pt in mesh_b.points:
        assert pt.lo <= pt.p1 <= pt.hi
        assert np.sign(ev.mu(pt.p0, pt.lo, pt.p2)) * np.sign(ev.mu(pt.p0, pt.hi, pt.p2)) <= 0
        assert abs(pt.mu) <= mesh_b.tol
        assert abs(ev.mu(pt.p0, pt.p1, pt.p2)) <= mesh_b.tol


def test_known_columns(mesh_b, mesh_b_li):
    # the symmetric column is fair exactly at p1 = 1/2
    assert mesh_b.column(0.5, 0.5) == pytest.approx([0.5], abs=1e-12)
    # through the tabulated point game B wins for every p1 while its approximation crosses zero
    assert mesh_b.column(1.0, 0.7) == []
    (root,) = mesh_b_li.column(1.0, 0.7)
    assert 0.16 < root < 0.5
    assert ProfitEvaluator(4, 0.5, "li").mu(1.0, root, 0.7) == pytest.approx(0, abs=1e-10)


def test_refinement_keeps_the_coarse_roots(mesh_b):
    coarse = fair_surface(4, 0.5, "B", "exact", resolution=5)
    fine = mesh_b.columns()
    for (p0, p2), roots in coarse.columns().items():
        for r in roots:
            assert min(abs(r - s) for s in fine[(p0, p2)]) <= 1e-9


def test_engines_give_different_surfaces(mesh_b, mesh_b_li):
    li = mesh_b_li
    assert li.tag == "B-approx" and mesh_b.tag == "B"
    exact_cols, li_cols = mesh_b.columns(), li.columns()
    gap = max(abs(exact_cols[k][0] - li_cols[k][0]) for k in exact_cols.keys() & li_cols.keys())
    assert gap > 0.05


def test_mesh_serialization(mesh_b):
    d = json.loads(mesh_b.to_json())
    assert d["version"] == 1 and d["target"] == "B" and d["engine"] == "exact"
    assert len(d["points"]) == len(d["brackets"]) == len(mesh_b.points)
    assert mesh_b.triples().shape == (len(mesh_b.points), 3)


def test_fair_surface_rejects_other_games():
    with pytest.raises(ValueError):
        fair_surface(4, 0.5, "C", resolution=2)


def test_inverted_columns_uses_majority_per_side():
    gap = {(0.1, 0.2): 0.1, (0.2, 0.2): 0.2, (0.3, 0.1): -0.05,
           (0.9, 0.8): -0.1, (0.8, 0.8): -0.3, (0.7, 0.9): 0.01,
           (0.5, 0.5): 0.4}
    assert inverted_columns(gap) == [(0.3, 0.1), (0.7, 0.9)]
