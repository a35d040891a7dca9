"""Smoke test for the homtype Python module.

Build the module and put it on the path first, for example:

    cargo build --release -p homtype-python --features extension-module
    cp target/release/libhomtype_py.so python/homtype.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import homtype  # noqa: E402

CONFIG = """
space = "grid:dim=1,side=16,spacing=0.0625,mass=uniform"
exponent = "ramp:p_inf=2,c=0.5"
weight = "power:a=0.25"
refinement = [8, 16, 32]
seed = 7

[family]
random = 8
"""


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    space = homtype.Space.generate("grid:dim=1,side=16,spacing=1,mass=uniform")
    n = space.n
    assert n == 16 and len(space) == 16
    close(space.quasimetric_constant(), 1.0, 0.0)
    assert space.doubling_constant() >= 1.0
    assert space.ball(0, 2.5) == [0, 1, 2]

    hand = homtype.Space([[0.0, 1.0], [1.0, 0.0]], [1.0, 1.0])
    close(hand.d(0, 1), 1.0, 0.0)

    p = homtype.Exponent.constant(n, 2.0)
    f = [1.0 if i < 4 else 0.0 for i in range(n)]
    close(homtype.luxemburg_norm(space, p, f, 1e-12), 2.0, 1e-8)
    close(homtype.modular(space, p, [v / 2.0 for v in f]), 1.0, 1e-12)

    ramp = homtype.Exponent.generate(space, "ramp:p_inf=2,c=0.5")
    assert 1.0 < ramp.p_minus <= ramp.p_plus
    assert ramp.lh0_constant(space) >= 0.0
    q = ramp.conjugate()
    for a, b in zip(ramp.values, q.values):
        close(1.0 / a + 1.0 / b, 1.0, 1e-12)

    w = homtype.Weight.generate(space, "power:a=0.25")
    c, ball = homtype.apq_constant(space, ramp, w)
    assert c >= 1.0 - 1e-9 and ball["members"]
    c1, _ = homtype.apq_constant(space, p, homtype.Weight.unit(n))
    close(c1, 1.0, 1e-8)

    grid = homtype.Grid.build(space, seed=0)
    report = grid.verify(space)
    assert all(check["pass"] for check in report["checks"]), report
    cubes = grid.cubes()
    top = [cube for cube in cubes if cube["parent"] is None]
    assert len(top) == 1 and len(top[0]["members"]) == n

    hl = homtype.hl_maximal(space, f)
    dm = homtype.dyadic_maximal(space, grid, f)
    assert all(a >= b - 1e-12 for a, b in zip(hl, f))
    assert all(a >= b - 1e-12 for a, b in zip(dm, f))

    weak = homtype.weak11_check(space, grid, f)
    assert weak["worst_ratio"] <= 1.0 + 1e-12
    assert homtype.strongpp_check(space, grid, f, 2.0) <= homtype.strongpp_bound(2.0)
    ratio, _ = homtype.domination_check(space, f)
    assert math.isfinite(ratio) and ratio > 0.0

    cz = homtype.cz_at_height(space, grid, f, 0.5)
    assert cz["exact_cover"] and cz["maximal"]
    fam = homtype.sparse_family(space, grid, f, 4.0)
    assert fam["disjoint"]

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "grid.json")
        grid.save(path)
        again = homtype.Grid.load(path)
        assert again.cubes() == cubes
        spath = os.path.join(d, "space.json")
        space.save(spath)
        assert homtype.Space.load(spath).to_json() == space.to_json()

    try:
        homtype.luxemburg_norm(space, p, [1.0, 2.0])
    except ValueError:
        pass
    else:
        raise AssertionError("length mismatch accepted")

    first = homtype.run_experiment("blowup", CONFIG)
    second = homtype.run_experiment("blowup", CONFIG)
    assert first == second
    assert all(a["pass"] for a in first["assertions"]), first["assertions"]
    print("smoke test passed:", first["classification"], [round(s["apq"], 3) for s in first["summaries"]])


if __name__ == "__main__":
    main()
