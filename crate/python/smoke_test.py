"""Smoke test for the pygaugelab extension.

Build it first, either with `maturin develop -m crates/python/Cargo.toml` or with
`cargo build --release -p pygaugelab --features extension-module`. In the second case
this script picks the shared library up from target/.
"""

import importlib.util
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load():
    try:
        import pygaugelab

        return pygaugelab
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libpygaugelab.so"
        if lib.exists():
            tmp = pathlib.Path(tempfile.mkdtemp())
            dst = tmp / "pygaugelab.so"
            shutil.copy(lib, dst)
            spec = importlib.util.spec_from_file_location("pygaugelab", dst)
            mod = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(mod)
            return mod
    sys.exit("pygaugelab is not built")


def main():
    gl = load()

    d = gl.Domain.unit_disk([(0.3, 0.1, 0.25)])
    assert d.n_obstacles == 1
    assert d.contains((-0.5, 0.0)) and not d.contains((0.3, 0.1))
    assert abs(d.interior_distance((0.0, -0.5)) - 0.5) < 1e-12

    vortex = gl.Potential({"name": "ab_vortex", "alpha": 0.5, "center": [0.3, 0.1]}, d)
    (hol,) = gl.generator_holonomies(vortex, d)
    assert abs(hol[0][0] + 1) < 1e-8, hol

    # gauge equivariance of the endpoint transport
    pot = gl.Potential({"name": "random_smooth", "m": 2, "seed": 3}, d)
    g = gl.Gauge({"name": "random_smooth", "m": 2, "seed": 4, "unitary": True}, d)
    pts = [(-0.8, -0.2), (-0.2, 0.5), (0.6, -0.6)]
    c0, _ = gl.transport(pot, pts, h=1e-3, richardson=False)
    c1, _ = gl.transport(pot.gauge_transform(g), pts, h=1e-3, richardson=False)

    def mul(a, b):
        return [[sum(a[i][k] * b[k][j] for k in range(2)) for j in range(2)] for i in range(2)]

    want = mul(mul(g.inverse().eval(pts[-1]), c0), g.eval(pts[0]))
    err = max(abs(want[i][j] - c1[i][j]) for i in range(2) for j in range(2))
    assert err < 1e-8, err

    ray = gl.trace(d, s=0.0, angle=0.05)
    assert len(ray) == 3, ray  # enters, bounces off the obstacle, leaves

    free = gl.Potential({"name": "zero", "m": 1}, gl.Domain.unit_disk())
    l = gl.dtn(gl.Domain.unit_disk(), free, k=2.0, n_b=9, h_grid=1 / 64)
    j = lambda n, x: sum((-1) ** k * (x / 2) ** (2 * k + n) / (math.factorial(k) * math.factorial(k + n)) for k in range(30))
    i0 = l.modes.index(0)
    lam0 = -2.0 * j(1, 2.0) / j(0, 2.0)
    assert abs(l.entries()[i0][i0] - lam0) / abs(lam0) < 0.02

    try:
        gl.Potential({"name": "ab_vortex", "alpha": 0.5}, d)
    except ValueError:
        pass
    else:
        raise AssertionError("missing center accepted")

    try:
        gl.dtn(gl.Domain.unit_disk(), free, k=2.0, n_b=9, h_grid=0.5)
    except gl.NumericalGuard:
        pass
    else:
        raise AssertionError("coarse grid accepted")

    print("pygaugelab smoke test ok (holonomy %.12f%+.1ei)" % (hol[0][0].real, hol[0][0].imag))


if __name__ == "__main__":
    main()
