"""Smoke test for the cwtori_py extension.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o dist && pip install dist/cwtori-*.whl
"""

import cmath
import math

import cwtori_py


def main():
    t = cwtori_py.Torus("clifford", 32, 32, eta="cmc:0.5")
    print(t, t.dims)

    a = t.analyze()
    assert a["deg_perp"] == 0
    assert abs(a["willmore_energy"] - a["willmore_energy_q"]) < 1e-8
    assert abs(a["willmore_energy"] - 2 * math.pi**2) < 1e-8

    assert t.classify()["label"] == "II"
    assert cwtori_py.Torus("clifford", 32, 32, eta="cmc:0").classify()["label"] == "I"

    mu = cmath.rect(0.5, 0.7)
    e1, e2 = t.holonomy(mu)
    assert abs(e1[0] * e1[1] * e1[2] * e1[3] - 1) < 1e-8
    f1, _ = t.holonomy(1 / mu.conjugate())
    assert max(min(abs(x - y.conjugate()) for y in f1) for x in e1) < 1e-7

    pts, quality = t.darboux(complex(0.8, 0.9))
    assert len(pts) == 32 * 32 and not quality["degenerate"]
    _, q1 = t.darboux(1.0)
    assert q1["degenerate"]

    pairs = t.harmonic_pairs([cmath.rect(0.5, 2 * math.pi * k / 8 + 0.1) for k in range(8)])
    assert max(p["distance"] for p in pairs) < 1e-6

    try:
        cwtori_py.Torus("homogeneous", 16, 16, r=1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("r outside (0, 1) accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
