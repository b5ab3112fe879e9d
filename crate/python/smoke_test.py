"""Smoke test for the pybnsl extension.

Build it first: `maturin develop --release -m crates/python/Cargo.toml`.
"""

import json
import math

import pybnsl


def main():
    law = pybnsl.BrokenPowerLaw(0.0, 1.0, 0.1, [(0.8, 100.0, 0.2)])
    y1, y2 = law([1.0, 1e4])
    assert math.isclose(y1, 1.0 * (1 + 0.01 ** 5) ** -0.16, rel_tol=1e-12), y1
    assert y2 < y1
    segments = law.decompose()
    assert len(segments) == 2
    assert math.isclose(segments[1][1], -0.9), segments

    xs = [10.0 ** (k / 4) for k in range(13)]
    ys = [2.0 * math.sqrt(x) for x in xs]
    result = pybnsl.fit(xs, ys, form="m1")
    a, b = result.params
    assert abs(a - 2.0) < 1e-6 and abs(b - 0.5) < 1e-6, result.params
    assert json.loads(result.to_json())["form"]["kind"] == "m1"

    truth = pybnsl.BrokenPowerLaw(0.0, 3.0, 0.4)
    ys = truth(xs)
    fitted = pybnsl.fit(xs, ys, form="bnsl", breaks=0, seed=7)
    assert fitted.bnsl() is not None
    assert pybnsl.rmsle(truth([1e5]), fitted.predict([1e5])) < 1e-6

    assert pybnsl.rmsle([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert pybnsl.root_standard_log_error([2.0], [3.0]) == 0.0

    report = json.loads(pybnsl.evaluate_task(xs[:10], ys[:10], xs[10:], ys[10:], max_breaks=0))
    assert report["winner"] in {"m1", "m2", "bnsl"}, report["winner"]

    try:
        pybnsl.fit([1.0, 2.0], [1.0, 2.0], form="bnsl", breaks=1)
    except ValueError:
        pass
    else:
        raise AssertionError("too few points accepted")
    print("pybnsl smoke test passed")


if __name__ == "__main__":
    main()
