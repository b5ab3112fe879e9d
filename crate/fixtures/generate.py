"""Regenerates the synthetic fixtures from their closed forms.

Values are computed with mpmath at 50 digits and written with repr-level
precision, so the files are independent of the Rust evaluator.
"""

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50
HERE = Path(__file__).resolve().parent


def bnsl(x, a, b, c0, breaks):
    x = mp.mpf(x)
    y = b * x ** (-c0)
    for c, d, f in breaks:
        y *= (1 + (x / d) ** (mp.mpf(1) / f)) ** (-c * f)
    return a + y


def logspace(lo, hi, n):
    lo, hi = mp.log(lo), mp.log(hi)
    return [float(mp.e ** (lo + (hi - lo) * i / (n - 1))) for i in range(n)]


def write_series(path, xs, fn, n_train):
    lines = ["x,y,split"]
    for i, x in enumerate(xs):
        split = "train" if i < n_train else "test"
        lines.append(f"{x!r},{float(fn(x))!r},{split}")
    path.write_text("\n".join(lines) + "\n")


TASKS = {
    "power_law": ("other", lambda x: bnsl(x, 0, 3, mp.mpf("0.4"), [])),
    "smooth_break": ("other", lambda x: bnsl(x, mp.mpf("0.01"), 1, mp.mpf("0.1"), [(mp.mpf("0.6"), 1000, mp.mpf("0.5"))])),
    "sharp_break": ("other", lambda x: bnsl(x, mp.mpf("0.005"), 1, mp.mpf("0.1"), [(mp.mpf("0.8"), 1000, mp.mpf("0.02"))])),
    "double_descent": (
        "other",
        lambda x: bnsl(x, 0, 2, mp.mpf("0.5"), [(mp.mpf("-1.0"), 100, mp.mpf("0.1")), (mp.mpf("1.5"), 1000, mp.mpf("0.1"))]),
    ),
}


def main():
    xs = logspace(10, 1e5, 40)
    manifest = {"tasks": []}
    for name, (domain, fn) in TASKS.items():
        write_series(HERE / "bench" / f"{name}.csv", xs, fn, 30)
        manifest["tasks"].append({"name": name, "domain": domain, "path": f"{name}.csv"})
    (HERE / "bench" / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    write_series(HERE / "pow.csv", logspace(1, 1000, 12), lambda x: 2 * mp.sqrt(x), 9)

    sweep = {
        "truth": {"a": 0.0, "b": 1.0, "c0": 0.05, "breaks": [{"c": 1.0, "d": 415.0, "f": 0.01}]},
        "xGrid": logspace(10, 2000, 100),
        "fitMaxCandidates": [100.0, 200.0, 300.0, 400.0, 450.0, 600.0, 1000.0],
        "testRange": {"xLow": 1500.0, "xHigh": 20000.0, "count": 10},
        "successRmsle": 0.01,
    }
    (HERE / "sweep_415.json").write_text(json.dumps(sweep, indent=2) + "\n")


if __name__ == "__main__":
    main()
