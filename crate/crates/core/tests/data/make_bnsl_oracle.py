"""Writes bnsl_oracle.csv: broken power law values at 60-digit precision.

Columns: a, b, c0, then (c, d, f) for up to two breaks (empty when unused),
x, y. Rerun with `python3 make_bnsl_oracle.py` from this directory.
"""

import random
from pathlib import Path

import mpmath as mp

mp.mp.dps = 60
rng = random.Random(20240517)


def bnsl(x, a, b, c0, breaks):
    x = mp.mpf(x)
    log_y = mp.log(b) - c0 * mp.log(x)
    for c, d, f in breaks:
        log_y -= c * f * mp.log1p((x / d) ** (1 / mp.mpf(f)))
    return a + mp.e ** log_y


def logu(lo, hi):
    return 10 ** rng.uniform(lo, hi)


rows = []
for i in range(400):
    n = i % 3
    a = 0.0 if i % 4 == 0 else rng.uniform(0, 2)
    b = logu(-2, 2)
    c0 = rng.uniform(-0.5, 1.5)
    breaks = []
    lo = 0.0
    for _ in range(n):
        lo = rng.uniform(lo + 0.5, lo + 3)
        f = logu(-3, 1) if i % 5 else 1e-3
        breaks.append((rng.uniform(-1.0, 2.0), 10**lo, f))
    x = logu(-1, 8)
    y = bnsl(x, mp.mpf(a), mp.mpf(b), mp.mpf(c0), [(mp.mpf(c), mp.mpf(d), mp.mpf(f)) for c, d, f in breaks])
    cells = [repr(a), repr(b), repr(c0)]
    for k in range(2):
        cells += [repr(v) for v in breaks[k]] if k < n else ["", "", ""]
    cells += [repr(x), mp.nstr(y, 25, min_fixed=1, max_fixed=0)]
    rows.append(",".join(cells))

out = Path(__file__).with_name("bnsl_oracle.csv")
out.write_text("a,b,c0,c1,d1,f1,c2,d2,f2,x,y\n" + "\n".join(rows) + "\n")
