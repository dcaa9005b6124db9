#include "cli/plots.h"

namespace cautious::cli {

std::string BoundPlotScript() {
  return R"PY(#!/usr/bin/env python3
# Plots bound.csv from the same directory: g, g_upper and every g_c column
# against z1 (first input coordinate), or against the row index when the
# grid is not one-dimensional.
import csv
import math
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "bound.csv"), newline="") as f:
    rows = list(csv.reader(f))
header, data = rows[0], [[float(x) for x in r] for r in rows[1:]]
if not data:
    sys.exit("bound.csv has no rows")
cols = {name: [r[i] for r in data] for i, name in enumerate(header)}
inputs = [h for h in header if h.startswith("z")]
x = cols["z1"] if len(inputs) == 1 else list(range(len(data)))

fig, ax = plt.subplots(figsize=(7, 4))
for name in header:
    if name == "g" or name == "g_upper" or name.startswith("g_c"):
        ys = [y if math.isfinite(y) else float("nan") for y in cols[name]]
        ax.plot(x, ys, label=name)
ax.set_xlabel("z1" if len(inputs) == 1 else "grid point")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "bound.png"), dpi=150)
)PY";
}

std::string OnlinePlotScript() {
  return R"PY(#!/usr/bin/env python3
# Plots every trace_*.csv in this directory: the certified bound per round
# (top) and the stopping gap and probe uncertainty on a log scale (bottom).
import csv
import glob
import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
for path in sorted(glob.glob(os.path.join(here, "trace_*.csv"))):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    k = [int(float(r["k"])) for r in rows]
    top.plot(k, [float(r["bound"]) for r in rows], lw=0.8)
    bottom.semilogy(k, [max(float(r["probe_uncertainty"]), 1e-16) for r in rows], lw=0.8)
    gaps = [(kk, float(r["gap"])) for kk, r in zip(k, rows) if math.isfinite(float(r["gap"]))]
    if gaps:
        bottom.semilogy([g[0] for g in gaps], [max(g[1], 1e-16) for g in gaps], "k.", ms=3)
top.set_ylabel("certified bound")
bottom.set_ylabel("probe uncertainty / gap")
bottom.set_xlabel("round")
fig.tight_layout()
fig.savefig(os.path.join(here, "online.png"), dpi=150)
)PY";
}

}  // namespace cautious::cli
