"""Measured strong convergence rates.

Each scheme is compared with itself on a fine reference grid, driven by the
same Brownian path.  The fitted log-log slope estimates the strong order.
Pass a directory to also write CSV tables and SVG plots there.

    python3 demos/convergence_rates.py [outdir]
"""

import sys
from pathlib import Path

from tamedsde import make_model, run_convergence
from tamedsde.output import convergence_svg, write_convergence_csv

PATHS = 300
studies = [
    ("exp-psych", "euler", {}),
    ("exp-psych", "euler", {"beta": 1.0}),
    ("exp-psych", "milstein", {}),
    ("lorenz", "order15", {}),
    ("van-der-pol", "order15", {}),
]

outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else None
if outdir:
    outdir.mkdir(parents=True, exist_ok=True)

for name, scheme, overrides in studies:
    model = make_model(name, overrides)
    report = run_convergence(model, scheme, range(4, 10), 12, PATHS, seed=1)
    label = f"{scheme} on {name}" + (f" {overrides}" if overrides else "")
    print(f"{label:<40} sup slope {report.fitted_slope_sup:.3f}  "
          f"terminal slope {report.fitted_slope_terminal:.3f}")
    if outdir:
        stem = f"{name}-{scheme}" + "".join(f"-{k}{v}" for k, v in overrides.items())
        with open(outdir / f"{stem}.csv", "w", encoding="utf-8", newline="") as fh:
            write_convergence_csv(report, fh)
        (outdir / f"{stem}.svg").write_text(convergence_svg(report), encoding="utf-8")

print("\nWith beta = 0.2 the Euler error is still dominated by its O(h) drift part on")
print("these levels, so the fitted slope sits above one half; stronger noise reveals it.")
