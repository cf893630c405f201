#!/usr/bin/env python3
"""
C2: Design trends of the aligned OAM link.
=========================================

Sweeps the design parameters of the aligned link one family at a time and
checks the trend each sweep is expected to show:

  fig4a  N_t, N_r in 1..20 (R = 50 mm)   capacity grows with N_t at fixed N_r
  fig4b  D in 0..50 mm                   capacity falls with D, ever more slowly,
                                         and stays inside its upper/lower limits
  fig4c  R_t, R_r in 20..100 mm          R_t = R_r beats off-diagonal pairs of equal sum
  fig4d  r_t, r_r in 0..15 mm (R = 15)   capacity grows with r_r, increments shrink
  fig10  N_t, N_r in 1..20 (R = 50 mm)   LS OAM capacity minus correlated MIMO capacity

Infeasible corners (overlapping coils, zero radii, coincident rings at D = 0)
are kept in the tables with their reason and left out of the checks.

Run:
    python c2_design_trends.py --n_jobs 8

Outputs (outputs/):
    c2-fig4a.csv ... c2-fig10.csv
    c2-trend-checks.csv
    c2-design-trends-FINDING.md
"""

import argparse
import sys
import time
import warnings
from pathlib import Path

CODE_DIR = Path(__file__).resolve().parent
sys.path.insert(0, str(CODE_DIR))

import numpy as np
import pandas as pd

from src import config
from src.harness import recipe, run_sweep, write_result

RECIPES = ("fig4a", "fig4b", "fig4c", "fig4d", "fig10")


# ----------------------------------------------------------------------------
# Trend checks (each returns (passed, detail))
# ----------------------------------------------------------------------------

def check_distance(table):
    t = table[(table["geometry.axial_distance_mm"] >= 5)].dropna(subset=["capacity_oam_simplified"])
    t = t.sort_values("geometry.axial_distance_mm")
    c = t["capacity_oam_simplified"].to_numpy()
    steps = np.diff(c)
    decreasing = bool(np.all(steps < 0))
    slowing = bool(np.mean(np.abs(steps[len(steps) // 2:])) < np.mean(np.abs(steps[:len(steps) // 2])))
    return decreasing and slowing, (f"{len(c)} points, strictly decreasing={decreasing}, "
                                    f"late steps smaller={slowing}")


def check_bounds(table):
    t = table.dropna(subset=["capacity_oam_simplified", "bounds_lower", "bounds_upper"])
    slack = 1e-9 * np.maximum(1.0, t["capacity_oam_simplified"].abs())
    inside = ((t["bounds_lower"] - slack <= t["capacity_oam_simplified"])
              & (t["capacity_oam_simplified"] <= t["bounds_upper"] + slack))
    return bool(inside.all()), f"{int(inside.sum())}/{len(t)} points inside [lower, upper]"


def check_coil_count(table):
    t = table.dropna(subset=["capacity_ls"])
    pivot = t.pivot(index="geometry.n_rx", columns="geometry.n_tx", values="capacity_ls")
    violations = 0
    rows = 0
    for n_rx, row in pivot.iterrows():
        values = row.dropna().to_numpy()
        if len(values) < 2:
            continue
        rows += 1
        violations += int(np.any(np.diff(values) <= 0))
    return violations == 0, f"{rows - violations}/{rows} N_r rows increase with N_t"


def check_ring_radius(table):
    t = table.dropna(subset=["capacity_oam_simplified"])
    t = t.assign(total=(t["geometry.ring_radius_tx_mm"] + t["geometry.ring_radius_rx_mm"]).round(6),
                 diagonal=np.isclose(t["geometry.ring_radius_tx_mm"], t["geometry.ring_radius_rx_mm"]))
    wins = 0
    groups = 0
    for _, g in t.groupby("total"):
        diag = g[g["diagonal"]]
        off = g[~g["diagonal"]]
        if diag.empty or off.empty:
            continue
        groups += 1
        wins += int(diag["capacity_oam_simplified"].iloc[0] > off["capacity_oam_simplified"].max())
    return wins == groups and groups > 0, f"diagonal wins in {wins}/{groups} equal-sum groups"


def check_coil_radius(table):
    t = table.dropna(subset=["capacity_oam_simplified"])
    r_t = sorted(t["geometry.coil_radius_tx_mm"].unique())
    if not r_t:
        return False, "no feasible points"
    col = t[t["geometry.coil_radius_tx_mm"] == r_t[len(r_t) // 2]].sort_values("geometry.coil_radius_rx_mm")
    c = col["capacity_oam_simplified"].to_numpy()
    steps = np.diff(c)
    increasing = bool(np.all(steps > 0))
    shrinking = bool(len(steps) > 2 and steps[-1] < steps[0])
    return increasing and shrinking, (f"r_t = {r_t[len(r_t) // 2]:.2f} mm: {len(c)} points, "
                                      f"increasing={increasing}, increments shrink={shrinking}")


CHECKS = {
    "fig4a": [("capacity increases with N_t", check_coil_count)],
    "fig4b": [("capacity decreases with D, slowing", check_distance),
              ("capacity inside its limits", check_bounds)],
    "fig4c": [("R_t = R_r dominates", check_ring_radius)],
    "fig4d": [("capacity increases with r_r, slowing", check_coil_radius)],
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=config.RANDOM_SEED)
    ap.add_argument("--n_jobs", type=int, default=config.N_JOBS)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()

    config.OUTPUTS_DIR.mkdir(parents=True, exist_ok=True)
    t_start = time.time()
    results = {}
    checks = []
    for name in RECIPES:
        spec = recipe(name, seed=args.seed)
        print(f"\n=== {name}: {spec.description} ({len(spec.grid())} points) ===")
        t0 = time.time()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            result = run_sweep(spec, n_jobs=args.n_jobs)
        results[name] = result
        out = write_result(result, config.OUTPUTS_DIR / f"c2-{name}.csv", json_mirror=args.json)
        print(f"  {len(result.evaluated)} evaluated, {len(result.skipped)} skipped "
              f"({time.time()-t0:.1f}s)")
        for label, fn in CHECKS.get(name, []):
            passed, detail = fn(result.table)
            checks.append({"recipe": name, "check": label, "passed": passed, "detail": detail})
            print(f"  [{'ok' if passed else 'FAIL'}] {label}: {detail}")
        print(f"  Saved {out}")

    gap = results["fig10"].evaluated
    diag = gap[gap["geometry.n_tx"] == gap["geometry.n_rx"]].sort_values("geometry.n_tx")
    positive = int((gap["capacity_gap"] > 0).sum())
    print(f"\nfig10: OAM ahead of MIMO at {positive}/{len(gap)} feasible (N_t, N_r) points")

    checks_df = pd.DataFrame(checks)
    out_csv = config.OUTPUTS_DIR / "c2-trend-checks.csv"
    with open(out_csv, "w") as f:
        f.write(f"# trend checks of the design sweeps; seed {args.seed}\n")
        checks_df.to_csv(f, index=False, lineterminator="\n")
    print(f"Saved {out_csv}")

    L = []
    L.append("# C2 -- Design trends of the aligned OAM link\n")
    L.append(f"_seed {args.seed}; capacity in bits/s/Hz; infeasible points skipped._\n")
    L.append("## Trend checks\n")
    L.append("| sweep | check | result | detail |")
    L.append("|---|---|---|---|")
    for c in checks:
        L.append(f"| {c['recipe']} | {c['check']} | {'pass' if c['passed'] else '**FAIL**'} | "
                 f"{c['detail']} |")
    L.append("")

    L.append("## Capacity gap to correlated MIMO (fig10)\n")
    L.append(f"- OAM (LS, perfect CSI) is ahead of MIMO at **{positive}/{len(gap)}** feasible "
             "(N_t, N_r) points.")
    if not diag.empty:
        L.append("- Along N_t = N_r: " + ", ".join(
            f"N={int(r['geometry.n_tx'])}: {r['capacity_gap']:+.2f}" for _, r in diag.iterrows()
            if int(r["geometry.n_tx"]) in (1, 2, 4, 8, 12, 16, 20)))
    L.append("- MIMO uses the normalised coil-coupling correlation, so the "
             "sign of the gap is conditional on that model.\n")

    L.append("## Skipped points\n")
    for name, result in results.items():
        L.append(f"- {name}: {len(result.skipped)} of {len(result.table)}")
    L.append("")
    L.append("## Files\n")
    L.append("- `c2-<recipe>.csv` -- one table per sweep")
    L.append("- `c2-trend-checks.csv` -- pass/fail of each check")
    L.append("- `code/c2_design_trends.py`")

    out_md = config.OUTPUTS_DIR / "c2-design-trends-FINDING.md"
    out_md.write_text("\n".join(L) + "\n")
    print(f"Saved {out_md}")
    print(f"\nTotal {time.time()-t_start:.1f}s")


if __name__ == "__main__":
    main()
