"""Independent oracle for the synthetic fixture.

Computes the expected region RCA table, concentration time series and DL
share time series directly from truth.json (intended regions and DL flags)
and the fixture config, without touching the pipeline. Writes the results to
fixtures/synthetic/expected/.

Usage: python3 fixtures/oracle.py
"""

import csv
import json
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from collections import defaultdict
from pathlib import Path

HERE = Path(__file__).resolve().parent / "synthetic"


def nearest_rank(values, p):
    s = sorted(values)
    rank = min(max(math.ceil(p * len(s)), 1), len(s))
    return s[rank - 1]


def upper_median(values):
    s = sorted(values)
    return s[len(s) // 2]


def fmt(x):
    return repr(float(x))


def main():
    cfg = tomllib.loads((HERE / "config.toml").read_text())
    papers = json.loads((HERE / "truth.json").read_text())["papers"]
    t0_max = cfg["split"]["t0_max_year"]
    window = cfg.get("filters", {}).get("ma_window", 3)
    floor_p = cfg["filters"]["region_floor_percentile"]
    k_region = cfg["filters"]["region_top_k"]
    k_country = cfg["filters"]["country_top_k"]
    out = HERE / "expected"
    out.mkdir(exist_ok=True)

    # DL share over every labeled paper.
    by_year = defaultdict(lambda: [0, 0])
    for p in papers:
        by_year[p["year"]][0] += 1
        by_year[p["year"]][1] += int(p["is_dl"])
    share = {y: d / n for y, (n, d) in by_year.items()}
    half = window // 2
    with open(out / "dl_share_timeseries.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["year", "papers", "dl_papers", "dl_share", "dl_share_ma"])
        for y in sorted(by_year):
            near = [share[z] for z in sorted(share) if y - half <= z <= y + half]
            n, d = by_year[y]
            w.writerow([y, n, d, fmt(share[y]), fmt(sum(near) / len(near))])

    # Citation filter: strictly above the upper median of the paper's year;
    # years with fewer than two papers are dropped.
    cites = defaultdict(list)
    for p in papers:
        cites[p["year"]].append(p["citations"])
    sample = [
        p for p in papers
        if len(cites[p["year"]]) >= 2 and p["citations"] > upper_median(cites[p["year"]]) and p["regions"]
    ]

    # Region x {dl, non_dl} per period, full counting.
    periods = {"t0": defaultdict(lambda: defaultdict(float)), "t1": defaultdict(lambda: defaultdict(float))}
    for p in sample:
        m = periods["t0" if p["year"] <= t0_max else "t1"]
        cat = "dl" if p["is_dl"] else "non_dl"
        for r in p["regions"]:
            m[r][cat] += 1.0
    totals = defaultdict(float)
    for m in periods.values():
        for r, row in m.items():
            totals[r] += sum(row.values())
    floor = nearest_rank(list(totals.values()), floor_p / 100.0)
    with open(out / "rca_by_region.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["location", "period", "category", "rca"])
        for period in ("t0", "t1"):
            m = periods[period]
            cats = sorted({c for row in m.values() for c in row})
            grand = sum(sum(row.values()) for row in m.values())
            col = {c: sum(row.get(c, 0.0) for row in m.values()) for c in cats}
            for r in sorted(m):
                if totals[r] < floor:
                    continue
                rt = sum(m[r].values())
                for c in cats:
                    w.writerow([r, period, c, fmt((m[r].get(c, 0.0) / rt) / (col[c] / grand))])

    # Top-k concentration per level, year and series over active locations.
    with open(out / "concentration_timeseries.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["level", "year", "series", "k", "locations", "activity", "top_k_share"])
        for level, key, k in (("country", "countries", k_country), ("region", "regions", k_region)):
            for y in sorted({p["year"] for p in sample}):
                dl, allc = defaultdict(float), defaultdict(float)
                for p in sample:
                    if p["year"] != y:
                        continue
                    for loc in p[key]:
                        allc[loc] += 1.0
                        if p["is_dl"]:
                            dl[loc] += 1.0
                for series, counts in (("dl", dl), ("all", allc)):
                    act = sorted((v for v in counts.values() if v > 0), reverse=True)
                    if not act:
                        continue
                    total = sum(act)
                    top = 1.0 if k >= len(act) else sum(act[:k]) / total
                    w.writerow([level, y, series, k, len(act), fmt(total), fmt(top)])


if __name__ == "__main__":
    main()
