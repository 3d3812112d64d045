"""Generates the bundled synthetic fixture.

Writes papers, registry, companies, boundaries and topic model files into
fixtures/synthetic/, plus truth.json: the intended region set and DL flag of
every valid paper, which the oracle consumes instead of re-running linkage,
geocoding and labeling.

Usage: python3 fixtures/generate.py
"""

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent / "synthetic"
rng = random.Random(20190101)

REGIONS = {
    # region_id: (country, lat0, lat1, lon0, lon1)
    "CN-BJ": ("CN", 39.0, 41.0, 115.0, 118.0),
    "CN-SH": ("CN", 30.0, 32.0, 120.0, 122.0),
    "US-CA": ("US", 34.0, 38.0, -123.0, -118.0),
    "US-MA": ("US", 41.0, 43.0, -73.0, -70.0),
    "GB-OX": ("GB", 51.5, 52.0, -1.6, -1.0),
    "GB-LN": ("GB", 51.3, 51.7, -0.5, 0.3),
}

INSTITUTES = [
    # (id, region or None, canonical name, aliases)
    ("grid.001", "CN-BJ", "Beijing Institute of Computing Technology", ["BICT"]),
    ("grid.002", "CN-BJ", "Northern Polytechnic University", []),
    ("grid.003", "CN-BJ", "Haidian Laboratory for Machine Perception", []),
    ("grid.004", "CN-SH", "Shanghai Jiaotong Robotics Academy", ["SJRA"]),
    ("grid.005", "CN-SH", "Pudong Centre for Language Engineering", []),
    ("grid.006", "CN-SH", "Eastern Normal University", []),
    ("grid.007", "US-CA", "Pacific Institute of Technology", ["PacTech"]),
    ("grid.008", "US-CA", "Sierra Valley State University", []),
    ("grid.009", "US-CA", "Golden Gate Vision Research Laboratory", []),
    ("grid.010", "US-CA", "Coastal College of Engineering", []),
    ("grid.011", "US-MA", "Commonwealth Institute of Automation", []),
    ("grid.012", "US-MA", "Charles River University", []),
    ("grid.013", "US-MA", "Harborview Medical Informatics Center", []),
    ("grid.014", "GB-OX", "Radcliffe College of Statistics", []),
    ("grid.015", "GB-OX", "Isis Laboratory for Planning and Reasoning", []),
    ("grid.016", "GB-OX", "Cherwell University", []),
    ("grid.017", "GB-LN", "Thames Institute of Informatics", []),
    ("grid.018", "GB-LN", "Bloomsbury School of Computation", []),
    ("grid.019", "GB-LN", "Greenwich Observatory Data Unit", []),
    ("grid.020", None, "Azores Marine Sensing Station", []),
    ("grid.021", None, "Reykjavik Geothermal Computing Group", []),
]

SUBJECTS = ["cs.AI", "cs.CL", "cs.CV", "cs.LG", "cs.RO"]
SECTORS = ["adtech", "biotech", "ecommerce", "edtech", "fintech",
           "healthtech", "logistics", "media", "robotics", "security"]

# Words chosen so the light plural stemmer leaves them unchanged.
DL_WORDS = [
    ["neural", "convolutional", "backpropagation", "recurrent", "autoencoder",
     "dropout", "embedding", "perceptron", "activation", "pretraining"],
    ["deep", "transformer", "attention", "finetuning", "gradient",
     "layerwise", "residual", "pooling", "softmax", "minibatch"],
]


def pseudo_word(used):
    cons, vows = "bdfgklmnprtvz", "aeiou"
    while True:
        w = "".join(rng.choice(cons) + rng.choice(vows) for _ in range(rng.randint(3, 4)))
        w += rng.choice("dgklmnrt")
        if w not in used:
            used.add(w)
            return w


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    used = {w for t in DL_WORDS for w in t}
    # 26 non-DL topics of 10 words; subject s owns topics [5s, 5s+5).
    topics = [[pseudo_word(used) for _ in range(10)] for _ in range(26)]
    sector_words = {s: [pseudo_word(used) for _ in range(8)] for s in SECTORS}

    with open(OUT / "topics.csv", "w") as f:
        f.write("topic_id,word,weight\n")
        for t, words in enumerate(DL_WORDS):
            for i, w in enumerate(words):
                f.write(f"{t},{w},{0.2 - 0.01 * i:.2f}\n")
        for t, words in enumerate(topics):
            for i, w in enumerate(words):
                f.write(f"{t + 2},{w},{0.15 - 0.01 * i:.2f}\n")

    features = []
    for rid, (cc, lat0, lat1, lon0, lon1) in REGIONS.items():
        ring = [[lon0, lat0], [lon1, lat0], [lon1, lat1], [lon0, lat1], [lon0, lat0]]
        features.append({
            "type": "Feature",
            "properties": {"region_id": rid, "country_code": cc},
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        })
    with open(OUT / "boundaries.geojson", "w") as f:
        json.dump({"type": "FeatureCollection", "features": features}, f, indent=1)
        f.write("\n")

    def point_in(region):
        _, lat0, lat1, lon0, lon1 = REGIONS[region]
        return (round(rng.uniform(lat0 + 0.1, lat1 - 0.1), 4), round(rng.uniform(lon0 + 0.1, lon1 - 0.1), 4))

    with open(OUT / "registry.jsonl", "w") as f:
        for iid, region, name, aliases in INSTITUTES:
            lat, lon = point_in(region) if region else (round(rng.uniform(37, 39), 4), round(rng.uniform(-28, -25), 4))
            f.write(json.dumps({"registry_id": iid, "name": name, "aliases": aliases, "lat": lat, "lon": lon}) + "\n")
        # invalid row: latitude out of range
        f.write(json.dumps({"registry_id": "grid.099", "name": "Nowhere Lab", "aliases": [], "lat": 123.0, "lon": 0.0}) + "\n")

    def typo(name):
        words = name.split()
        i = max(range(len(words)), key=lambda k: len(words[k]))
        w = words[i]
        j = rng.randint(1, len(w) - 3)
        words[i] = w[:j] + w[j + 1] + w[j] + w[j + 2:]
        return " ".join(words)

    def affiliation(inst):
        _, _, name, aliases = inst
        r = rng.random()
        if r < 0.15:
            return typo(name)
        if r < 0.25:
            return "  " + name.upper() + ", Dept. "
        if r < 0.30 and aliases:
            return aliases[0]
        return name

    inst_region = {i[0]: i[1] for i in INSTITUTES}
    # DL propensity by region, on top of the period effect.
    region_dl = {"CN-BJ": 0.25, "CN-SH": 0.15, "US-CA": 0.12, "US-MA": 0.05, "GB-OX": 0.10, "GB-LN": 0.0}
    subject_dl = {"cs.AI": 0.0, "cs.CL": 0.05, "cs.CV": 0.15, "cs.LG": 0.2, "cs.RO": -0.05}

    papers, truth = [], []
    for n in range(500):
        pid = f"P{n:04d}"
        year = rng.randint(2006, 2018)
        subjects = sorted(rng.sample(SUBJECTS, rng.choice([1, 1, 2])))
        insts = rng.sample(INSTITUTES, rng.choice([1, 1, 1, 2, 3]))
        affs = [affiliation(i) for i in insts]
        if rng.random() < 0.05:
            affs.append("Self-employed consultant")
        regions = sorted({inst_region[i[0]] for i in insts if inst_region[i[0]]})
        p = 0.03 + (0.15 if year > 2012 else 0.0) + sum(subject_dl[s] for s in subjects) / len(subjects)
        if regions:
            p += max(region_dl[r] for r in regions)
        is_dl = rng.random() < max(p, 0.0)
        words = []
        for s in subjects:
            base = SUBJECTS.index(s) * 5
            for t in rng.sample(range(base, base + 5), 2):
                words += rng.sample(topics[t], 6)
        if is_dl:
            words += rng.sample(rng.choice(DL_WORDS), 4)
        rng.shuffle(words)
        citations = int(rng.expovariate(1 / 12))
        papers.append({
            "id": pid,
            "title": f"Study {n}",
            "abstract": " ".join(words),
            "subjects": subjects,
            "pub_year": year,
            "citations": citations,
            "affiliations": affs,
        })
        truth.append({
            "id": pid,
            "year": year,
            "citations": citations,
            "subjects": subjects,
            "is_dl": is_dl,
            "regions": regions,
            "countries": sorted({REGIONS[r][0] for r in regions}),
        })
    # rows the ingest stage must reject
    bad = dict(papers[0], id="P9000", citations=-1)
    dup = dict(papers[1])
    empty = dict(papers[2], id="P9001", subjects=[])
    old = dict(papers[3], id="P9002", pub_year=1950)
    with open(OUT / "papers.jsonl", "w") as f:
        for i, p in enumerate(papers):
            f.write(json.dumps(p) + "\n")
            if i == 100:
                for extra in (bad, dup, empty, old):
                    f.write(json.dumps(extra) + "\n")

    with open(OUT / "companies.jsonl", "w") as f:
        for n in range(300):
            sector = SECTORS[n % len(SECTORS)]
            cats = [sector]
            if rng.random() < 0.1:
                cats.append(rng.choice([s for s in SECTORS if s != sector]))
            words = rng.sample(sector_words[sector], 6)
            words += [rng.choice(rng.choice(topics)) for _ in range(2)]
            if sector in ("adtech", "media", "robotics", "healthtech") and rng.random() < 0.6:
                words += rng.sample(rng.choice(DL_WORDS), 2)
            rng.shuffle(words)
            row = {"id": f"C{n:04d}", "description": " ".join(words), "categories": sorted(cats)}
            if rng.random() > 0.1:
                row["founded_year"] = rng.randint(2000, 2018)
            if rng.random() < 0.05:
                row["lat"], row["lon"] = 0.0, 0.0
            else:
                row["lat"], row["lon"] = point_in(rng.choice(list(REGIONS)))
            f.write(json.dumps(row) + "\n")

    with open(OUT / "truth.json", "w") as f:
        json.dump({"papers": truth}, f, indent=0)
        f.write("\n")


if __name__ == "__main__":
    main()
