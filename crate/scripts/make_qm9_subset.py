#!/usr/bin/env python3
"""Build fixed-seed QM9 desk subsets in the JSON molecule format.

Input is the qm9pack wheel (PyPI), which bundles the QM9 tables with XYZ
geometries and dipole moments. Bonds are perceived from interatomic
distances using covalent radii; node labels follow the one-hot atom-type
order C, N, O, F, H (ids 0..4).

usage: make_qm9_subset.py <qm9pack.whl> <out_dir> [--size 500] [--seed 0]
"""
import argparse
import csv
import io
import json
import math
import random
import sys
import zipfile

ATOM_IDS = {"C": 0, "N": 1, "O": 2, "F": 3, "H": 4}
COVALENT_RADIUS = {"H": 0.31, "C": 0.76, "N": 0.71, "O": 0.66, "F": 0.57}
BOND_TOLERANCE = 0.3

csv.field_size_limit(sys.maxsize)


def rows(wheel):
    z = zipfile.ZipFile(wheel)
    for part in ("qm9_part1.csv", "qm9_part2.csv", "qm9_part3.csv"):
        with z.open("qm9pack/data/" + part) as fh:
            yield from csv.DictReader(io.TextIOWrapper(fh, encoding="utf-8"))


def to_record(row):
    elements = json.loads(row["Elements"].replace("'", '"'))
    xyz = json.loads(row["XYZ_Ang"])
    n = len(elements)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            d = math.dist(xyz[i], xyz[j])
            if d < COVALENT_RADIUS[elements[i]] + COVALENT_RADIUS[elements[j]] + BOND_TOLERANCE:
                edges.append([i, j])
    return {
        "num_nodes": n,
        "edges": edges,
        "node_labels": [ATOM_IDS[e] for e in elements],
        "targets": [float(row["Dipole_debye"])],
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("wheel")
    ap.add_argument("out_dir")
    ap.add_argument("--size", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    all_rows = list(rows(args.wheel))
    picked = sorted(random.Random(args.seed).sample(range(len(all_rows)), args.size))
    records = [to_record(all_rows[i]) for i in picked]
    stem = f"{args.out_dir}/qm9_dipole_{args.size}"
    with open(stem + ".json", "w") as fh:
        json.dump(records, fh)
    manifest = {
        "source": "qm9pack 1.0.3 (QM9, dsgdb9nsd)",
        "seed": args.seed,
        "size": args.size,
        "target": "dipole moment (Debye)",
        "atom_labels": list(ATOM_IDS),
        "bond_rule": f"d < r_cov(a) + r_cov(b) + {BOND_TOLERANCE} A",
        "xyz_files": [all_rows[i]["XYZ_file"] for i in picked],
    }
    with open(stem + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    print(f"wrote {len(records)} molecules to {stem}.json")


if __name__ == "__main__":
    main()
