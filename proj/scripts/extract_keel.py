#!/usr/bin/env python3
"""Write the benchmark CSVs in data/uci/ from the keel-ds wheel.

The wheel ships header-less comma-separated .dat files with the class in the
last column. Each output gets a header row (x1..xp, class) and a <name>.target
sidecar naming the class column.

usage: extract_keel.py path/to/keel_ds-0.2.5-py3-none-any.whl [out_dir]
"""
import csv
import pathlib
import sys
import zipfile

DATASETS = {
    "haberman-survival": "imbalanced/raw/haberman.dat",
    "wdbc": "balanced/raw/wdbc.dat",
    "breast-cancer": "balanced/raw/breast.dat",
    "statlog-german-credit": "balanced/raw/german.dat",
    "house-votes": "balanced/raw/housevotes.dat",
    "monks-problems-2": "balanced/raw/monk-2.dat",
}


def main() -> None:
    wheel = zipfile.ZipFile(sys.argv[1])
    out = pathlib.Path(sys.argv[2] if len(sys.argv) > 2 else "data/uci")
    out.mkdir(parents=True, exist_ok=True)
    for name, member in DATASETS.items():
        text = wheel.read("keel_ds/data/" + member).decode()
        rows = [[c.strip() for c in line.split(",")] for line in text.splitlines() if line.strip()]
        width = len(rows[0])
        assert all(len(r) == width for r in rows), name
        header = [f"x{j + 1}" for j in range(width - 1)] + ["class"]
        with open(out / f"{name}.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        (out / f"{name}.target").write_text("class\n")
        print(f"{name}: {len(rows)} rows, {width - 1} features")


if __name__ == "__main__":
    main()
