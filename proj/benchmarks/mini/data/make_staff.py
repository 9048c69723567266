#!/usr/bin/env python3
"""Regenerates staff.csv and depts.csv for the mini benchmark.

Every refinable column is a small integer or a short categorical list, so
each instance's assignment space can be enumerated outright.
"""
import csv
import random
from pathlib import Path

DEPTS = {"Eng": "HQ", "Ops": "Plant", "Sales": "Remote", "Legal": "HQ", "Design": "Remote"}
REGIONS = ["North", "South", "East", "West"]
ROWS = 200


def main():
    here = Path(__file__).resolve().parent
    rng = random.Random(20240917)
    with open(here / "staff.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "dept", "gender", "region", "level", "years", "rating", "salary"])
        for i in range(1, ROWS + 1):
            dept = rng.choice(list(DEPTS))
            # women are a little scarcer at high ratings, which gives the
            # top-k instances something to fix
            gender = "F" if rng.random() < 0.42 else "M"
            level = rng.randint(1, 5)
            years = rng.randint(0, 9)
            rating = min(10, max(1, int(rng.gauss(6.2 if gender == "M" else 5.4, 2.0))))
            salary = 40 + 12 * level + 3 * years + rng.randint(0, 20)
            w.writerow([i, dept, gender, rng.choice(REGIONS), level, years, rating, salary])
    with open(here / "depts.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["name", "site"])
        for name, site in DEPTS.items():
            w.writerow([name, site])


if __name__ == "__main__":
    main()
