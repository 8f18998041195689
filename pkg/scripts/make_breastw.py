"""Build data/breastw.csv from the MASS ``biopsy`` table.

``biopsy`` is the original Wisconsin breast cancer data (699 rows, 9 cytology
scores).  Dropping the 16 rows with a missing V6 gives the 683 x 9 table used
by the anomaly-detection benchmarks, with the 239 malignant cases as anomalies.

Usage::

    pip download pydataset --no-deps -d /tmp/pyds
    # unpack and point at resources/rdata/csv/MASS/biopsy.csv
    python scripts/make_breastw.py path/to/biopsy.csv data/breastw.csv
"""
import csv
import sys


def convert(src: str, dst: str) -> int:
    n = 0
    with open(src, newline="") as fin, open(dst, "w", newline="") as fout:
        reader = csv.DictReader(fin)
        writer = csv.writer(fout)
        feats = [f"V{i}" for i in range(1, 10)]
        writer.writerow(feats + ["label"])
        for row in reader:
            if any(row[f] == "NA" for f in feats):
                continue
            label = {"benign": 0, "malignant": 1}[row["class"]]
            writer.writerow([row[f] for f in feats] + [label])
            n += 1
    return n


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    print(convert(sys.argv[1], sys.argv[2]), "rows written")
