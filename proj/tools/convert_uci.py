#!/usr/bin/env python3
"""Convert a raw UCI-style data file to the CSV layout the tools expect.

UCI archive files (e.g. ionosphere.data) are headerless CSVs whose last
column is a string class label. The tools here want a header row, numeric
features, and a trailing 0/1 `label` column:

    python3 tools/convert_uci.py ionosphere.data data/ionosphere.csv --positive g

The positive class maps to 1, everything else to 0.
"""

import argparse
import csv
import sys


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", help="raw UCI .data file (headerless CSV)")
    parser.add_argument("dest", help="output CSV path")
    parser.add_argument(
        "--positive",
        default="g",
        help="class string mapped to label 1 (default: %(default)s)",
    )
    args = parser.parse_args()

    rows = []
    with open(args.source, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            *features, klass = row
            if not features:
                sys.exit(f"{args.source}:{line_no}: no feature columns")
            try:
                values = [float(v) for v in features]
            except ValueError as err:
                sys.exit(f"{args.source}:{line_no}: {err}")
            rows.append(values + [1 if klass == args.positive else 0])

    if not rows:
        sys.exit(f"{args.source}: no data rows")
    width = len(rows[0])
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            sys.exit(f"{args.source}: row {i} has {len(row)} columns, expected {width}")

    with open(args.dest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(1, width)] + ["label"])
        writer.writerows(rows)
    positives = sum(row[-1] for row in rows)
    print(
        f"wrote {len(rows)} rows x {width - 1} features to {args.dest} "
        f"({positives} positive / {len(rows) - positives} negative)"
    )


if __name__ == "__main__":
    main()
