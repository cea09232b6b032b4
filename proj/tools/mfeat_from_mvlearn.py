#!/usr/bin/env python3
"""Write the six Mfeat views in the original UCI layout (mfeat-fou, ...).

The mvlearn wheel ships the multiple-features data as CSV files with a header
row and a trailing label column. This script strips both, orders the rows into
class blocks of 200 (digits 0-9) and writes whitespace-separated files.

    python3 tools/mfeat_from_mvlearn.py path/to/mvlearn-*.whl data/mfeat
"""
import csv
import io
import sys
import zipfile
from pathlib import Path

VIEWS = ["fou", "fac", "kar", "pix", "zer", "mor"]


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    wheel, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(wheel) as z:
        for view in VIEWS:
            raw = z.read(f"mvlearn/datasets/UCImultifeature/mfeat-{view}.csv").decode()
            rows = list(csv.reader(io.StringIO(raw)))[1:]
            blocks = {d: [] for d in range(10)}
            for row in rows:
                blocks[int(float(row[-1]))].append(row[:-1])
            with open(out / f"mfeat-{view}", "w") as f:
                for d in range(10):
                    if len(blocks[d]) != 200:
                        raise SystemExit(f"{view}: digit {d} has {len(blocks[d])} rows")
                    for row in blocks[d]:
                        f.write(" ".join(row) + "\n")
            print(f"mfeat-{view}: {len(rows)} rows x {len(rows[0]) - 1} cols")
    return 0


if __name__ == "__main__":
    sys.exit(main())
