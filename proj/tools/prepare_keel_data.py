#!/usr/bin/env python3
"""Rebuild data/keel/*.dat from the KEEL copies shipped in two PyPI wheels.

The `keel_ds` wheel stores KEEL data rows without the header block, so a
Keel-style header (`@relation`, `@attribute`, `@inputs`, `@outputs`, `@data`)
is regenerated here with generic attribute names and observed value ranges.
`page-blocks0` comes from `imbalanced_databases` with its original header.

    pip download --no-deps keel-ds imbalanced-databases -d /tmp/wheels
    python3 tools/prepare_keel_data.py /tmp/wheels data/keel
"""
import glob
import os
import sys
import zipfile

HEADERLESS = ["banana", "phoneme", "spambase", "texture", "optdigits"]


def rebuild(name, text):
    rows = [l.strip() for l in text.splitlines() if l.strip()]
    cells = [[c.strip() for c in r.split(",")] for r in rows]
    m = len(cells[0]) - 1
    classes = []
    for r in cells:
        if r[-1] not in classes:
            classes.append(r[-1])
    out = [f"@relation {name}"]
    names = [f"At{j + 1}" for j in range(m)]
    for j, a in enumerate(names):
        col = [float(r[j]) for r in cells]
        out.append(f"@attribute {a} real [{min(col)!r}, {max(col)!r}]")
    out.append("@attribute Class {" + ",".join(sorted(classes)) + "}")
    out.append("@inputs " + ", ".join(names))
    out.append("@outputs Class")
    out.append("@data")
    out.extend(rows)
    return "\n".join(out) + "\n"


def main():
    wheels, dest = sys.argv[1], sys.argv[2]
    os.makedirs(dest, exist_ok=True)
    keel = zipfile.ZipFile(glob.glob(os.path.join(wheels, "keel_ds-*.whl"))[0])
    for name in HEADERLESS:
        text = keel.read(f"keel_ds/data/balanced/raw/{name}.dat").decode()
        with open(os.path.join(dest, f"{name}.dat"), "w") as f:
            f.write(rebuild(name, text))
    imb = zipfile.ZipFile(glob.glob(os.path.join(wheels, "imbalanced_databases-*.whl"))[0])
    text = imb.read("imbalanced_databases/data/page-blocks0/page-blocks0.dat").decode()
    with open(os.path.join(dest, "page-blocks0.dat"), "w") as f:
        f.write(text.replace("\r\n", "\n"))


if __name__ == "__main__":
    main()
