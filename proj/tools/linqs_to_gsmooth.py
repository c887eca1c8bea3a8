#!/usr/bin/env python3
"""Convert a LINQS citation dataset (<name>.content, <name>.cites) into a
gsmooth dataset directory (features.csv, labels.txt, graph.edges).

    python3 tools/linqs_to_gsmooth.py cora/cora.content cora/cora.cites data/cora

Nodes are numbered in .content order; classes in sorted name order.
Citations naming unknown papers are dropped and counted.
"""
import argparse
import pathlib
import sys


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("content", type=pathlib.Path)
    ap.add_argument("cites", type=pathlib.Path)
    ap.add_argument("out", type=pathlib.Path)
    args = ap.parse_args()

    ids, rows, names = [], [], []
    with args.content.open() as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            ids.append(parts[0])
            rows.append(parts[1:-1])
            names.append(parts[-1])
    index = {paper: i for i, paper in enumerate(ids)}
    classes = sorted(set(names))
    d = len(rows[0])

    edges, dropped = set(), 0
    with args.cites.open() as f:
        for line in f:
            parts = line.split()
            if len(parts) != 2:
                continue
            if parts[0] not in index or parts[1] not in index:
                dropped += 1
                continue
            u, v = index[parts[0]], index[parts[1]]
            if u != v:
                edges.add((min(u, v), max(u, v)))

    args.out.mkdir(parents=True, exist_ok=True)
    with (args.out / "features.csv").open("w") as f:
        f.write(f"#sparse d={d}\n")
        for row in rows:
            f.write(" ".join(f"{j}:{x}" for j, x in enumerate(row) if float(x) != 0.0) + "\n")
    with (args.out / "labels.txt").open("w") as f:
        f.writelines(f"{classes.index(c)}\n" for c in names)
    with (args.out / "graph.edges").open("w") as f:
        f.writelines(f"{u} {v}\n" for u, v in sorted(edges))

    print(f"{len(ids)} nodes, {len(edges)} undirected edges, {len(classes)} classes, {d} features"
          f" ({dropped} citations to unknown papers dropped)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
