"""Convert Topology Zoo node-link JSON files (as shipped in the ``topohub``
wheel) into the minimal GraphML files bundled with the package.

Only topologies whose largest connected component has between ``--min``
and ``--max`` nodes are kept. Node labels and the link list are preserved;
everything else (positions, link statistics) is dropped.

    pip download topohub --no-deps -d /tmp/th
    python3 -m zipfile -e /tmp/th/topohub-*.whl /tmp/th/x
    python3 scripts/zoo_to_graphml.py /tmp/th/x/topohub/data/topozoo src/misconfig_lab/data/zoo
"""

import argparse
import json
from pathlib import Path

import networkx as nx


def convert(path: Path) -> nx.Graph:
    data = json.loads(path.read_text())
    g = nx.Graph()
    for n in data["nodes"]:
        g.add_node(str(n["id"]), label=str(n.get("name", n["id"])))
    for e in data["edges"]:
        if e["source"] != e["target"]:
            g.add_edge(str(e["source"]), str(e["target"]))
    g.graph["name"] = path.stem
    return g


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("src", type=Path)
    ap.add_argument("dst", type=Path)
    ap.add_argument("--min", type=int, default=16)
    ap.add_argument("--max", type=int, default=40)
    args = ap.parse_args()
    args.dst.mkdir(parents=True, exist_ok=True)
    kept = 0
    for path in sorted(args.src.glob("*.json")):
        g = convert(path)
        if g.number_of_nodes() == 0:
            continue
        lcc = max(nx.connected_components(g), key=len)
        if args.min <= len(lcc) <= args.max:
            nx.write_graphml(g, args.dst / f"{path.stem}.graphml")
            kept += 1
    print(f"wrote {kept} topologies to {args.dst}")


if __name__ == "__main__":
    main()
