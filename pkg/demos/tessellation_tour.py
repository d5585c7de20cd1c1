"""Build tessellations on three graphs and print their level sizes.

Also shows the failing pentagon-with-chord graph and its greedy repair.

    python3 demos/tessellation_tour.py
"""

from qmfield.graph_topology import GraphWindow, build_tessellation

PENTAGON = [("r", "a"), ("r", "b"), ("a", "c"), ("b", "d"), ("c", "d")]


def show(name, t):
    sizes = ", ".join(f"{len(lv.sites)}/{len(lv.centers)}" for lv in t.levels)
    flags = " ".join(f"{k}={'ok' if d.ok else 'FAIL'}" for k, d in t.diagnostics.items())
    print(f"{name:<24} sites/centers per level: {sizes}")
    print(f"{'':<24} {flags}")


if __name__ == "__main__":
    show("line, radius 12", build_tessellation(GraphWindow.lattice(1, 12)))
    show("Z2, radius 5", build_tessellation(GraphWindow.lattice(2, 5)))
    show("3-regular tree, depth 4", build_tessellation(GraphWindow.tree(3, 4)))

    w = GraphWindow.explicit(PENTAGON, root="r")
    t = build_tessellation(w)
    show("pentagon with chord", t)
    print(f"{'':<24} adjacent centers: {t.diagnostics['independence'].witness}")
    show("pentagon, repaired", build_tessellation(w, repair="greedy-independent"))
