"""Synthetic fixture trees bundled with the package.

Lengths (10-50 um) and current densities (1e9-3e9 A/m^2) sit in the usual
range of on-chip power-grid wires.  Initial stress is the steady
nucleation-phase stress under the mean currents, and the void sits at the
most tensile terminal.  Run ``python3 -m empost.fixtures DIR`` to rewrite
the JSON files.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from typing import Sequence

from .core import (InitialStressProfile, InterconnectTree, Junction, MaterialParams, ScalingConstants, Segment,
                   require_valid, steady_nucleation_stress)

UM = 1e-6
WIDTH = 1e-6

# (id, node_minus, node_plus, orientation, length um, current density A/m^2)
TEN_SEGMENT = [
    ("s1", "T0", "A", "horizontal", 30, 2.0e9),
    ("s2", "A", "B", "horizontal", 20, 1.5e9),
    ("s3", "B", "C", "horizontal", 40, 1.0e9),
    ("s4", "C", "D", "horizontal", 25, -1.0e9),
    ("s5", "D", "T5", "horizontal", 35, -2.0e9),
    ("s6", "A", "T6", "vertical", 15, 1.0e9),
    ("s7", "T7", "B", "vertical", 20, 1.2e9),
    ("s8", "C", "E", "vertical", 30, -1.5e9),
    ("s9", "E", "T9", "horizontal", 25, 2.0e9),
    ("s10", "T10", "D", "vertical", 15, -1.0e9),
]

THREE_SEGMENT = [
    ("a", "T0", "J", "horizontal", 20, 1.0e9),
    ("b", "J", "T2", "horizontal", 30, 2.0e9),
    ("c", "J", "T3", "vertical", 25, -1.0e9),
]


def tree_from_segments(rows: Sequence[tuple], void: tuple[str, str] | None = None,
                       material: MaterialParams | None = None, scaling: ScalingConstants | None = None,
                       initial_stress: dict | None = None) -> InterconnectTree:
    """Build a tree from segment rows; junction slots and kinds follow from incidence.

    ``void`` is ``(segment id, 'at_minus' | 'at_plus')``.
    """
    segs = []
    for sid, a, b, orient, length, j in rows:
        segs.append(Segment(sid, a, b, length * UM, WIDTH, float(j), orient))
    slots: dict[str, dict[str, str]] = {}
    for s in segs:
        for end in ("minus", "plus"):
            slots.setdefault(s.node(end), {})[s.slot_at(end)] = s.id
    void_node = None
    if void is not None:
        sid, where = void
        segs = [replace(s, void_end=where) if s.id == sid else s for s in segs]
        seg = next(s for s in segs if s.id == sid)
        void_node = seg.node_minus if where == "at_minus" else seg.node_plus
    junctions = []
    for jid, occ in slots.items():
        kind = "interior" if len(occ) > 1 else "void_node" if jid == void_node else "blocked_terminal"
        junctions.append(Junction(jid, occ, kind))
    tree = InterconnectTree(tuple(junctions), tuple(segs), material or MaterialParams(), scaling or ScalingConstants())
    if initial_stress is not None:
        tree = tree.with_initial_stress(initial_stress)
    require_valid(tree)
    return tree


def most_tensile_terminal(tree: InterconnectTree) -> tuple[str, str]:
    """(segment id, void end) of the terminal with the largest initial stress."""
    best = None
    for j in tree.junctions:
        if j.kind == "interior":
            continue
        seg = tree.segment(j.slots[j.occupied[0]])
        end = "minus" if seg.node_minus == j.id else "plus"
        value = float(seg.initial_stress.evaluate(0.0 if end == "minus" else seg.length, seg.length))
        if best is None or value > best[0]:
            best = (value, seg.id, "at_" + end)
    return best[1], best[2]


def voided_tree(rows: Sequence[tuple]) -> InterconnectTree:
    """Tree with steady nucleation stress as h and the void at its most tensile terminal."""
    blocked = tree_from_segments(rows)
    h = steady_nucleation_stress(blocked)
    blocked = blocked.with_initial_stress(h)
    return tree_from_segments(rows, most_tensile_terminal(blocked), initial_stress=h)


def ten_segment_tree() -> InterconnectTree:
    return voided_tree(TEN_SEGMENT)


def three_segment_tree() -> InterconnectTree:
    return voided_tree(THREE_SEGMENT)


def single_voidless_segment() -> InterconnectTree:
    """Blocked 30 um wire starting stress-free: stress builds towards G(L/2 - x)."""
    return tree_from_segments([("w", "T0", "T1", "horizontal", 30, 2.0e9)],
                              initial_stress={"w": InitialStressProfile.constant(0.0)})


def single_void_segment() -> InterconnectTree:
    """30 um wire with steady nucleation stress and a void at its tensile (x = 0) end."""
    return voided_tree([("w", "T0", "T1", "horizontal", 30, 2.0e9)])


FIXTURES = {
    "single_voidless.json": single_voidless_segment,
    "single_void.json": single_void_segment,
    "three_segment.json": three_segment_tree,
    "ten_segment.json": ten_segment_tree,
}


def main(argv: Sequence[str] | None = None) -> None:
    from .io import save_tree

    argv = sys.argv[1:] if argv is None else argv
    out = argv[0] if argv else "."
    for name, build in FIXTURES.items():
        save_tree(build(), f"{out}/{name}", name=name.removesuffix(".json") + " (synthetic)")


if __name__ == "__main__":
    main()
