"""Shared hypothesis strategies."""

from __future__ import annotations

from hypothesis import strategies as st


@st.composite
def ownership_programs(draw):
    n = draw(st.integers(1, 3))
    mutable = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    stmts: list = []
    scoped: list = []
    for _ in range(draw(st.integers(3, 8))):
        ops = ["imm", "mut", "blockimm", "blockmut", "move", "read", "write", "late"]
        if scoped:
            ops.append("useref")
        if "mut" in scoped:
            ops.append("writeref")
        op = draw(st.sampled_from(ops))
        if op in ("useref", "writeref"):
            stmts.append((op, draw(st.integers(0, 7))))
        elif op == "late":
            stmts.append((op,))
        else:
            stmts.append((op, draw(st.integers(0, n - 1))))
            if op in ("imm", "mut"):
                scoped.append(op)
    return mutable, stmts
