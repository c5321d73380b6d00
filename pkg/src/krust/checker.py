"""Ownership, borrowing and lifetime checker for surface programs.

Every variable (including compiler temporaries) gets a unique, increasing
index and a :class:`VarInfo` record. Lexical lifetimes are integer depths;
a borrow is recorded on the lender as the depth of the variable holding it
(``L1`` for immutable, ``L2`` for mutable, 0 when absent) and stays live
until that depth is exited. Immutable reborrows through a mutable reference
freeze the reference instead of touching the lender.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from . import surface_ast as S
from .rtypes import (
    BOOL_T, I32_T, VOID_T, Array, Bool, I32, LftConst, LftVar, Named, Own, Prod, Ref,
    Registry, RegistryError, RType, Sum, VoidTy, is_copy, lifetimes_in, pretty_type, size_of,
    subst_lifetimes, type_equal,
)

ERROR_KINDS = (
    "UseOfMoved", "UseOfUninit", "AssignToImmutable", "ConflictingMutBorrow",
    "MutBorrowWhileBorrowed", "BorrowOutlivesOwner", "FrozenWrite", "TypeMismatch",
    "ArityMismatch", "UnknownName", "InvalidInjTag", "NonExhaustiveCase",
    "MoveOutOfBorrow", "InvalidDeclaration", "DuplicateType", "UnknownType", "Unsized",
)


@dataclass
class VarInfo:
    L: int
    mut: bool
    T: Optional[RType]
    L1: int = 0
    L2: int = 0
    init: bool = False
    name: str = ""


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    pos: Optional[tuple]
    message: str

    def __str__(self) -> str:
        line, col = self.pos if self.pos else (0, 0)
        return f"error[{self.kind}] {line}:{col}: {self.message}"


class CheckError(Exception):
    def __init__(self, kind: str, pos, message: str):
        super().__init__(message)
        self.diag = Diagnostic(kind, pos, message)


@dataclass
class Place:
    root: Optional[int]
    ty: Optional[RType]
    mutable: bool
    via_ref: bool = False
    via_mut_ref: bool = False
    direct: bool = True


@dataclass
class Annotations:
    """Facts recorded for lowering, keyed by ``id`` of surface nodes."""

    types: dict = field(default_factory=dict)
    var_idx: dict = field(default_factory=dict)
    let_idx: dict = field(default_factory=dict)
    field_kind: dict = field(default_factory=dict)
    case_kind: dict = field(default_factory=dict)
    new_size: dict = field(default_factory=dict)
    mut_borrowed: set = field(default_factory=set)
    var_types: dict = field(default_factory=dict)


@dataclass
class BorrowEvent:
    owner: int
    holder: int
    mut: bool
    depth: int


def _minnz(a: int, b: int) -> int:
    if a == 0:
        return b
    if b == 0:
        return a
    return min(a, b)


class Checker:
    def __init__(self, registry: Optional[Registry] = None):
        self.reg = registry or Registry()
        self.var_cnt = 0
        self.info: dict[int, VarInfo] = {}
        self.env: dict[str, int] = {}
        self.stack_env: list[dict] = []
        self.cur = 0
        self.freeze: dict[int, int] = {}
        self.moved: set[int] = set()
        self.narrow: dict[int, int] = {}
        self.ann = Annotations()
        self.borrow_log: list[BorrowEvent] = []
        self.index_log: list[int] = []

    # -- bookkeeping ---------------------------------------------------------

    def live(self, v: int) -> bool:
        return v != 0 and v <= self.cur

    def fresh_var(self, name: str, mut: bool, t: Optional[RType], init: bool) -> int:
        ix = self.reserve()
        self.bind(ix, name, mut, t, init)
        return ix

    def reserve(self) -> int:
        ix = self.var_cnt
        self.var_cnt += 1
        self.index_log.append(ix)
        return ix

    def bind(self, ix: int, name: str, mut: bool, t: Optional[RType], init: bool) -> None:
        self.info[ix] = VarInfo(self.cur, mut, t, 0, 0, init, name)
        if name:
            self.env[name] = ix

    def temp(self, t: Optional[RType] = None) -> int:
        return self.fresh_var("", False, t, True)

    def enter(self) -> None:
        self.stack_env.append(dict(self.env))
        self.cur += 1

    def exit(self) -> None:
        if self.cur < 1 or not self.stack_env:
            raise AssertionError("lifetime stack underflow")
        self.env = self.stack_env.pop()
        self.cur -= 1
        for vi in self.info.values():
            if vi.L1 > self.cur:
                vi.L1 = 0
            if vi.L2 > self.cur:
                vi.L2 = 0
        self.freeze = {k: v for k, v in self.freeze.items() if v <= self.cur}

    def frozen(self, ix: int) -> bool:
        return self.live(self.freeze.get(ix, 0))

    def err(self, kind: str, node, message: str):
        raise CheckError(kind, getattr(node, "pos", None), message)

    def vname(self, ix: int) -> str:
        return self.info[ix].name or f"#tmp{ix}"

    def note(self, node, t: RType) -> RType:
        self.ann.types[id(node)] = t
        return t

    # -- snapshots for branches ----------------------------------------------

    def snapshot(self):
        return ({k: copy.copy(v) for k, v in self.info.items()}, dict(self.env), dict(self.freeze), set(self.moved), dict(self.narrow))

    def restore(self, snap) -> None:
        info, env, freeze, moved, narrow = snap
        self.info = {k: copy.copy(v) for k, v in info.items()}
        self.env = dict(env)
        self.freeze = dict(freeze)
        self.moved = set(moved)
        self.narrow = dict(narrow)

    def capture(self):
        return (self.info, self.freeze, self.moved)

    def merge(self, states: list) -> None:
        infos = [s[0] for s in states]
        merged: dict[int, VarInfo] = {}
        for ix in sorted(set().union(*[set(i) for i in infos])):
            present = [i[ix] for i in infos if ix in i]
            base = copy.copy(present[0])
            for vi in present[1:]:
                base.init = base.init and vi.init
                base.L1 = _minnz(base.L1, vi.L1)
                base.L2 = _minnz(base.L2, vi.L2)
                if base.T is None:
                    base.T = vi.T
            merged[ix] = base
        freeze: dict[int, int] = {}
        for s in states:
            for k, v in s[1].items():
                freeze[k] = _minnz(freeze.get(k, 0), v)
        moved = set().union(*[s[2] for s in states])
        self.info = merged
        self.freeze = freeze
        self.moved = {ix for ix in moved if not merged[ix].init}

    # -- program -------------------------------------------------------------

    def check_program(self, prog: S.SurfaceProgram) -> list[Diagnostic]:
        errors: list[Diagnostic] = []
        for d in prog.decls:
            try:
                self.reg.declare(d.name, d.ty, d.pos)
            except RegistryError as exc:
                errors.append(Diagnostic(exc.kind, d.pos, exc.message))
        for d in prog.decls:
            try:
                self.reg.check_wellformed(d.ty)
            except RegistryError as exc:
                errors.append(Diagnostic(exc.kind, d.pos, f"{d.name}: {exc.message}"))
        if errors:
            return errors
        main = self.reg.fn_sigs.get("main")
        if main is not None and (main.params or not isinstance(main.ret, VoidTy)):
            errors.append(Diagnostic("TypeMismatch", None, "main must have type fnTy(;;void)"))
        seen = set()
        for f in prog.fns:
            if f.name in seen:
                errors.append(Diagnostic("DuplicateType", f.pos, f"function {f.name} is defined twice"))
                continue
            seen.add(f.name)
            try:
                self.check_fn_def(f)
            except CheckError as exc:
                errors.append(exc.diag)
        if prog.body is not None:
            self.env, self.stack_env, self.cur = {}, [], 0
            self.freeze, self.narrow = {}, {}
            try:
                self.check(prog.body)
            except CheckError as exc:
                errors.append(exc.diag)
        return errors

    def check_fn_def(self, f: S.FnDef) -> None:
        sig = self.reg.fn_sigs.get(f.name)
        if sig is None:
            self.err("UnknownName", f, f"function {f.name} has no fnTy declaration")
        if len(sig.params) != len(f.params):
            self.err("ArityMismatch", f, f"{f.name} declares {len(sig.params)} parameter(s) but defines {len(f.params)}")
        self.env, self.stack_env, self.cur = {}, [], 0
        self.freeze, self.narrow = {}, {}
        self.enter()
        # the grammar has no mutability marker on parameters; the callee owns them
        for name, t in zip(f.params, sig.params):
            self.fresh_var(name, True, t, True)
        body_t = self.check(f.body)
        if not isinstance(sig.ret, VoidTy) and not type_equal(body_t, sig.ret, "modulo-lifetimes", self.reg):
            self.err("TypeMismatch", f, f"{f.name} returns {pretty_type(body_t)}, declared {pretty_type(sig.ret)}")
        self.exit()

    # -- expressions ---------------------------------------------------------

    def check(self, e, dest: Optional[tuple] = None) -> RType:
        t = self._check(e, dest)
        return self.note(e, t)

    def _check(self, e, dest) -> RType:
        if isinstance(e, S.IntLit):
            return I32_T
        if isinstance(e, S.BoolLit):
            return BOOL_T
        if isinstance(e, S.VoidLit):
            return VOID_T
        if isinstance(e, S.LVALUES):
            return self.read(e)
        if isinstance(e, S.BinOp):
            return self.binop(e)
        if isinstance(e, S.Borrow):
            if dest is None:
                dest = (self.temp(), self.cur)
            return self.borrow(e, dest)
        if isinstance(e, S.New):
            return self.new(e)
        if isinstance(e, S.Call):
            return self.call(e)
        if isinstance(e, S.Assign):
            return self.assign(e)
        if isinstance(e, S.InjAssign):
            return self.inj(e)
        if isinstance(e, S.Let):
            return self.let(e)
        if isinstance(e, S.Block):
            self.enter()
            t = self.check(e.body)
            self.exit()
            return t
        if isinstance(e, S.Seq):
            self.check(e.first)
            return self.check(e.second, dest)
        if isinstance(e, S.If):
            return self.branch_if(e)
        if isinstance(e, S.Case):
            return self.case(e)
        raise TypeError(f"not a surface expression: {e!r}")

    def binop(self, e: S.BinOp) -> RType:
        lt = self.check(e.left)
        rt = self.check(e.right)
        if e.op == "=":
            if not (isinstance(lt, (I32, Bool)) and type_equal(lt, rt, "strict")):
                self.err("TypeMismatch", e, f"cannot compare {pretty_type(lt)} with {pretty_type(rt)}")
            return BOOL_T
        if not (isinstance(lt, I32) and isinstance(rt, I32)):
            self.err("TypeMismatch", e, f"operator {e.op} needs i32 operands, got {pretty_type(lt)} and {pretty_type(rt)}")
        return BOOL_T if e.op in ("<", ">") else I32_T

    def new(self, e: S.New) -> RType:
        try:
            self.reg.check_wellformed(e.ty)
        except RegistryError as exc:
            self.err(exc.kind, e, exc.message)
        if e.count is None:
            try:
                self.ann.new_size[id(e)] = size_of(e.ty, self.reg)
            except RegistryError as exc:
                self.err(exc.kind, e, exc.message)
            return Own(e.ty)
        ct = self.check(e.count)
        if not isinstance(ct, I32):
            self.err("TypeMismatch", e.count, "array length must be i32")
        try:
            unit = size_of(e.ty, self.reg)
        except RegistryError as exc:
            self.err(exc.kind, e, exc.message)
        self.ann.new_size[id(e)] = unit
        return Own(Array(e.ty))

    # -- places --------------------------------------------------------------

    def lookup(self, v: S.Var) -> int:
        ix = self.env.get(v.name)
        if ix is None:
            self.err("UnknownName", v, f"unknown variable {v.name}")
        self.ann.var_idx[id(v)] = ix
        return ix

    def require_init(self, ix: int, node) -> None:
        vi = self.info[ix]
        if not vi.init:
            if ix in self.moved:
                self.err("UseOfMoved", node, f"{self.vname(ix)} was moved")
            self.err("UseOfUninit", node, f"{self.vname(ix)} is not initialized")

    def place(self, e) -> Place:
        if isinstance(e, S.Var):
            ix = self.lookup(e)
            vi = self.info[ix]
            p = Place(ix, vi.T, vi.mut)
        elif isinstance(e, S.Deref):
            p = self.deref(self.base_place(e.exp), e)
        elif isinstance(e, S.Field):
            p = self.field(e)
        else:
            raise TypeError(e)
        if p.ty is not None:
            self.note(e, p.ty)
        return p

    def base_place(self, e) -> Place:
        """Place of a sub-expression used as a path base; its root must be live."""
        if isinstance(e, S.LVALUES):
            p = self.place(e)
            if p.root is not None:
                self.require_init(p.root, e)
                if p.ty is None:
                    self.err("UseOfUninit", e, f"{self.vname(p.root)} has no value")
            return p
        t = self.check(e)
        return Place(None, t, True, direct=False)

    def deref(self, p: Place, node) -> Place:
        t = p.ty
        if isinstance(t, Own):
            return Place(p.root, t.inner, p.mutable, p.via_ref, p.via_mut_ref, False)
        if isinstance(t, Ref):
            return Place(p.root, t.inner, t.mut, True, p.via_mut_ref or t.mut, False)
        self.err("TypeMismatch", node, f"cannot dereference {pretty_type(t) if t else 'an untyped value'}")

    def field(self, e: S.Field) -> Place:
        p = self.base_place(e.base)
        derefs = []
        while isinstance(p.ty, (Own, Ref)):
            derefs.append(p.ty)
            p = self.deref(p, e)
        t = p.ty
        named = t
        try:
            t = self.reg.resolve(t)
        except RegistryError as exc:
            self.err(exc.kind, e, exc.message)
        idx = e.index
        if isinstance(t, Array):
            it = self.check(idx)
            if not isinstance(it, I32):
                self.err("TypeMismatch", idx, "array index must be i32")
            self.ann.field_kind[id(e)] = ("array", tuple(derefs), named)
            return Place(p.root, t.elem, p.mutable, p.via_ref, p.via_mut_ref, False)
        if not isinstance(idx, S.IntLit):
            self.err("TypeMismatch", idx, "only arrays accept computed indexes")
        if isinstance(t, Prod):
            if not 1 <= idx.value <= len(t.fields):
                self.err("TypeMismatch", e, f"field {idx.value} out of range for {pretty_type(named)}")
            self.ann.field_kind[id(e)] = ("prod", tuple(derefs), named)
            return Place(p.root, t.fields[idx.value - 1], p.mutable, p.via_ref, p.via_mut_ref, False)
        if isinstance(t, Sum):
            if idx.value != 1:
                self.err("TypeMismatch", e, "a sum value only has its payload field .1")
            vt = None
            root_var = e.base if isinstance(e.base, S.Var) else None
            if root_var is not None and p.root in self.narrow:
                vt = t.variants[self.narrow[p.root]]
            elif all(type_equal(v, t.variants[0], "strict", self.reg) for v in t.variants):
                vt = t.variants[0]
            if vt is None:
                self.err("TypeMismatch", e, "payload type depends on the variant; inspect it inside a case")
            self.ann.field_kind[id(e)] = ("sum", tuple(derefs), named)
            return Place(p.root, vt, p.mutable, p.via_ref, p.via_mut_ref, False)
        self.err("TypeMismatch", e, f"{pretty_type(named) if named else 'value'} has no fields")

    # -- reads, moves, borrows ------------------------------------------------

    def read(self, e, inspect: bool = False) -> RType:
        p = self.place(e)
        if p.root is None:
            return p.ty
        ix = p.root
        vi = self.info[ix]
        self.require_init(ix, e)
        if p.ty is None:
            self.err("UseOfUninit", e, f"{self.vname(ix)} has no value")
        if self.live(vi.L2):
            self.err("ConflictingMutBorrow", e, f"{self.vname(ix)} is mutably borrowed")
        if inspect or is_copy(p.ty):
            return p.ty
        if p.via_ref:
            self.err("MoveOutOfBorrow", e, f"cannot move {pretty_type(p.ty)} out of a reference")
        if self.frozen(ix):
            self.err("FrozenWrite", e, f"{self.vname(ix)} is frozen by an immutable reborrow")
        if self.live(vi.L1):
            self.err("MutBorrowWhileBorrowed", e, f"cannot move {self.vname(ix)} while it is borrowed")
        vi.init = False
        self.moved.add(ix)
        return p.ty

    def borrow(self, e: S.Borrow, dest: tuple) -> RType:
        if not isinstance(e.exp, S.LVALUES):
            self.err("TypeMismatch", e, "only places can be borrowed")
        p = self.place(e.exp)
        return self.borrow_place(e.mut, p, dest, e)

    def borrow_place(self, mut: bool, p: Place, dest: tuple, node) -> RType:
        dest_ix, depth = dest
        if p.root is not None:
            ix = p.root
            vi = self.info[ix]
            self.require_init(ix, node)
            if p.ty is None:
                self.err("UseOfUninit", node, f"{self.vname(ix)} has no value")
            if not ix < dest_ix:
                self.err("BorrowOutlivesOwner", node,
                         f"{self.vname(ix)} cannot be borrowed by {self.vname(dest_ix)}, which was created before it")
            if mut:
                if self.frozen(ix):
                    self.err("FrozenWrite", node, f"{self.vname(ix)} is frozen by an immutable reborrow")
                if self.live(vi.L2):
                    self.err("ConflictingMutBorrow", node, f"{self.vname(ix)} is already mutably borrowed")
                if self.live(vi.L1):
                    self.err("MutBorrowWhileBorrowed", node, f"{self.vname(ix)} is immutably borrowed")
                if not p.mutable:
                    self.err("AssignToImmutable", node, f"cannot borrow {self.vname(ix)} mutably through an immutable path")
                vi.L2 = _minnz(vi.L2, depth)
                if p.direct:
                    self.ann.mut_borrowed.add(ix)
            else:
                if self.live(vi.L2):
                    self.err("ConflictingMutBorrow", node, f"{self.vname(ix)} is mutably borrowed")
                if p.via_mut_ref:
                    self.freeze[ix] = _minnz(self.freeze.get(ix, 0), depth)
                else:
                    vi.L1 = _minnz(vi.L1, depth)
            self.borrow_log.append(BorrowEvent(ix, dest_ix, mut, depth))
        return Ref(LftConst(depth), mut, p.ty)

    # -- assignment ----------------------------------------------------------

    @staticmethod
    def root_var(e) -> Optional[S.Var]:
        while True:
            if isinstance(e, S.Var):
                return e
            if isinstance(e, S.Deref):
                e = e.exp
            elif isinstance(e, S.Field):
                e = e.base
            else:
                return None

    def dest_of(self, lhs) -> tuple:
        rv = self.root_var(lhs)
        if rv is not None and rv.name in self.env:
            ix = self.env[rv.name]
            return (ix, self.info[ix].L)
        return (self.temp(), self.cur)

    def assign(self, e: S.Assign) -> RType:
        rt = self.check(e.rhs, self.dest_of(e.lhs))
        lhs = e.lhs
        if isinstance(lhs, S.Var):
            ix = self.lookup(lhs)
            vi = self.info[ix]
            if self.frozen(ix):
                self.err("FrozenWrite", e, f"{self.vname(ix)} is frozen by an immutable reborrow")
            if vi.init and not vi.mut:
                self.err("AssignToImmutable", e, f"{self.vname(ix)} is immutable and already initialized")
            if self.live(vi.L1) or self.live(vi.L2):
                self.err("MutBorrowWhileBorrowed", e, f"cannot assign to {self.vname(ix)} while it is borrowed")
            if vi.T is None:
                vi.T = rt
            elif not type_equal(vi.T, rt, "modulo-lifetimes", self.reg):
                self.err("TypeMismatch", e, f"cannot assign {pretty_type(rt)} to {self.vname(ix)}: {pretty_type(vi.T)}")
            vi.init = True
            self.moved.discard(ix)
            self.note(lhs, vi.T)
            return VOID_T
        p = self.place(lhs)
        self.check_path_write(p, e)
        if not type_equal(p.ty, rt, "modulo-lifetimes", self.reg):
            self.err("TypeMismatch", e, f"cannot assign {pretty_type(rt)} to a place of type {pretty_type(p.ty)}")
        return VOID_T

    def check_path_write(self, p: Place, node, need_mut: bool = True) -> None:
        if p.root is None:
            if need_mut and not p.mutable:
                self.err("AssignToImmutable", node, "cannot write through an immutable reference")
            return
        ix = p.root
        vi = self.info[ix]
        self.require_init(ix, node)
        if self.frozen(ix):
            self.err("FrozenWrite", node, f"{self.vname(ix)} is frozen by an immutable reborrow")
        if need_mut and not p.mutable:
            self.err("AssignToImmutable", node, f"cannot write through immutable {self.vname(ix)}")
        if self.live(vi.L1) or self.live(vi.L2):
            self.err("MutBorrowWhileBorrowed", node, f"cannot write to {self.vname(ix)} while it is borrowed")

    def inj(self, e: S.InjAssign) -> RType:
        rt = self.check(e.rhs, self.dest_of(e.lhs))
        lhs = e.lhs
        p = self.place(lhs)
        t = p.ty
        while isinstance(t, (Own, Ref)):
            t = t.inner
        try:
            st = self.reg.resolve(t) if t is not None else None
        except RegistryError as exc:
            self.err(exc.kind, e, exc.message)
        if not isinstance(st, Sum):
            self.err("TypeMismatch", e, f"inj needs a sum-typed place, got {pretty_type(t) if t else 'untyped'}")
        if not 1 <= e.tag <= len(st.variants):
            self.err("InvalidInjTag", e, f"tag {e.tag} is out of range 1..{len(st.variants)}")
        vt = st.variants[e.tag - 1]
        if not type_equal(vt, rt, "modulo-lifetimes", self.reg):
            self.err("TypeMismatch", e, f"variant {e.tag} holds {pretty_type(vt)}, got {pretty_type(rt)}")
        if p.root is not None:
            if isinstance(lhs, S.Var):
                ix = p.root
                if self.frozen(ix):
                    self.err("FrozenWrite", e, f"{self.vname(ix)} is frozen by an immutable reborrow")
                vi = self.info[ix]
                if self.live(vi.L1) or self.live(vi.L2):
                    self.err("MutBorrowWhileBorrowed", e, f"cannot write to {self.vname(ix)} while it is borrowed")
                if not vi.init and not isinstance(vi.T, (Prod, Sum, Named)):
                    self.err("UseOfUninit", e, f"{self.vname(ix)} has no storage to inject into")
                vi.init = True
                self.moved.discard(ix)
            else:
                self.check_path_write(p, e, need_mut=False)
        self.ann.types[id(e)] = VOID_T
        return VOID_T

    # -- binding forms -------------------------------------------------------

    def let(self, e: S.Let) -> RType:
        self.enter()
        ix = self.reserve()
        self.ann.let_idx[id(e)] = ix
        t = None
        if e.init is not None:
            t = self.check(e.init, (ix, self.cur))
        self.bind(ix, e.name, e.mut, t, e.init is not None)
        bt = self.check(e.body)
        self.ann.var_types[ix] = self.info[ix].T
        self.exit()
        return bt

    def branch_if(self, e: S.If) -> RType:
        ct = self.check(e.cond)
        if not isinstance(ct, Bool):
            self.err("TypeMismatch", e.cond, f"condition must be bool, got {pretty_type(ct)}")
        return self.branches([e.then, e.els], e, None)

    def branches(self, exps: list, node, narrow_ix: Optional[int]) -> RType:
        snap = self.snapshot()
        states, types = [], []
        for i, b in enumerate(exps):
            self.restore(snap)
            if narrow_ix is not None:
                self.narrow[narrow_ix] = i
            types.append(self.check(b))
            states.append(self.capture())
        self.restore(snap)
        self.merge(states)
        first = types[0]
        for t in types[1:]:
            if not type_equal(first, t, "modulo-lifetimes", self.reg):
                self.err("TypeMismatch", node, f"branches disagree: {pretty_type(first)} vs {pretty_type(t)}")
        return first

    def case(self, e: S.Case) -> RType:
        scrut = e.scrutinee
        if isinstance(scrut, S.LVALUES):
            st = self.read(scrut, inspect=True)
            self.note(scrut, st)
        else:
            st = self.check(scrut)
        inner = st
        while isinstance(inner, Own):
            inner = inner.inner
        try:
            resolved = self.reg.resolve(inner)
        except RegistryError as exc:
            self.err(exc.kind, e, exc.message)
        narrow_ix = None
        if isinstance(resolved, Bool):
            n = 2
            self.ann.case_kind[id(e)] = "bool"
        elif isinstance(resolved, Sum):
            n = len(resolved.variants)
            self.ann.case_kind[id(e)] = "sum"
            if isinstance(scrut, S.Var):
                narrow_ix = self.env[scrut.name]
        else:
            self.err("TypeMismatch", e, f"cannot case on {pretty_type(st)}")
        if len(e.branches) != n:
            self.err("NonExhaustiveCase", e, f"{n} branches expected, found {len(e.branches)}")
        return self.branches(list(e.branches), e, narrow_ix)

    # -- calls ---------------------------------------------------------------

    def call(self, e: S.Call) -> RType:
        sig = self.reg.fn_sigs.get(e.name)
        if sig is None:
            self.err("UnknownName", e, f"unknown function {e.name}")
        if len(sig.params) != len(e.args):
            self.err("ArityMismatch", e, f"{e.name} takes {len(sig.params)} argument(s), got {len(e.args)}")
        scoped = not lifetimes_in(sig.ret)
        if scoped:
            self.enter()
        mapping: dict = {}
        for arg, pt in zip(e.args, sig.params):
            at = self.call_arg(arg, pt)
            if not type_equal(at, pt, "modulo-lifetimes", self.reg):
                self.err("TypeMismatch", arg, f"argument of type {pretty_type(at)} where {pretty_type(pt)} is expected")
            self.unify(pt, at, mapping)
        if scoped:
            self.exit()
        return subst_lifetimes(sig.ret, mapping)

    def call_arg(self, arg, pt: RType) -> RType:
        dest = (self.temp(), self.cur)
        if isinstance(arg, S.Borrow):
            return self.check(arg, dest)
        if isinstance(arg, S.LVALUES) and isinstance(pt, Ref) and pt.mut:
            p = self.place(arg)
            if isinstance(p.ty, Ref) and p.ty.mut:
                # passing a mutable reference reborrows through it
                if p.root is not None:
                    self.require_init(p.root, arg)
                t = self.borrow_place(True, self.deref(p, arg), dest, arg)
                self.note(arg, p.ty)
                return t
        return self.check(arg, dest)

    def unify(self, pt: RType, at: RType, mapping: dict) -> None:
        if isinstance(pt, Ref) and isinstance(at, Ref):
            if isinstance(pt.lft, LftVar) and isinstance(at.lft, LftConst):
                old = mapping.get(pt.lft.name)
                if old is None or at.lft.depth < old.depth:
                    mapping[pt.lft.name] = at.lft
            self.unify(pt.inner, at.inner, mapping)
        elif isinstance(pt, Own) and isinstance(at, Own):
            self.unify(pt.inner, at.inner, mapping)


@dataclass
class CheckResult:
    errors: list
    checker: Checker

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def annotations(self) -> Annotations:
        return self.checker.ann

    @property
    def registry(self) -> Registry:
        return self.checker.reg


def check_program(prog: S.SurfaceProgram) -> CheckResult:
    c = Checker()
    errors = c.check_program(prog)
    return CheckResult(errors, c)
