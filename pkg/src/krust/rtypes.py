"""Surface types, the compound-type registry, and type utilities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class LftConst:
    depth: int

    def __str__(self) -> str:
        return f"lft({self.depth})"


@dataclass(frozen=True)
class LftVar:
    name: str  # without the leading quote

    def __str__(self) -> str:
        return f"'{self.name}"


Lifetime = Union[LftConst, LftVar]


@dataclass(frozen=True)
class I32:
    pass


@dataclass(frozen=True)
class Bool:
    pass


@dataclass(frozen=True)
class VoidTy:
    pass


@dataclass(frozen=True)
class Ref:
    lft: Lifetime
    mut: bool
    inner: "RType"


@dataclass(frozen=True)
class Own:
    inner: "RType"


@dataclass(frozen=True)
class Prod:
    lfts: tuple
    fields: tuple


@dataclass(frozen=True)
class Sum:
    lfts: tuple
    variants: tuple


@dataclass(frozen=True)
class FnTy:
    lvars: tuple  # lifetime variable names
    params: tuple
    ret: "RType"


@dataclass(frozen=True)
class Array:
    elem: "RType"


@dataclass(frozen=True)
class Named:
    name: str


RType = Union[I32, Bool, VoidTy, Ref, Own, Prod, Sum, FnTy, Array, Named]

I32_T, BOOL_T, VOID_T = I32(), Bool(), VoidTy()


def pretty_type(t: RType) -> str:
    if isinstance(t, I32):
        return "i32"
    if isinstance(t, Bool):
        return "bool"
    if isinstance(t, VoidTy):
        return "void"
    if isinstance(t, Ref):
        return f"ref({t.lft},{'mut' if t.mut else 'imm'},{pretty_type(t.inner)})"
    if isinstance(t, Own):
        return f"own({pretty_type(t.inner)})"
    if isinstance(t, Array):
        return f"array({pretty_type(t.elem)})"
    if isinstance(t, Named):
        return f"ty({t.name})"
    if isinstance(t, (Prod, Sum)):
        head = "prodTy" if isinstance(t, Prod) else "sumTy"
        elems = t.fields if isinstance(t, Prod) else t.variants
        body = ",".join(pretty_type(x) for x in elems)
        if t.lfts:
            body = ",".join(str(lt) for lt in t.lfts) + ";" + body
        return f"{head}({body})"
    if isinstance(t, FnTy):
        lv = ",".join(f"'{v}" for v in t.lvars)
        ps = ",".join(pretty_type(p) for p in t.params)
        return f"fnTy({lv};{ps};{pretty_type(t.ret)})"
    raise TypeError(f"not a type: {t!r}")


# --------------------------------------------------------------------------
# Registry
# --------------------------------------------------------------------------


class RegistryError(Exception):
    kind = "RegistryError"

    def __init__(self, message: str, pos=None):
        super().__init__(message)
        self.message = message
        self.pos = pos


class DuplicateType(RegistryError):
    kind = "DuplicateType"


class Unsized(RegistryError):
    kind = "Unsized"


class UnknownType(RegistryError):
    kind = "UnknownType"


class InvalidDeclaration(RegistryError):
    kind = "InvalidDeclaration"


@dataclass
class Entry:
    id: int
    kind: str  # "prod" | "sum"
    elems: dict
    count: int
    lfts: tuple = ()


@dataclass
class Registry:
    """Compound types by name plus declared function signatures."""

    next_id: int = 0
    entries: dict = field(default_factory=dict)
    fn_sigs: dict = field(default_factory=dict)

    def declare(self, name: str, ty: RType, pos=None) -> None:
        if name in self.entries or name in self.fn_sigs:
            raise DuplicateType(f"type {name} is declared twice", pos)
        if isinstance(ty, FnTy):
            self.fn_sigs[name] = ty
            return
        if not isinstance(ty, (Prod, Sum)):
            raise InvalidDeclaration(f"{name} must name a prodTy, sumTy or fnTy", pos)
        elems = ty.fields if isinstance(ty, Prod) else ty.variants
        if not elems:
            raise InvalidDeclaration(f"{name} has no fields", pos)
        for e in elems:
            if not is_unit_sized(e):
                raise InvalidDeclaration(
                    f"{name}: element {pretty_type(e)} must occupy one unit; store it behind own(...)", pos
                )
        kind = "prod" if isinstance(ty, Prod) else "sum"
        self.entries[name] = Entry(self.next_id, kind, {i + 1: e for i, e in enumerate(elems)}, len(elems), ty.lfts)
        self.next_id += 1

    def lookup(self, name: str) -> Entry:
        entry = self.entries.get(name)
        if entry is None:
            raise UnknownType(f"unknown type {name}")
        return entry

    def resolve(self, t: RType) -> RType:
        """Replace a top-level Named by its Prod/Sum definition."""
        if isinstance(t, Named):
            e = self.lookup(t.name)
            elems = tuple(e.elems[i] for i in range(1, e.count + 1))
            return Prod(e.lfts, elems) if e.kind == "prod" else Sum(e.lfts, elems)
        return t

    def check_wellformed(self, t: RType) -> None:
        """Every Named inside ``t`` must be registered."""
        if isinstance(t, Named):
            self.lookup(t.name)
        elif isinstance(t, (Ref, Own)):
            self.check_wellformed(t.inner)
        elif isinstance(t, Array):
            self.check_wellformed(t.elem)
        elif isinstance(t, Prod):
            for f in t.fields:
                self.check_wellformed(f)
        elif isinstance(t, Sum):
            for f in t.variants:
                self.check_wellformed(f)
        elif isinstance(t, FnTy):
            for p in t.params:
                self.check_wellformed(p)
            self.check_wellformed(t.ret)


def declare_type(name: str, ty: RType, reg: Registry) -> Registry:
    reg.declare(name, ty)
    return reg


def is_unit_sized(t: RType) -> bool:
    return isinstance(t, (I32, Bool, VoidTy, Ref, Own))


def is_compound(t: RType, reg: Optional[Registry] = None) -> bool:
    return isinstance(t, (Prod, Sum, Named, Array))


def size_of(t: RType, reg: Registry, count: Optional[int] = None) -> int:
    if isinstance(t, Array):
        if count is None:
            raise Unsized(f"{pretty_type(t)} has no static size")
        return count * size_of(t.elem, reg)
    if count is not None:
        return count * size_of(t, reg)
    if is_unit_sized(t):
        return 1
    t = reg.resolve(t)
    if isinstance(t, Prod):
        return len(t.fields)
    if isinstance(t, Sum):
        return 2
    raise Unsized(f"{pretty_type(t)} has no size")


def is_copy(t: RType) -> bool:
    if isinstance(t, (I32, Bool, VoidTy)):
        return True
    return isinstance(t, Ref) and not t.mut


def type_equal(a: RType, b: RType, mode: str = "strict", reg: Optional[Registry] = None) -> bool:
    if mode not in ("strict", "modulo-lifetimes"):
        raise ValueError(mode)
    return _eq(a, b, mode == "strict", reg, set())


def _lfts_eq(x: tuple, y: tuple, strict: bool) -> bool:
    return not strict or x == y


def _eq(a: RType, b: RType, strict: bool, reg: Optional[Registry], assumed: set) -> bool:
    if isinstance(a, Named) and isinstance(b, Named) and a.name == b.name:
        return True
    if isinstance(a, Named) or isinstance(b, Named):
        if reg is None:
            return False
        pair = (a, b)
        if pair in assumed:
            return True
        try:
            ra, rb = reg.resolve(a), reg.resolve(b)
        except UnknownType:
            return False
        return _eq(ra, rb, strict, reg, assumed | {pair})
    if type(a) is not type(b):
        return False
    if isinstance(a, (I32, Bool, VoidTy)):
        return True
    if isinstance(a, Ref):
        if a.mut != b.mut:
            return False
        if strict and a.lft != b.lft:
            return False
        return _eq(a.inner, b.inner, strict, reg, assumed)
    if isinstance(a, Own):
        return _eq(a.inner, b.inner, strict, reg, assumed)
    if isinstance(a, Array):
        return _eq(a.elem, b.elem, strict, reg, assumed)
    if isinstance(a, (Prod, Sum)):
        xs = a.fields if isinstance(a, Prod) else a.variants
        ys = b.fields if isinstance(b, Prod) else b.variants
        return (
            _lfts_eq(a.lfts, b.lfts, strict)
            and len(xs) == len(ys)
            and all(_eq(x, y, strict, reg, assumed) for x, y in zip(xs, ys))
        )
    if isinstance(a, FnTy):
        return (
            (not strict or a.lvars == b.lvars)
            and len(a.params) == len(b.params)
            and all(_eq(x, y, strict, reg, assumed) for x, y in zip(a.params, b.params))
            and _eq(a.ret, b.ret, strict, reg, assumed)
        )
    return False


def lifetimes_in(t: RType) -> set:
    """Lifetime variable names mentioned anywhere in ``t``."""
    out: set = set()

    def walk(x):
        if isinstance(x, Ref):
            if isinstance(x.lft, LftVar):
                out.add(x.lft.name)
            walk(x.inner)
        elif isinstance(x, Own):
            walk(x.inner)
        elif isinstance(x, Array):
            walk(x.elem)
        elif isinstance(x, (Prod, Sum)):
            for lt in x.lfts:
                if isinstance(lt, LftVar):
                    out.add(lt.name)
            for f in (x.fields if isinstance(x, Prod) else x.variants):
                walk(f)
        elif isinstance(x, FnTy):
            for p in x.params:
                walk(p)
            walk(x.ret)

    walk(t)
    return out


def subst_lifetimes(t: RType, mapping: dict) -> RType:
    """Replace lifetime variables by the lifetimes in ``mapping``."""

    def lt(x):
        if isinstance(x, LftVar) and x.name in mapping:
            return mapping[x.name]
        return x

    if isinstance(t, Ref):
        return Ref(lt(t.lft), t.mut, subst_lifetimes(t.inner, mapping))
    if isinstance(t, Own):
        return Own(subst_lifetimes(t.inner, mapping))
    if isinstance(t, Array):
        return Array(subst_lifetimes(t.elem, mapping))
    if isinstance(t, Prod):
        return Prod(tuple(lt(x) for x in t.lfts), tuple(subst_lifetimes(f, mapping) for f in t.fields))
    if isinstance(t, Sum):
        return Sum(tuple(lt(x) for x in t.lfts), tuple(subst_lifetimes(f, mapping) for f in t.variants))
    return t
