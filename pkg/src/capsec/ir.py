"""Word-level expression IR: sorts, hash-consed term DAGs, and a concrete evaluator.

Terms are immutable and interned, so structural equality is identity and
DAG sharing is automatic.  All arithmetic is fixed-width two's-complement
with wraparound; there are no undefined values.
"""

from __future__ import annotations

from typing import Iterable, Iterator

__all__ = [
    "Sort",
    "BOOL",
    "Term",
    "Valuation",
    "SortError",
    "MissingVariableError",
    "bv",
    "const",
    "btrue",
    "bfalse",
    "var",
    "not_",
    "and_",
    "or_",
    "xor_",
    "implies",
    "conj",
    "disj",
    "add",
    "sub",
    "eq",
    "ne",
    "ult",
    "ule",
    "concat",
    "extract",
    "zext",
    "sext",
    "ite",
    "eval_term",
    "support",
    "substitute",
]


class SortError(TypeError):
    """Operator applied to operands of the wrong sort."""


class MissingVariableError(KeyError):
    """A valuation does not cover some variable in the term's support."""


class Sort:
    """Bit-vector sort of a given width, or the boolean sort (width 0 marker)."""

    __slots__ = ("kind", "width")
    _interned: dict[tuple[str, int], "Sort"] = {}

    def __new__(cls, kind: str, width: int = 0):
        key = (kind, width)
        cached = cls._interned.get(key)
        if cached is not None:
            return cached
        if kind == "bv":
            if width < 1:
                raise SortError("bitvector width must be >= 1")
        elif kind == "bool":
            width = 0
        else:
            raise SortError(f"unknown sort kind {kind!r}")
        obj = object.__new__(cls)
        object.__setattr__(obj, "kind", kind)
        object.__setattr__(obj, "width", width)
        cls._interned[key] = obj
        return obj

    def __setattr__(self, *a):  # pragma: no cover - guard
        raise AttributeError("Sort is immutable")

    @property
    def is_bool(self) -> bool:
        return self.kind == "bool"

    @property
    def mask(self) -> int:
        return (1 << self.width) - 1 if self.kind == "bv" else 1

    def __repr__(self) -> str:
        return "bool" if self.is_bool else f"bv{self.width}"


BOOL = Sort("bool")


def bv(width: int) -> Sort:
    return Sort("bv", width)


# Variable roles.  Free symbols are never constrained by a transition
# relation; they exist so properties can quantify over e.g. an arbitrary
# protected address.
ROLES = ("state", "input", "free")

_BITWISE = ("not", "and", "or", "xor")
_ARITH = ("add", "sub")
_CMP = ("eq", "ult", "ule")

# Closed operator set; the bit-blaster relies on this being exhaustive.
OPS = (
    ("const", "var", "ite", "concat", "extract", "zext", "sext")
    + _BITWISE
    + _ARITH
    + _CMP
)


class Term:
    """One interned node of the expression DAG.

    Do not construct directly; use the builder functions below, which
    enforce the sort rules and perform light constant folding.
    """

    __slots__ = ("op", "args", "sort", "name", "value", "params", "role", "_hash", "uid")
    _interned: dict[tuple, "Term"] = {}
    _next_uid = 0

    def __new__(
        cls,
        op: str,
        args: tuple["Term", ...] = (),
        sort: Sort = BOOL,
        name: str | None = None,
        value: int | None = None,
        params: tuple[int, ...] = (),
        role: str | None = None,
    ):
        key = (op, tuple(id(a) for a in args), sort, name, value, params, role)
        cached = cls._interned.get(key)
        if cached is not None:
            return cached
        obj = object.__new__(cls)
        obj.op = op
        obj.args = args
        obj.sort = sort
        obj.name = name
        obj.value = value
        obj.params = params
        obj.role = role
        obj._hash = hash(key)
        obj.uid = cls._next_uid
        cls._next_uid += 1
        cls._interned[key] = obj
        return obj

    def __hash__(self) -> int:
        return self._hash

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    @property
    def is_var(self) -> bool:
        return self.op == "var"

    def __repr__(self) -> str:
        return to_sexpr(self)

    # Convenience operator sugar (used heavily by the core builder).
    def __and__(self, other: "Term") -> "Term":
        return and_(self, other)

    def __or__(self, other: "Term") -> "Term":
        return or_(self, other)

    def __xor__(self, other: "Term") -> "Term":
        return xor_(self, other)

    def __invert__(self) -> "Term":
        return not_(self)

    def __add__(self, other: "Term") -> "Term":
        return add(self, other)

    def __sub__(self, other: "Term") -> "Term":
        return sub(self, other)


Valuation = dict  # name -> concrete int value (0/1 for booleans)


def const(value: int, sort: Sort) -> Term:
    if sort.is_bool:
        value = 1 if value else 0
    else:
        value &= sort.mask
    return Term("const", sort=sort, value=value)


def btrue() -> Term:
    return const(1, BOOL)


def bfalse() -> Term:
    return const(0, BOOL)


def var(name: str, sort: Sort, role: str = "input") -> Term:
    if role not in ROLES:
        raise ValueError(f"unknown variable role {role!r}")
    return Term("var", sort=sort, name=name, role=role)


def _require_same(a: Term, b: Term, op: str) -> Sort:
    if a.sort is not b.sort:
        raise SortError(f"{op}: operand sorts differ ({a.sort} vs {b.sort})")
    return a.sort


def _require_bv(t: Term, op: str) -> Sort:
    if t.sort.is_bool:
        raise SortError(f"{op}: expected bitvector operand")
    return t.sort


def _require_bool(t: Term, op: str) -> None:
    if not t.sort.is_bool:
        raise SortError(f"{op}: expected boolean operand")


def not_(a: Term) -> Term:
    if a.is_const:
        return const(a.sort.mask ^ a.value, a.sort)
    if a.op == "not":
        return a.args[0]
    return Term("not", (a,), a.sort)


def and_(a: Term, b: Term) -> Term:
    s = _require_same(a, b, "and")
    if a.is_const and b.is_const:
        return const(a.value & b.value, s)
    for x, y in ((a, b), (b, a)):
        if x.is_const:
            if x.value == 0:
                return const(0, s)
            if x.value == s.mask:
                return y
    if a is b:
        return a
    return Term("and", (a, b), s)


def or_(a: Term, b: Term) -> Term:
    s = _require_same(a, b, "or")
    if a.is_const and b.is_const:
        return const(a.value | b.value, s)
    for x, y in ((a, b), (b, a)):
        if x.is_const:
            if x.value == s.mask:
                return const(s.mask, s)
            if x.value == 0:
                return y
    if a is b:
        return a
    return Term("or", (a, b), s)


def xor_(a: Term, b: Term) -> Term:
    s = _require_same(a, b, "xor")
    if a.is_const and b.is_const:
        return const(a.value ^ b.value, s)
    for x, y in ((a, b), (b, a)):
        if x.is_const:
            if x.value == 0:
                return y
            if x.value == s.mask:
                return not_(y)
    if a is b:
        return const(0, s)
    return Term("xor", (a, b), s)


def implies(a: Term, b: Term) -> Term:
    _require_bool(a, "implies")
    _require_bool(b, "implies")
    return or_(not_(a), b)


def conj(terms: Iterable[Term]) -> Term:
    acc = btrue()
    for t in terms:
        acc = and_(acc, t)
    return acc


def disj(terms: Iterable[Term]) -> Term:
    acc = bfalse()
    for t in terms:
        acc = or_(acc, t)
    return acc


def add(a: Term, b: Term) -> Term:
    s = _require_same(a, b, "add")
    _require_bv(a, "add")
    if a.is_const and b.is_const:
        return const(a.value + b.value, s)
    for x, y in ((a, b), (b, a)):
        if x.is_const and x.value == 0:
            return y
    return Term("add", (a, b), s)


def sub(a: Term, b: Term) -> Term:
    s = _require_same(a, b, "sub")
    _require_bv(a, "sub")
    if a.is_const and b.is_const:
        return const(a.value - b.value, s)
    if b.is_const and b.value == 0:
        return a
    if a is b:
        return const(0, s)
    return Term("sub", (a, b), s)


def eq(a: Term, b: Term) -> Term:
    _require_same(a, b, "eq")
    if a is b:
        return btrue()
    if a.is_const and b.is_const:
        return btrue() if a.value == b.value else bfalse()
    if a.sort.is_bool:
        return not_(xor_(a, b))
    return Term("eq", (a, b), BOOL)


def ne(a: Term, b: Term) -> Term:
    return not_(eq(a, b))


def ult(a: Term, b: Term) -> Term:
    _require_same(a, b, "ult")
    _require_bv(a, "ult")
    if a.is_const and b.is_const:
        return btrue() if a.value < b.value else bfalse()
    if b.is_const and b.value == 0:
        return bfalse()
    if a is b:
        return bfalse()
    return Term("ult", (a, b), BOOL)


def ule(a: Term, b: Term) -> Term:
    _require_same(a, b, "ule")
    _require_bv(a, "ule")
    if a.is_const and b.is_const:
        return btrue() if a.value <= b.value else bfalse()
    if a.is_const and a.value == 0:
        return btrue()
    if a is b:
        return btrue()
    return Term("ule", (a, b), BOOL)


def concat(hi: Term, lo: Term) -> Term:
    sh = _require_bv(hi, "concat")
    sl = _require_bv(lo, "concat")
    s = bv(sh.width + sl.width)
    if hi.is_const and lo.is_const:
        return const((hi.value << sl.width) | lo.value, s)
    return Term("concat", (hi, lo), s)


def extract(a: Term, hi: int, lo: int) -> Term:
    sa = _require_bv(a, "extract")
    if not (0 <= lo <= hi < sa.width):
        raise SortError(f"extract[{hi}:{lo}] out of range for {sa}")
    s = bv(hi - lo + 1)
    if a.is_const:
        return const(a.value >> lo, s)
    if lo == 0 and hi == sa.width - 1:
        return a
    return Term("extract", (a,), s, params=(hi, lo))


def zext(a: Term, width: int) -> Term:
    sa = _require_bv(a, "zext")
    if width < sa.width:
        raise SortError("zext target narrower than operand")
    if width == sa.width:
        return a
    if a.is_const:
        return const(a.value, bv(width))
    return Term("zext", (a,), bv(width), params=(width,))


def sext(a: Term, width: int) -> Term:
    sa = _require_bv(a, "sext")
    if width < sa.width:
        raise SortError("sext target narrower than operand")
    if width == sa.width:
        return a
    if a.is_const:
        v = a.value
        if v >> (sa.width - 1):
            v |= ((1 << (width - sa.width)) - 1) << sa.width
        return const(v, bv(width))
    return Term("sext", (a,), bv(width), params=(width,))


def ite(c: Term, a: Term, b: Term) -> Term:
    _require_bool(c, "ite")
    s = _require_same(a, b, "ite")
    if c.is_const:
        return a if c.value else b
    if a is b:
        return a
    if s.is_bool:
        if a.is_const and b.is_const:
            # a=1,b=0 -> c ; a=0,b=1 -> !c (a==b handled by folding above)
            return c if a.value else not_(c)
    return Term("ite", (c, a, b), s)


def _postorder(roots: Iterable[Term]) -> Iterator[Term]:
    """Deterministic post-order over the DAG reachable from `roots`."""
    seen: set[int] = set()
    stack: list[tuple[Term, bool]] = [(r, False) for r in reversed(list(roots))]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            yield node
            continue
        if node.uid in seen:
            continue
        seen.add(node.uid)
        stack.append((node, True))
        for a in reversed(node.args):
            if a.uid not in seen:
                stack.append((a, False))


def support(t: Term) -> dict[str, Term]:
    """All variables reachable from `t`, keyed by name (insertion order)."""
    out: dict[str, Term] = {}
    for node in _postorder([t]):
        if node.is_var:
            out[node.name] = node
    return out


_order_cache: dict[int, list[Term]] = {}


def _cached_order(t: Term) -> list[Term]:
    order = _order_cache.get(t.uid)
    if order is None:
        order = list(_postorder([t]))
        _order_cache[t.uid] = order
    return order


def eval_term(t: Term, v: Valuation, _memo: dict[int, int] | None = None) -> int:
    """Evaluate `t` under the concrete valuation `v`.

    Raises MissingVariableError if `v` does not cover the term's support.
    Results are always reduced modulo the term's sort width.
    """
    memo = _memo if _memo is not None else {}
    for node in _cached_order(t):
        if node.uid in memo:
            continue
        op = node.op
        if op == "const":
            val = node.value
        elif op == "var":
            try:
                val = v[node.name]
            except KeyError:
                raise MissingVariableError(node.name) from None
            val &= node.sort.mask
        else:
            a = memo[node.args[0].uid]
            if op == "not":
                val = node.sort.mask ^ a
            elif op == "extract":
                hi, lo = node.params
                val = (a >> lo) & node.sort.mask
            elif op == "zext":
                val = a
            elif op == "sext":
                w = node.args[0].sort.width
                val = a
                if a >> (w - 1):
                    val |= node.sort.mask ^ ((1 << w) - 1)
            elif op == "ite":
                val = memo[node.args[1].uid] if a else memo[node.args[2].uid]
            else:
                b = memo[node.args[1].uid]
                if op == "and":
                    val = a & b
                elif op == "or":
                    val = a | b
                elif op == "xor":
                    val = a ^ b
                elif op == "add":
                    val = (a + b) & node.sort.mask
                elif op == "sub":
                    val = (a - b) & node.sort.mask
                elif op == "eq":
                    val = 1 if a == b else 0
                elif op == "ult":
                    val = 1 if a < b else 0
                elif op == "ule":
                    val = 1 if a <= b else 0
                elif op == "concat":
                    val = (a << node.args[1].sort.width) | b
                else:  # pragma: no cover - operator set is closed
                    raise NotImplementedError(op)
        memo[node.uid] = val
    return memo[t.uid]


def substitute(t: Term, mapping: dict[Term, Term], _memo: dict[int, Term] | None = None) -> Term:
    """Rewrite `t`, replacing variable nodes per `mapping` (keyed by Term)."""
    memo = _memo if _memo is not None else {}
    for node in _postorder([t]):
        if node.uid in memo:
            continue
        if node.is_var:
            memo[node.uid] = mapping.get(node, node)
            continue
        if node.is_const:
            memo[node.uid] = node
            continue
        new_args = tuple(memo[a.uid] for a in node.args)
        if all(n is o for n, o in zip(new_args, node.args)):
            memo[node.uid] = node
            continue
        memo[node.uid] = _rebuild(node.op, new_args, node.params, node.sort)
    return memo[t.uid]


def _rebuild(op: str, args: tuple[Term, ...], params: tuple[int, ...], sort: Sort) -> Term:
    if op == "not":
        return not_(args[0])
    if op == "and":
        return and_(args[0], args[1])
    if op == "or":
        return or_(args[0], args[1])
    if op == "xor":
        return xor_(args[0], args[1])
    if op == "add":
        return add(args[0], args[1])
    if op == "sub":
        return sub(args[0], args[1])
    if op == "eq":
        return eq(args[0], args[1])
    if op == "ult":
        return ult(args[0], args[1])
    if op == "ule":
        return ule(args[0], args[1])
    if op == "concat":
        return concat(args[0], args[1])
    if op == "extract":
        return extract(args[0], params[0], params[1])
    if op == "zext":
        return zext(args[0], params[0])
    if op == "sext":
        return sext(args[0], params[0])
    if op == "ite":
        return ite(args[0], args[1], args[2])
    raise NotImplementedError(op)  # pragma: no cover


def to_sexpr(t: Term) -> str:
    """Render a term as a deterministic s-expression (used by the dump format)."""
    parts: dict[int, str] = {}
    for node in _postorder([t]):
        if node.op == "const":
            if node.sort.is_bool:
                parts[node.uid] = "true" if node.value else "false"
            else:
                parts[node.uid] = f"(const {node.value} {node.sort.width})"
        elif node.op == "var":
            parts[node.uid] = node.name
        else:
            head = node.op
            if node.params:
                head += " " + " ".join(str(p) for p in node.params)
            body = " ".join(parts[a.uid] for a in node.args)
            parts[node.uid] = f"({head} {body})"
    return parts[t.uid]


def parse_sexpr(text: str, variables: dict[str, Term]) -> Term:
    """Parse the `to_sexpr` notation back into a term.

    `variables` maps names to already-declared variable terms.
    """
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def parse() -> Term:
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            head = tokens[pos]
            pos += 1
            params: list[int] = []
            while tokens[pos] not in ("(", ")") and _is_int(tokens[pos]):
                # Parameters of extract/zext/sext/const are bare integers.
                params.append(int(tokens[pos]))
                pos += 1
            args: list[Term] = []
            while tokens[pos] != ")":
                args.append(parse())
            pos += 1
            if head == "const":
                return const(params[0], bv(params[1]))
            return _rebuild(head, tuple(args), tuple(params), BOOL)
        if tok == "true":
            return btrue()
        if tok == "false":
            return bfalse()
        if tok in variables:
            return variables[tok]
        raise ValueError(f"unknown identifier {tok!r} in term")

    t = parse()
    if pos != len(tokens):
        raise ValueError("trailing tokens in term")
    return t


def _is_int(tok: str) -> bool:
    try:
        int(tok)
        return True
    except ValueError:
        return False
