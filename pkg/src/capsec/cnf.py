"""Bit-blasting of word-level terms to CNF, plus DIMACS text I/O.

The encoding is a standard structural (Tseitin-style) translation with
constant short-circuiting at the literal level.  Variable numbering is
deterministic: nodes are visited in a fixed post-order over the constraint
list, so identical inputs always produce byte-identical DIMACS.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ir
from .ir import Term

__all__ = ["CnfFormula", "BitBlastError", "bitblast", "to_dimacs", "from_dimacs"]

TRUE_LIT = 1  # variable 1 is reserved as constant true


class BitBlastError(ValueError):
    pass


@dataclass
class CnfFormula:
    num_vars: int = 1
    clauses: list[list[int]] = field(default_factory=lambda: [[TRUE_LIT]])
    # (variable name, bit index) -> propositional variable, LSB first.
    var_bits: dict[str, list[int]] = field(default_factory=dict)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def value_of(self, name: str, model: list[bool]) -> int:
        """Read a named word back out of a satisfying assignment."""
        val = 0
        for i, lit in enumerate(self.var_bits[name]):
            b = model[lit] if lit > 0 else not model[-lit]
            if b:
                val |= 1 << i
        return val


class _Blaster:
    def __init__(self) -> None:
        self.cnf = CnfFormula()
        self.memo: dict[int, list[int]] = {}
        self._and_cache: dict[tuple[int, int], int] = {}
        self._xor_cache: dict[tuple[int, int], int] = {}

    def new_var(self) -> int:
        self.cnf.num_vars += 1
        return self.cnf.num_vars

    def clause(self, *lits: int) -> None:
        self.cnf.clauses.append(list(lits))

    # -- gate-level builders with constant/duplicate short-circuiting -----

    def land(self, a: int, b: int) -> int:
        if a == TRUE_LIT:
            return b
        if b == TRUE_LIT:
            return a
        if a == -TRUE_LIT or b == -TRUE_LIT:
            return -TRUE_LIT
        if a == b:
            return a
        if a == -b:
            return -TRUE_LIT
        key = (a, b) if a < b else (b, a)
        v = self._and_cache.get(key)
        if v is None:
            v = self.new_var()
            self.clause(-v, a)
            self.clause(-v, b)
            self.clause(v, -a, -b)
            self._and_cache[key] = v
        return v

    def lor(self, a: int, b: int) -> int:
        return -self.land(-a, -b)

    def lxor(self, a: int, b: int) -> int:
        if a == TRUE_LIT:
            return -b
        if a == -TRUE_LIT:
            return b
        if b == TRUE_LIT:
            return -a
        if b == -TRUE_LIT:
            return a
        if a == b:
            return -TRUE_LIT
        if a == -b:
            return TRUE_LIT
        key = (a, b) if abs(a) < abs(b) else (b, a)
        v = self._xor_cache.get(key)
        if v is None:
            v = self.new_var()
            self.clause(-v, a, b)
            self.clause(-v, -a, -b)
            self.clause(v, -a, b)
            self.clause(v, a, -b)
            self._xor_cache[key] = v
        return v

    def lite(self, c: int, a: int, b: int) -> int:
        if c == TRUE_LIT:
            return a
        if c == -TRUE_LIT:
            return b
        if a == b:
            return a
        if a == TRUE_LIT:
            return self.lor(c, b)
        if a == -TRUE_LIT:
            return self.land(-c, b)
        if b == TRUE_LIT:
            return self.lor(-c, a)
        if b == -TRUE_LIT:
            return self.land(c, a)
        v = self.new_var()
        self.clause(-v, -c, a)
        self.clause(-v, c, b)
        self.clause(v, -c, -a)
        self.clause(v, c, -b)
        self.clause(v, -a, -b)
        self.clause(-v, a, b)
        return v

    def lmaj(self, a: int, b: int, c: int) -> int:
        for x, y, z in ((a, b, c), (b, a, c), (c, a, b)):
            if x == TRUE_LIT:
                return self.lor(y, z)
            if x == -TRUE_LIT:
                return self.land(y, z)
        v = self.new_var()
        self.clause(-v, a, b)
        self.clause(-v, a, c)
        self.clause(-v, b, c)
        self.clause(v, -a, -b)
        self.clause(v, -a, -c)
        self.clause(v, -b, -c)
        return v

    def land_reduce(self, lits: list[int]) -> int:
        out = []
        for l in lits:
            if l == -TRUE_LIT:
                return -TRUE_LIT
            if l != TRUE_LIT:
                out.append(l)
        if not out:
            return TRUE_LIT
        if len(out) == 1:
            return out[0]
        v = self.new_var()
        for l in out:
            self.clause(-v, l)
        self.clause(v, *[-l for l in out])
        return v

    # -- word-level operators ---------------------------------------------

    def adder(self, xs: list[int], ys: list[int], cin: int) -> list[int]:
        out = []
        carry = cin
        for a, b in zip(xs, ys):
            out.append(self.lxor(self.lxor(a, b), carry))
            carry = self.lmaj(a, b, carry)
        return out

    def less_than(self, xs: list[int], ys: list[int]) -> int:
        lt = -TRUE_LIT
        for a, b in zip(xs, ys):  # LSB to MSB; later bits dominate
            lt = self.lite(self.lxor(a, b), self.land(-a, b), lt)
        return lt

    def blast(self, t: Term) -> list[int]:
        for node in ir._postorder([t]):
            if node.uid in self.memo:
                continue
            self.memo[node.uid] = self._blast_node(node)
        return self.memo[t.uid]

    def _blast_node(self, node: Term) -> list[int]:
        op = node.op
        width = 1 if node.sort.is_bool else node.sort.width
        if op == "const":
            return [TRUE_LIT if (node.value >> i) & 1 else -TRUE_LIT for i in range(width)]
        if op == "var":
            bits = self.cnf.var_bits.get(node.name)
            if bits is None:
                bits = [self.new_var() for _ in range(width)]
                self.cnf.var_bits[node.name] = bits
            return bits
        args = [self.memo[a.uid] for a in node.args]
        if op == "not":
            return [-l for l in args[0]]
        if op == "and":
            return [self.land(a, b) for a, b in zip(*args)]
        if op == "or":
            return [self.lor(a, b) for a, b in zip(*args)]
        if op == "xor":
            return [self.lxor(a, b) for a, b in zip(*args)]
        if op == "add":
            return self.adder(args[0], args[1], -TRUE_LIT)
        if op == "sub":
            return self.adder(args[0], [-l for l in args[1]], TRUE_LIT)
        if op == "eq":
            return [self.land_reduce([-self.lxor(a, b) for a, b in zip(*args)])]
        if op == "ult":
            return [self.less_than(args[0], args[1])]
        if op == "ule":
            return [-self.less_than(args[1], args[0])]
        if op == "concat":
            return args[1] + args[0]
        if op == "extract":
            hi, lo = node.params
            return args[0][lo : hi + 1]
        if op == "zext":
            pad = node.sort.width - len(args[0])
            return args[0] + [-TRUE_LIT] * pad
        if op == "sext":
            pad = node.sort.width - len(args[0])
            return args[0] + [args[0][-1]] * pad
        if op == "ite":
            c = args[0][0]
            return [self.lite(c, a, b) for a, b in zip(args[1], args[2])]
        raise BitBlastError(f"unsupported operator {op!r}")  # pragma: no cover


def bitblast(constraints: list[Term]) -> CnfFormula:
    """Encode a conjunction of boolean terms as an equisatisfiable CNF."""
    bl = _Blaster()
    for t in constraints:
        if not t.sort.is_bool:
            raise BitBlastError("top-level constraints must be boolean-sorted")
        lit = bl.blast(t)[0]
        bl.clause(lit)
    return bl.cnf


def to_dimacs(cnf: CnfFormula) -> str:
    lines = [f"p cnf {cnf.num_vars} {cnf.num_clauses}"]
    for cl in cnf.clauses:
        lines.append(" ".join(str(l) for l in cl) + " 0")
    return "\n".join(lines) + "\n"


def from_dimacs(text: str) -> CnfFormula:
    num_vars = 0
    clauses: list[list[int]] = []
    cur: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith(("c", "%")):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"bad DIMACS header {line!r}")
            num_vars = int(parts[2])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(cur)
                cur = []
            else:
                cur.append(lit)
    if cur:
        clauses.append(cur)
    return CnfFormula(num_vars=max(num_vars, 1), clauses=clauses)
