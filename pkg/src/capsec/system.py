"""Transition systems over the word-level IR: container, simulator, unroller.

A TransitionSystem holds state variables with optional init and mandatory
next expressions, free inputs, named defines (port/output signals), and
label sets used by the security properties (P, P_arch, P_uarch, mem_port).
Memory is deliberately NOT part of the state: read data enters through
per-cycle inputs and writes are only visible at the port defines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ir
from .ir import BOOL, Sort, Term, Valuation

__all__ = [
    "StateVar",
    "TransitionSystem",
    "Unrolling",
    "TransitionSystemError",
    "simulate_step",
    "unroll_window",
    "compile_stepper",
    "dump_system",
    "load_system",
    "rename_system",
    "product_system",
]


class TransitionSystemError(ValueError):
    """Structural problem in a transition system definition."""


@dataclass(frozen=True)
class StateVar:
    name: str
    sort: Sort
    next: Term
    init: Term | None = None  # None = unconstrained symbolic start


@dataclass(frozen=True)
class CapGroup:
    """A named group of variables (or defines) that together form one capability."""

    name: str
    kind: str  # register | pipeline-buffer | load-port | store-port
    fields: dict[str, str]  # tag/perms/base/top/addr/otype -> variable or define name


@dataclass(frozen=True)
class PortGroup:
    """The wire names of one memory port plus its read-data inputs."""

    name: str
    valid: str
    we: str
    addr: str
    wdata: str
    wtag: str
    size: int  # bytes per beat
    rdata: tuple[str, ...] = ()  # per-cycle read-data input names


CAP_FIELDS = ("tag", "perms", "base", "top", "addr", "otype")


@dataclass
class TransitionSystem:
    name: str = "ts"
    state_vars: dict[str, StateVar] = field(default_factory=dict)
    inputs: dict[str, Term] = field(default_factory=dict)
    defines: dict[str, Term] = field(default_factory=dict)
    labels: dict[str, tuple[str, ...]] = field(default_factory=dict)
    # Core-specific metadata, carried along so properties and the flow can
    # resolve capability locations and ports without naming conventions.
    cap_groups: dict[str, CapGroup] = field(default_factory=dict)
    port_groups: dict[str, PortGroup] = field(default_factory=dict)
    reset_values: dict[str, int] = field(default_factory=dict)
    # input levels the environment is documented to hold during verification
    # (reset inactive, protection-enable pin at its documented-enabled level)
    pin_levels: dict[str, int] = field(default_factory=dict)

    def state_term(self, name: str) -> Term:
        return ir.var(name, self.state_vars[name].sort, "state")

    def lookup(self, name: str) -> Term:
        """Resolve a state var, input, or define name to its term."""
        if name in self.state_vars:
            return self.state_term(name)
        if name in self.inputs:
            return self.inputs[name]
        if name in self.defines:
            return self.defines[name]
        raise TransitionSystemError(f"unknown signal {name!r}")

    def validate(self) -> None:
        """Check the structural invariants.

        Next/init terms may reference only declared state and input
        variables (never free symbols); defines may additionally reference
        free symbols.  P_arch and P_uarch must partition the P label.
        """
        declared = set(self.state_vars) | set(self.inputs)
        for sv in self.state_vars.values():
            if sv.next.sort is not sv.sort:
                raise TransitionSystemError(f"next({sv.name}) has sort {sv.next.sort}, var has {sv.sort}")
            for targ, what in ((sv.next, "next"), (sv.init, "init")):
                if targ is None:
                    continue
                for vname, vterm in ir.support(targ).items():
                    if vterm.role == "free":
                        raise TransitionSystemError(f"free symbol {vname!r} in {what}({sv.name})")
                    if vname not in declared:
                        raise TransitionSystemError(f"undeclared variable {vname!r} in {what}({sv.name})")
        for dname, dterm in self.defines.items():
            for vname, vterm in ir.support(dterm).items():
                if vterm.role != "free" and vname not in declared:
                    raise TransitionSystemError(f"undeclared variable {vname!r} in define {dname!r}")
        for label, names in self.labels.items():
            for n in names:
                if n not in declared and n not in self.defines:
                    raise TransitionSystemError(f"label {label!r} refers to unknown {n!r}")
        p = self.labels.get("P")
        pa, pu = self.labels.get("P_arch"), self.labels.get("P_uarch")
        if p is not None and pa is not None and pu is not None:
            if set(pa) & set(pu):
                raise TransitionSystemError("P_arch and P_uarch overlap")
            if set(pa) | set(pu) != set(p):
                raise TransitionSystemError("P_arch and P_uarch do not partition P")


def _input_valuation(ts: TransitionSystem, state: Valuation, inputs: Valuation) -> Valuation:
    for name in ts.state_vars:
        if name not in state:
            raise ir.MissingVariableError(name)
    for name in ts.inputs:
        if name not in inputs:
            raise ir.MissingVariableError(name)
    merged = dict(state)
    merged.update(inputs)
    return merged


def simulate_step(ts: TransitionSystem, state: Valuation, inputs: Valuation) -> Valuation:
    """Concrete one-cycle step: evaluate every next expression."""
    merged = _input_valuation(ts, state, inputs)
    memo: dict[int, int] = {}
    return {name: ir.eval_term(sv.next, merged, memo) for name, sv in ts.state_vars.items()}


def eval_defines(ts: TransitionSystem, state: Valuation, inputs: Valuation) -> Valuation:
    merged = _input_valuation(ts, state, inputs)
    memo: dict[int, int] = {}
    return {name: ir.eval_term(t, merged, memo) for name, t in ts.defines.items()}


def compile_stepper(ts: TransitionSystem):
    """Compile next-state and define evaluation into one python function.

    Returns f(state: dict, inputs: dict) -> (next_state: dict, defines: dict).
    Semantically identical to simulate_step/eval_defines, roughly 30x faster;
    the test suite cross-checks the two against each other.
    """
    roots = [sv.next for sv in ts.state_vars.values()] + list(ts.defines.values())
    lines = ["def _step(_s, _i):"]
    names: dict[int, str] = {}
    n = 0
    for node in ir._postorder(roots):
        nm = f"t{n}"
        n += 1
        names[node.uid] = nm
        op = node.op
        if op == "const":
            lines.append(f" {nm}={node.value}")
        elif op == "var":
            src = "_s" if node.name in ts.state_vars else "_i"
            lines.append(f" {nm}={src}[{node.name!r}]")
        elif op == "not":
            lines.append(f" {nm}={names[node.args[0].uid]}^{node.sort.mask}")
        elif op in ("and", "or", "xor"):
            sym = {"and": "&", "or": "|", "xor": "^"}[op]
            lines.append(f" {nm}={names[node.args[0].uid]}{sym}{names[node.args[1].uid]}")
        elif op == "add":
            lines.append(f" {nm}=({names[node.args[0].uid]}+{names[node.args[1].uid]})&{node.sort.mask}")
        elif op == "sub":
            lines.append(f" {nm}=({names[node.args[0].uid]}-{names[node.args[1].uid]})&{node.sort.mask}")
        elif op == "eq":
            lines.append(f" {nm}=1 if {names[node.args[0].uid]}=={names[node.args[1].uid]} else 0")
        elif op == "ult":
            lines.append(f" {nm}=1 if {names[node.args[0].uid]}<{names[node.args[1].uid]} else 0")
        elif op == "ule":
            lines.append(f" {nm}=1 if {names[node.args[0].uid]}<={names[node.args[1].uid]} else 0")
        elif op == "concat":
            lo_w = node.args[1].sort.width
            lines.append(f" {nm}=({names[node.args[0].uid]}<<{lo_w})|{names[node.args[1].uid]}")
        elif op == "extract":
            hi, lo = node.params
            lines.append(f" {nm}=({names[node.args[0].uid]}>>{lo})&{node.sort.mask}")
        elif op == "zext":
            lines.append(f" {nm}={names[node.args[0].uid]}")
        elif op == "sext":
            w = node.args[0].sort.width
            a = names[node.args[0].uid]
            hibits = node.sort.mask ^ ((1 << w) - 1)
            lines.append(f" {nm}={a}|{hibits} if {a}>>{w - 1} else {a}")
        elif op == "ite":
            c, a, b = (names[x.uid] for x in node.args)
            lines.append(f" {nm}={a} if {c} else {b}")
        else:  # pragma: no cover
            raise NotImplementedError(op)
    nxt = ",".join(f"{name!r}:{names[sv.next.uid]}" for name, sv in ts.state_vars.items())
    dfs = ",".join(f"{name!r}:{names[t.uid]}" for name, t in ts.defines.items())
    lines.append(" return {%s},{%s}" % (nxt, dfs))
    ns: dict = {}
    exec("\n".join(lines), ns)
    return ns["_step"]


@dataclass
class Unrolling:
    """A k-cycle window over a transition system with a symbolic start.

    Frame-0 state variables are fresh unconstrained symbols; inputs are
    fresh per frame; free symbols are shared across all frames.  The frame
    constraints tie frame i+1 state to the next expressions over frame i.
    """

    ts: TransitionSystem
    k: int
    pinned_inputs: dict[str, int]
    frame_vars: dict[tuple[str, int], Term]
    frame_constraints: list[Term]

    def at(self, name: str, frame: int) -> Term:
        return self.frame_vars[(name, frame)]

    def instantiate(self, t: Term, frame: int) -> Term:
        """Map a term over base state/input names onto window frame `frame`."""
        mapping: dict[Term, Term] = {}
        for vname, vterm in ir.support(t).items():
            if vterm.role == "free":
                continue
            key = (vname, frame)
            if key not in self.frame_vars:
                raise TransitionSystemError(
                    f"{vname!r} has no copy at frame {frame} (pinned or out of window)"
                )
            mapping[vterm] = self.frame_vars[key]
        return ir.substitute(t, mapping)


def unroll_window(ts: TransitionSystem, k: int, pinned_inputs: dict[str, int] | None = None) -> Unrolling:
    """Unroll `ts` over a window of k cycles (k+1 frames, t .. t+k).

    `pinned_inputs` fixes named inputs to constants at every frame (used to
    hold reset inactive and the protection-enable pin at a given level);
    pinned inputs get no frame variables.
    """
    if k < 0:
        raise ValueError("window length must be >= 0")
    pinned = dict(pinned_inputs or {})
    for name in pinned:
        if name not in ts.inputs:
            raise TransitionSystemError(f"cannot pin unknown input {name!r}")
    frame_vars: dict[tuple[str, int], Term] = {}
    for f in range(k + 1):
        for name, sv in ts.state_vars.items():
            frame_vars[(name, f)] = ir.var(f"{name}@{f}", sv.sort, "free")
        for name, vterm in ts.inputs.items():
            if name not in pinned:
                frame_vars[(name, f)] = ir.var(f"{name}@{f}", vterm.sort, "free")
    constraints: list[Term] = []
    for f in range(k):
        mapping: dict[Term, Term] = {}
        for name, sv in ts.state_vars.items():
            mapping[ir.var(name, sv.sort, "state")] = frame_vars[(name, f)]
        for name, vterm in ts.inputs.items():
            if name in pinned:
                mapping[vterm] = ir.const(pinned[name], vterm.sort)
            else:
                mapping[vterm] = frame_vars[(name, f)]
        memo: dict[int, Term] = {}
        for name, sv in ts.state_vars.items():
            stepped = ir.substitute(sv.next, mapping, memo)
            constraints.append(ir.eq(frame_vars[(name, f + 1)], stepped))
    return Unrolling(ts, k, pinned, frame_vars, constraints)


# ---------------------------------------------------------------------------
# Renaming and product construction (used by the two-instance miter).

def rename_system(ts: TransitionSystem, prefix: str, shared_free: set[str] | None = None) -> TransitionSystem:
    """Return a copy of `ts` with every variable/define/label name prefixed.

    Free symbols listed in `shared_free` keep their identity (they are
    genuinely shared between miter instances); `ts` has no free symbols in
    its own guts, so only defines can mention them.
    """
    shared = shared_free or set()
    mapping: dict[Term, Term] = {}
    for name, sv in ts.state_vars.items():
        mapping[ir.var(name, sv.sort, "state")] = ir.var(prefix + name, sv.sort, "state")
    for name, vterm in ts.inputs.items():
        mapping[vterm] = ir.var(prefix + name, vterm.sort, "input")
    memo: dict[int, Term] = {}

    def ren(t: Term) -> Term:
        out = ir.substitute(t, mapping, memo)
        for vname, vterm in ir.support(out).items():
            if vterm.role == "free" and vname not in shared:
                raise TransitionSystemError(f"unshared free symbol {vname!r} in renamed system")
        return out

    out = TransitionSystem(name=prefix + ts.name)
    for name, sv in ts.state_vars.items():
        out.state_vars[prefix + name] = StateVar(
            prefix + name, sv.sort, ren(sv.next), None if sv.init is None else ren(sv.init)
        )
    for name, vterm in ts.inputs.items():
        out.inputs[prefix + name] = mapping[vterm]
    for name, t in ts.defines.items():
        out.defines[prefix + name] = ren(t)
    for label, names in ts.labels.items():
        out.labels[label] = tuple(prefix + n for n in names)
    for gname, g in ts.cap_groups.items():
        out.cap_groups[prefix + gname] = CapGroup(
            prefix + gname, g.kind, {f: prefix + n for f, n in g.fields.items()}
        )
    for pname, p in ts.port_groups.items():
        out.port_groups[prefix + pname] = PortGroup(
            prefix + pname, prefix + p.valid, prefix + p.we, prefix + p.addr,
            prefix + p.wdata, prefix + p.wtag, p.size,
            tuple(prefix + r for r in p.rdata),
        )
    out.reset_values = {prefix + n: v for n, v in ts.reset_values.items()}
    out.pin_levels = {prefix + n: v for n, v in ts.pin_levels.items()}
    return out


def product_system(a: TransitionSystem, b: TransitionSystem, name: str = "miter") -> TransitionSystem:
    """Disjoint union of two systems (labels kept per input system)."""
    overlap = set(a.state_vars) & set(b.state_vars) or set(a.inputs) & set(b.inputs)
    if overlap:
        raise TransitionSystemError(f"instance namespaces overlap: {sorted(overlap)[:4]}")
    out = TransitionSystem(name=name)
    for src in (a, b):
        out.state_vars.update(src.state_vars)
        out.inputs.update(src.inputs)
        out.defines.update(src.defines)
        out.cap_groups.update(src.cap_groups)
        out.port_groups.update(src.port_groups)
        out.reset_values.update(src.reset_values)
        out.pin_levels.update(src.pin_levels)
    for label in sorted(set(a.labels) | set(b.labels)):
        out.labels[label] = a.labels.get(label, ()) + b.labels.get(label, ())
    return out


# ---------------------------------------------------------------------------
# Line-oriented textual dump/load, deterministic, for golden-file tests.

def _sort_str(s: Sort) -> str:
    return "bool" if s.is_bool else f"bv{s.width}"


def _parse_sort(tok: str) -> Sort:
    if tok == "bool":
        return BOOL
    if tok.startswith("bv"):
        return ir.bv(int(tok[2:]))
    raise ValueError(f"bad sort {tok!r}")


def dump_system(ts: TransitionSystem) -> str:
    """Serialize in declaration order, one declaration per line."""
    lines = [f"system {ts.name}"]
    for name, vterm in ts.inputs.items():
        lines.append(f"input {name} {_sort_str(vterm.sort)}")
    for name, sv in ts.state_vars.items():
        init = "none" if sv.init is None else ir.to_sexpr(sv.init)
        lines.append(f"state {name} {_sort_str(sv.sort)} init {init}")
    for name, sv in ts.state_vars.items():
        lines.append(f"next {name} = {ir.to_sexpr(sv.next)}")
    for name, t in ts.defines.items():
        lines.append(f"define {name} {_sort_str(t.sort)} = {ir.to_sexpr(t)}")
    for label, names in ts.labels.items():
        lines.append(f"label {label} = {' '.join(names)}")
    for g in ts.cap_groups.values():
        fields = " ".join(f"{f}={g.fields[f]}" for f in CAP_FIELDS)
        lines.append(f"capgroup {g.name} kind={g.kind} {fields}")
    for p in ts.port_groups.values():
        lines.append(
            f"port {p.name} size={p.size} valid={p.valid} we={p.we} "
            f"addr={p.addr} wdata={p.wdata} wtag={p.wtag} rdata={','.join(p.rdata)}"
        )
    for name, val in ts.reset_values.items():
        lines.append(f"reset {name} = {val}")
    for name, val in ts.pin_levels.items():
        lines.append(f"pin {name} = {val}")
    return "\n".join(lines) + "\n"


def load_system(text: str) -> TransitionSystem:
    ts = TransitionSystem()
    pending_next: dict[str, str] = {}
    pending_defines: list[tuple[str, Sort, str]] = []
    sorts: dict[str, Sort] = {}
    inits: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            head, rest = line.split(None, 1)
        except ValueError:
            raise ValueError(f"line {lineno}: bad declaration {line!r}") from None
        if head == "system":
            ts.name = rest.strip()
        elif head == "input":
            name, sort_tok = rest.split()
            ts.inputs[name] = ir.var(name, _parse_sort(sort_tok), "input")
        elif head == "state":
            name, sort_tok, kw, init = rest.split(None, 3)
            if kw != "init":
                raise ValueError(f"line {lineno}: expected 'init'")
            sorts[name] = _parse_sort(sort_tok)
            inits[name] = init
        elif head == "next":
            name, expr = rest.split("=", 1)
            pending_next[name.strip()] = expr.strip()
        elif head == "define":
            nm_sort, expr = rest.split("=", 1)
            name, sort_tok = nm_sort.split()
            pending_defines.append((name, _parse_sort(sort_tok), expr.strip()))
        elif head == "label":
            label, names = rest.split("=", 1)
            ts.labels[label.strip()] = tuple(names.split())
        elif head == "capgroup":
            toks = rest.split()
            kv = dict(t.split("=", 1) for t in toks[1:])
            ts.cap_groups[toks[0]] = CapGroup(toks[0], kv.pop("kind"), kv)
        elif head == "port":
            toks = rest.split()
            kv = dict(t.split("=", 1) for t in toks[1:])
            rdata = tuple(t for t in kv.get("rdata", "").split(",") if t)
            ts.port_groups[toks[0]] = PortGroup(
                toks[0], kv["valid"], kv["we"], kv["addr"], kv["wdata"], kv["wtag"],
                int(kv["size"]), rdata
            )
        elif head == "reset":
            name, val = rest.split("=", 1)
            ts.reset_values[name.strip()] = int(val)
        elif head == "pin":
            name, val = rest.split("=", 1)
            ts.pin_levels[name.strip()] = int(val)
        else:
            raise ValueError(f"line {lineno}: unknown declaration {head!r}")
    variables: dict[str, Term] = {}
    for name, sort in sorts.items():
        variables[name] = ir.var(name, sort, "state")
    for name, vterm in ts.inputs.items():
        variables[name] = vterm
    for name, sort in sorts.items():
        init_tok = inits[name]
        init = None if init_tok == "none" else ir.parse_sexpr(init_tok, variables)
        ts.state_vars[name] = StateVar(name, sort, ir.parse_sexpr(pending_next[name], variables), init)
    for name, sort, expr in pending_defines:
        ts.defines[name] = ir.parse_sexpr(expr, variables)
    return ts
