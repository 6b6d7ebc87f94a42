"""Propositional satisfiability backends.

The embedded solver is a compact CDCL implementation (two-watched-literal
propagation, VSIDS-style activities, 1UIP learning with self-subsumption
minimization, Luby restarts, activity-based clause deletion).  It is fully
deterministic for a given formula, which the reproducibility guarantees of
the whole kit rely on.

A second backend talks standard DIMACS CNF to an external solver process;
run `python -m capsec.sat file.cnf` to use this module itself as such a
process.  Both backends must agree; the test suite enforces this.
"""

from __future__ import annotations

import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field

from .cnf import CnfFormula, from_dimacs, to_dimacs

__all__ = ["SatResult", "SolverError", "solve", "EmbeddedSolver", "DimacsSolver", "default_external_command"]


class SolverError(RuntimeError):
    """External backend failed or produced malformed output."""


@dataclass
class SatResult:
    status: str  # sat | unsat | unknown
    model: list[bool] | None = None  # indexed by variable, entry 0 unused
    stats: dict = field(default_factory=dict)
    reason: str = ""


class EmbeddedSolver:
    """Deterministic CDCL solver over a CnfFormula."""

    def __init__(self, timeout: float | None = 300.0, clause_cap: int | None = 4_000_000):
        self.timeout = timeout
        self.clause_cap = clause_cap

    def solve(self, cnf: CnfFormula) -> SatResult:
        n = cnf.num_vars
        self.assign = [0] * (n + 1)
        self.level = [0] * (n + 1)
        self.reason = [-1] * (n + 1)
        self.activity = [0.0] * (n + 1)
        self.phase = [False] * (n + 1)
        self.seen = bytearray(n + 1)
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.watches: list[list[int]] = [[] for _ in range(2 * n + 2)]
        self.clauses: list[list[int]] = []
        self.cla_activity: dict[int, float] = {}
        self.var_inc = 1.0
        self.cla_inc = 1.0
        self.n_orig = 0
        self.stats = {"decisions": 0, "conflicts": 0, "propagations": 0, "restarts": 0, "learned": 0}
        import heapq

        self._heapq = heapq
        self.order: list[tuple[float, int]] = [(0.0, v) for v in range(1, n + 1)]
        heapq.heapify(self.order)

        units: list[int] = []
        for cl in cnf.clauses:
            lits: list[int] = []
            skip = False
            for l in sorted(set(cl), key=abs):
                if -l in lits:
                    skip = True
                    break
                lits.append(l)
            if skip:
                continue
            if not lits:
                return SatResult("unsat", stats=self.stats)
            if len(lits) == 1:
                units.append(lits[0])
            else:
                self._attach(lits)
        self.n_orig = len(self.clauses)
        for u in units:
            v = self._value(u)
            if v == -1:
                return SatResult("unsat", stats=self.stats)
            if v == 0:
                self._enqueue(u, -1)
        if self._propagate() != -1:
            return SatResult("unsat", stats=self.stats)

        start = time.monotonic()
        conflicts_at_restart = 0
        restart_idx = 1
        limit = _luby(restart_idx) * 128
        max_learned = 4000
        while True:
            confl = self._propagate()
            if confl != -1:
                self.stats["conflicts"] += 1
                conflicts_at_restart += 1
                if not self.trail_lim:
                    return SatResult("unsat", stats=self.stats)
                learnt, bt = self._analyze(confl)
                self._backtrack(bt)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], -1)
                else:
                    ci = self._attach(learnt)
                    self.cla_activity[ci] = self.cla_inc
                    self.stats["learned"] += 1
                    self._enqueue(learnt[0], ci)
                self.var_inc /= 0.95
                self.cla_inc /= 0.999
                if self.var_inc > 1e100:
                    self._rescale_var()
                if self.cla_inc > 1e20:
                    self._rescale_cla()
                if self.stats["conflicts"] % 1024 == 0:
                    if self.timeout is not None and time.monotonic() - start > self.timeout:
                        return SatResult("unknown", stats=self.stats, reason="timeout")
                    if self.clause_cap is not None and len(self.clauses) > self.clause_cap:
                        return SatResult("unknown", stats=self.stats, reason="clause cap")
            else:
                if conflicts_at_restart >= limit:
                    conflicts_at_restart = 0
                    restart_idx += 1
                    limit = _luby(restart_idx) * 128
                    self.stats["restarts"] += 1
                    self._backtrack(0)
                    continue
                if len(self.clauses) - self.n_orig > max_learned:
                    self._reduce_db()
                    max_learned = max_learned * 13 // 10
                lit = self._decide()
                if lit == 0:
                    model = [False] * (n + 1)
                    for v in range(1, n + 1):
                        model[v] = self.assign[v] == 1
                    return SatResult("sat", model=model, stats=self.stats)
                self.stats["decisions"] += 1
                self.trail_lim.append(len(self.trail))
                self._enqueue(lit, -1)

    # -- internals ---------------------------------------------------------

    @staticmethod
    def _widx(lit: int) -> int:
        return 2 * lit if lit > 0 else -2 * lit + 1

    def _value(self, lit: int) -> int:
        a = self.assign[lit if lit > 0 else -lit]
        return a if lit > 0 else -a

    def _attach(self, lits: list[int]) -> int:
        ci = len(self.clauses)
        self.clauses.append(lits)
        self.watches[self._widx(lits[0])].append(ci)
        self.watches[self._widx(lits[1])].append(ci)
        return ci

    def _enqueue(self, lit: int, reason: int) -> None:
        v = lit if lit > 0 else -lit
        self.assign[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.phase[v] = lit > 0
        self.trail.append(lit)

    def _propagate(self) -> int:
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            self.stats["propagations"] += 1
            wl = self.watches[self._widx(-p)]
            i = j = 0
            nwl = len(wl)
            while i < nwl:
                ci = wl[i]
                i += 1
                cl = self.clauses[ci]
                if cl[0] == -p:
                    cl[0], cl[1] = cl[1], cl[0]
                first = cl[0]
                if self._value(first) == 1:
                    wl[j] = ci
                    j += 1
                    continue
                for k in range(2, len(cl)):
                    if self._value(cl[k]) != -1:
                        cl[1], cl[k] = cl[k], cl[1]
                        self.watches[self._widx(cl[1])].append(ci)
                        break
                else:
                    wl[j] = ci
                    j += 1
                    if self._value(first) == -1:
                        while i < nwl:
                            wl[j] = wl[i]
                            j += 1
                            i += 1
                        del wl[j:]
                        self.qhead = len(self.trail)
                        return ci
                    self._enqueue(first, ci)
            del wl[j:]
        return -1

    def _bump_var(self, v: int) -> None:
        self.activity[v] += self.var_inc
        self._heapq.heappush(self.order, (-self.activity[v], v))

    def _rescale_var(self) -> None:
        for v in range(len(self.activity)):
            self.activity[v] *= 1e-100
        self.var_inc *= 1e-100
        self.order = [(-self.activity[v], v) for v in range(1, len(self.activity))]
        self._heapq.heapify(self.order)

    def _rescale_cla(self) -> None:
        for ci in self.cla_activity:
            self.cla_activity[ci] *= 1e-20
        self.cla_inc *= 1e-20

    def _analyze(self, confl: int) -> tuple[list[int], int]:
        learnt = [0]
        seen = self.seen
        to_clear: list[int] = []
        counter = 0
        p = 0
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        while True:
            cl = self.clauses[confl]
            if confl in self.cla_activity:
                self.cla_activity[confl] += self.cla_inc
            for q in cl[1:] if p else cl:
                v = q if q > 0 else -q
                if not seen[v] and self.level[v] > 0:
                    seen[v] = 1
                    to_clear.append(v)
                    self._bump_var(v)
                    if self.level[v] == cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while True:
                pl = self.trail[idx]
                pv = pl if pl > 0 else -pl
                idx -= 1
                if seen[pv]:
                    break
            p = pl
            confl = self.reason[pv]
            counter -= 1
            if counter == 0:
                break
        learnt[0] = -p
        # self-subsumption minimization
        keep = [learnt[0]]
        for q in learnt[1:]:
            if not self._redundant(q):
                keep.append(q)
        for v in to_clear:
            seen[v] = 0
        learnt = keep
        if len(learnt) == 1:
            bt = 0
        else:
            # move the highest-level non-asserting literal to position 1
            mi = 1
            for k in range(2, len(learnt)):
                if self.level[abs(learnt[k])] > self.level[abs(learnt[mi])]:
                    mi = k
            learnt[1], learnt[mi] = learnt[mi], learnt[1]
            bt = self.level[abs(learnt[1])]
        return learnt, bt

    def _redundant(self, q: int) -> bool:
        r = self.reason[q if q > 0 else -q]
        if r < 0:
            return False
        for x in self.clauses[r]:
            if x == -q:
                continue
            v = x if x > 0 else -x
            if not self.seen[v] and self.level[v] > 0:
                return False
        return True

    def _backtrack(self, level: int) -> None:
        if len(self.trail_lim) <= level:
            return
        bound = self.trail_lim[level]
        for lit in reversed(self.trail[bound:]):
            v = lit if lit > 0 else -lit
            self.assign[v] = 0
            self.reason[v] = -1
            self._heapq.heappush(self.order, (-self.activity[v], v))
        del self.trail[bound:]
        del self.trail_lim[level:]
        self.qhead = len(self.trail)

    def _decide(self) -> int:
        while self.order:
            act, v = self._heapq.heappop(self.order)
            if self.assign[v] == 0 and -act == self.activity[v]:
                return v if self.phase[v] else -v
            if self.assign[v] == 0 and -act != self.activity[v]:
                continue  # stale entry; a fresher one exists
        for v in range(1, len(self.assign)):
            if self.assign[v] == 0:
                return v if self.phase[v] else -v
        return 0

    def _reduce_db(self) -> None:
        learned = [ci for ci in range(self.n_orig, len(self.clauses)) if self.clauses[ci]]
        locked = {self.reason[abs(l)] for l in self.trail}
        learned.sort(key=lambda ci: (self.cla_activity.get(ci, 0.0), ci))
        drop = set()
        for ci in learned[: len(learned) // 2]:
            if ci not in locked and len(self.clauses[ci]) > 2:
                drop.add(ci)
        if not drop:
            return
        new_clauses: list[list[int]] = []
        remap: dict[int, int] = {}
        for ci, cl in enumerate(self.clauses):
            if ci in drop or not cl:
                continue
            remap[ci] = len(new_clauses)
            new_clauses.append(cl)
        self.clauses = new_clauses
        self.cla_activity = {remap[ci]: a for ci, a in self.cla_activity.items() if ci in remap}
        for v in range(1, len(self.reason)):
            if self.reason[v] >= 0:
                self.reason[v] = remap[self.reason[v]]
        self.watches = [[] for _ in range(len(self.watches))]
        for ci, cl in enumerate(self.clauses):
            self.watches[self._widx(cl[0])].append(ci)
            self.watches[self._widx(cl[1])].append(ci)


def _luby(x: int) -> int:
    """Luby restart sequence 1,1,2,1,1,2,4,... (1-indexed)."""
    x -= 1
    size, seq = 1, 0
    while size < x + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != x:
        size = (size - 1) >> 1
        seq -= 1
        x = x % size
    return 1 << seq


def default_external_command() -> list[str]:
    """DIMACS subprocess command used when none is configured.

    No system SAT binary is assumed; this module run as a script speaks the
    standard competition output format, so it doubles as the default
    external process.  Point the configuration at minisat/kissat/etc. to
    use a different solver.
    """
    return [sys.executable, "-m", "capsec.sat"]


class DimacsSolver:
    """Backend that shells out to an external DIMACS CNF solver."""

    def __init__(self, command: list[str] | None = None, timeout: float | None = 300.0):
        self.command = list(command) if command else default_external_command()
        self.timeout = timeout

    def solve(self, cnf: CnfFormula) -> SatResult:
        with tempfile.NamedTemporaryFile("w", suffix=".cnf", delete=False) as f:
            f.write(to_dimacs(cnf))
            path = f.name
        try:
            proc = subprocess.run(
                self.command + [path],
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired:
            return SatResult("unknown", reason="external solver timeout")
        except OSError as e:
            raise SolverError(f"cannot run external solver {self.command}: {e}") from e
        return _parse_solver_output(proc.stdout, cnf.num_vars)


def _parse_solver_output(text: str, num_vars: int) -> SatResult:
    status = None
    lits: list[int] = []
    lines = text.splitlines()
    for line in lines:
        line = line.strip()
        if line.startswith("s "):
            tag = line[2:].strip().upper()
            if tag == "SATISFIABLE":
                status = "sat"
            elif tag == "UNSATISFIABLE":
                status = "unsat"
            elif tag == "UNKNOWN":
                status = "unknown"
        elif line.startswith("v "):
            lits.extend(int(t) for t in line[2:].split())
        elif line in ("SAT", "UNSAT", "INDETERMINATE"):
            status = {"SAT": "sat", "UNSAT": "unsat", "INDETERMINATE": "unknown"}[line]
    if status is None:
        raise SolverError(f"malformed external solver output: {text[:200]!r}")
    if status != "sat":
        return SatResult(status)
    if not lits:
        # minisat file-style output: model on the line after "SAT"
        for i, line in enumerate(lines):
            if line.strip() == "SAT" and i + 1 < len(lines):
                lits = [int(t) for t in lines[i + 1].split()]
    model = [False] * (num_vars + 1)
    got = False
    for l in lits:
        if l == 0:
            continue
        v = abs(l)
        if v <= num_vars:
            model[v] = l > 0
            got = True
    if not got:
        raise SolverError("external solver reported SAT without a model")
    return SatResult("sat", model=model)


def solve(cnf: CnfFormula, backend: str = "embedded", command: list[str] | None = None,
          timeout: float | None = 300.0, clause_cap: int | None = 4_000_000) -> SatResult:
    """Decide a CNF with the chosen backend ('embedded' or 'external')."""
    if backend == "embedded":
        return EmbeddedSolver(timeout=timeout, clause_cap=clause_cap).solve(cnf)
    if backend == "external":
        return DimacsSolver(command, timeout=timeout).solve(cnf)
    raise ValueError(f"unknown solver backend {backend!r}")


def _main(argv: list[str]) -> int:
    if len(argv) != 1:
        print("usage: python -m capsec.sat FILE.cnf", file=sys.stderr)
        return 2
    with open(argv[0]) as f:
        cnf = from_dimacs(f.read())
    res = EmbeddedSolver(timeout=None).solve(cnf)
    if res.status == "sat":
        print("s SATISFIABLE")
        lits = [v if res.model[v] else -v for v in range(1, cnf.num_vars + 1)]
        for i in range(0, len(lits), 20):
            print("v " + " ".join(str(l) for l in lits[i : i + 20]))
        print("v 0")
        return 10
    if res.status == "unsat":
        print("s UNSATISFIABLE")
        return 20
    print("s UNKNOWN")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(_main(sys.argv[1:]))
