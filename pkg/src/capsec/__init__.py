"""capsec: formal security verification kit for a CHERI-style capability core.

The package is organized as a small stack:

* `ir` / `system` - word-level expression DAG and transition systems,
  with a concrete simulator and a window unroller for interval checks.
* `caps` / `isa` / `iss` / `core` - capability semantics, the instruction
  set, an architectural reference simulator, and the pipelined reference
  core emitted as a transition system (with selectable seeded bugs).
* `props` - the protection macro and the four security properties
  (integrity, confidentiality, weak monotonicity, two-instance leakage).
* `cnf` / `sat` / `engine` - bit-blasting, CDCL solving, interval property
  checking with replay-validated counterexamples, induction, and an
  explicit-state non-interference oracle (`oracle`).
* `flow` - the iterative verification flow with counterexample
  classification and protected-set refinement.
* `cli` / `config` - command-line front end and run configuration.
"""

__version__ = "0.1.0"
