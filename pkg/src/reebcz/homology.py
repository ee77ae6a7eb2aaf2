"""Graded good-iterate tables and Morse-cancellation feasibility.

The positive equivariant symplectic homology of the round sphere is one
copy of Q in each degree ``n-1+2k`` (``k >= 1``).  A chain complex generated
by good iterates, graded by index and with an action-decreasing
differential, can only realise it if the surplus generators cancel in
pairs ``(source at d+1, target at d)`` with ``action(source) > action(target)``.
Over a field with distinct actions the homology dimensions realisable by
such complexes are exactly those left over by an acyclic matching, so
feasibility is a counting question plus one threshold matching per pair
of adjacent degrees.

Counts force the number of pairs between every two adjacent degrees
(bottom-up, starting below the lowest possible index).  For a fixed count
the best choice is always the highest-action generators as sources and
the lowest-action ones as targets, which makes a greedy sweep exact.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .arith import (
    DEFAULT_BITS,
    NumberExpr,
    Ordering,
    UndecidableComparison,
    as_expr,
    compare_certified,
    div,
    floor_certified,
    mul,
    parse,
    to_text,
)
from .index import IterateRecord, OrbitSystem, index_spectrum, mean_index


def target_betti(n: int, degree: int) -> int:
    return 1 if degree >= n + 1 and (degree - n - 1) % 2 == 0 else 0


@dataclass
class GradedGeneratorTable:
    n: int
    K: NumberExpr | None
    entries: dict[int, list[IterateRecord]] = field(default_factory=dict)
    window: tuple[int, int] | None = None  # inclusive; None when empty

    def degrees(self) -> list[int]:
        return sorted(self.entries)

    def at(self, degree: int) -> list[IterateRecord]:
        return self.entries.get(degree, [])

    def count(self, degree: int) -> int:
        return len(self.entries.get(degree, ()))

    def in_window(self, degree: int) -> bool:
        return self.window is not None and self.window[0] <= degree <= self.window[1]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "K": None if self.K is None else to_text(self.K),
            "window": list(self.window) if self.window else None,
            "entries": {str(d): [_record_json(r) for r in self.entries[d]] for d in self.degrees()},
        }

    @classmethod
    def from_json(cls, data: dict) -> "GradedGeneratorTable":
        entries = {int(d): [_record_from_json(r) for r in rows] for d, rows in data["entries"].items()}
        K = None if data.get("K") is None else parse(data["K"])
        window = tuple(data["window"]) if data.get("window") else None
        return cls(int(data["n"]), K, entries, window)


def _record_json(r: IterateRecord) -> dict:
    return {"label": r.label, "iterate": r.iterate, "index": r.index, "good": r.good, "action": to_text(r.action)}


def _record_from_json(d: dict) -> IterateRecord:
    return IterateRecord(d["label"], int(d["iterate"]), int(d["index"]), bool(d.get("good", True)), parse(d["action"]))


def complete_window(system: OrbitSystem, K, budget_bits: int = DEFAULT_BITS) -> tuple[int, int] | None:
    """Degrees ``d`` for which every iterate of index ``<= d + 1`` has action ``<= K``.

    From ``mu(g^l) > l*mean - (n-1)``: index ``<= d+1`` forces
    ``l*action < (d+n) * action/mean``, which is ``<= K`` when
    ``d <= K * mean/action - n``.
    """
    if len(system) == 0:
        return None
    K = as_expr(K)
    best = None
    for o in system:
        mh = mean_index(o)
        if compare_certified(mh, 0, budget_bits) is not Ordering.GREATER:
            return None
        ratio = div(mul(K, mh), o.action)
        top = floor_certified(ratio, budget_bits, {"orbit": o.label, "op": "window"})
        best = top if best is None else min(best, top)
    lo, hi = 1 - system.n, best - system.n
    return (lo, hi) if hi >= lo else None


def generator_table(system: OrbitSystem, K, budget_bits: int = DEFAULT_BITS) -> GradedGeneratorTable:
    K = as_expr(K)
    if compare_certified(K, 0, budget_bits) is not Ordering.GREATER:
        raise ValueError("action cap K must be positive")
    entries: dict[int, list[IterateRecord]] = {}
    if len(system):
        for rec in index_spectrum(system, K, budget_bits):
            if rec.good:
                entries.setdefault(rec.index, []).append(rec)
    return GradedGeneratorTable(system.n, K, entries, complete_window(system, K, budget_bits))


def synthetic_table(n: int, rows: Mapping[int, Sequence[tuple[str, object]]], window=None) -> GradedGeneratorTable:
    """Table from ``{degree: [(label, action), ...]}``; window defaults to
    everything from ``1 - n`` up to the top listed degree."""
    entries = {}
    for d, gens in rows.items():
        entries[int(d)] = [IterateRecord(label, 1, int(d), True, as_expr(a)) for label, a in gens]
    if window is None and entries:
        window = (1 - n, max(entries))
    return GradedGeneratorTable(n, None, entries, window)


# -- feasibility -------------------------------------------------------------


@dataclass(frozen=True)
class MatchingCertificate:
    n: int
    window: tuple[int, int] | None
    pairs: tuple[tuple[IterateRecord, IterateRecord], ...] = ()
    survivors: tuple[IterateRecord, ...] = ()
    boundary: tuple[IterateRecord, ...] = ()  # unpaired generators just above the window

    def to_json(self) -> dict:
        return {
            "feasible": True,
            "window": list(self.window) if self.window else None,
            "pairs": [{"source": _record_json(s), "target": _record_json(t)} for s, t in self.pairs],
            "survivors": [_record_json(r) for r in self.survivors],
            "boundary": [_record_json(r) for r in self.boundary],
        }


@dataclass(frozen=True)
class Infeasible:
    witness_degree: int
    reason: str

    def __bool__(self):
        return False

    def to_json(self) -> dict:
        return {"feasible": False, "witness_degree": self.witness_degree, "reason": self.reason}


def _action_key(budget_bits: int):
    def cmp(a: IterateRecord, b: IterateRecord) -> int:
        o = compare_certified(a.action, b.action, budget_bits)
        if o is Ordering.UNDECIDABLE:
            raise UndecidableComparison(f"actions of {a} and {b} not separated at {budget_bits} bits")
        return -1 if o is Ordering.LESS else 1 if o is Ordering.GREATER else 0

    return functools.cmp_to_key(cmp)


def _pair_counts(table: GradedGeneratorTable):
    """Forced pair counts ``x[d]`` (pairs from degree d down to d-1), or a
    witness degree where no count assignment balances."""
    lo, hi = table.window
    n = table.n
    x = {lo: 0}
    for d in range(lo, hi + 1):
        surplus = table.count(d) - target_betti(n, d)
        x[d + 1] = surplus - x[d]
        if x[d + 1] < 0:
            return None, d
    excess = x[hi + 1] - table.count(hi + 1)
    if excess > 0:
        # degree hi cannot push its surplus upward; the extra pairs would have
        # to come from below, and the first degree that runs dry is the witness
        y = x[hi] + excess
        for d in range(hi - 1, lo - 1, -1):
            y = table.count(d) - target_betti(n, d) - y
            if y < 0:
                return None, d
        return None, lo
    return x, None


def morse_feasibility(table: GradedGeneratorTable, budget_bits: int = DEFAULT_BITS):
    if table.window is None:
        return MatchingCertificate(table.n, None)
    x, witness = _pair_counts(table)
    if x is None:
        return Infeasible(witness, f"generator counts cannot balance the target homology at degree {witness}")
    lo, hi = table.window
    key = _action_key(budget_bits)
    pairs = []
    survivors = []
    boundary = []
    remaining = {d: sorted(table.at(d), key=key) for d in range(lo, hi + 2)}
    for d in range(lo + 1, hi + 2):
        k = x[d]
        if not k:
            continue
        sources = remaining[d][-k:]
        remaining[d] = remaining[d][:-k]
        targets = remaining[d - 1][:k]
        remaining[d - 1] = remaining[d - 1][k:]
        for s, t in zip(sources, targets):
            o = compare_certified(s.action, t.action, budget_bits)
            if o is Ordering.UNDECIDABLE:
                raise UndecidableComparison(f"actions of {s} and {t} not separated at {budget_bits} bits")
            if o is not Ordering.GREATER:
                return Infeasible(
                    d - 1,
                    f"surplus at degree {d - 1} cannot be cancelled by action-decreasing pairs from degree {d}",
                )
            pairs.append((s, t))
    for d in range(lo, hi + 1):
        survivors.extend(remaining[d])
    boundary.extend(remaining[hi + 1])
    return MatchingCertificate(table.n, table.window, tuple(pairs), tuple(survivors), tuple(boundary))


def homology_of_certificate(cert: MatchingCertificate) -> dict[int, int]:
    out: dict[int, int] = {}
    for r in cert.survivors:
        out[r.index] = out.get(r.index, 0) + 1
    return dict(sorted(out.items()))


def format_report(table: GradedGeneratorTable, result) -> str:
    lines = [f"n = {table.n}, window = {table.window}"]
    lines.append(f"{'degree':>7}  {'gens':>4}  {'betti':>5}  generators")
    for d in sorted(set(table.degrees()) | (set(range(table.window[0], table.window[1] + 2)) if table.window else set())):
        gens = ", ".join(f"{r}({float(r.action):.4g})" for r in table.at(d))
        if table.in_window(d):
            betti = str(target_betti(table.n, d))
        else:
            betti = "?"
        if table.count(d) or table.in_window(d) and betti == "1":
            lines.append(f"{d:>7}  {table.count(d):>4}  {betti:>5}  {gens}")
    if isinstance(result, Infeasible):
        lines.append(f"infeasible: {result.reason}")
    else:
        lines.append(f"feasible: {len(result.pairs)} cancelling pairs")
        for s, t in result.pairs:
            lines.append(f"  {s} -> {t}")
    return "\n".join(lines)
