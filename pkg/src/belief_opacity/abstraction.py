"""Finite NFA abstraction of the belief dynamics over safe cells.

Each safe cell becomes a state; one distinguished absorbing state ``bad``
stands for every cell that overlaps the forbidden belief region.  For a cell
q and action a, the two-corner reach box of q is intersected with every
usable cell, and each overlap yields a transition.  Pruning then removes
actions with an edge into ``bad`` and deletes states left without any
enabled action, repeating to a fixpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import decomposition, reach_box, reduce_belief
from .model import Mdp, Nfa, _state_key
from .partition import BAD, EXCLUDED, SAFE, Partition, locate_cell

__all__ = [
    "BAD_STATE",
    "BadInitialCellError",
    "InitialCellPrunedError",
    "PruneEvent",
    "AbstractionResult",
    "boxes_overlap",
    "build_abstraction",
    "prune",
    "abstract",
    "nfa_to_dot",
    "edges_to_csv",
    "format_prune_log",
]

BAD_STATE = "bad"

_FINER_PARTITION_HINT = (
    "the current partition may be too coarse; retry with smaller grid widths"
)


class BadInitialCellError(RuntimeError):
    """The initial belief sits in a bad cell; refine the partition first."""


class InitialCellPrunedError(RuntimeError):
    """Pruning deleted the initial state of the abstraction."""

    def __init__(self, message: str, events: tuple = ()):
        super().__init__(message)
        self.events = events


@dataclass(frozen=True)
class PruneEvent:
    kind: str  # "disable" or "delete"
    state: object
    action: str | None
    reason: str


@dataclass(frozen=True)
class AbstractionResult:
    nfa: Nfa
    initial_cell: int
    pruned: Nfa
    log: tuple[PruneEvent, ...]


def boxes_overlap(alo, ahi, blo, bhi, mode: str = "strict") -> bool:
    """Interval overlap test.  ``strict`` requires the interiors to meet,
    ``closed`` also counts shared boundary points."""
    lo = np.maximum(alo, blo)
    hi = np.minimum(ahi, bhi)
    if mode == "strict":
        return bool(np.all(lo < hi))
    if mode == "closed":
        return bool(np.all(lo <= hi))
    raise ValueError(f"unknown overlap mode {mode!r}")


def build_abstraction(
    m: Mdp, p: Partition, overlap_mode: str = "strict", clip: bool = False
) -> Nfa:
    """Abstraction automaton over the safe cells of ``p`` plus ``bad``.

    Requires a canonically ordered model.  Cells outside the belief domain
    never produce transitions even when a raw reach box overlaps them.  The
    initial state is the cell containing the reduced initial belief; if that
    cell is bad, :class:`BadInitialCellError` asks the caller to refine.
    """
    if overlap_mode not in ("strict", "closed"):
        raise ValueError(f"unknown overlap mode {overlap_mode!r}")
    x0 = reduce_belief(m.pi0)
    initial_cell = locate_cell(x0, p)
    if p.cell(initial_cell).status == BAD:
        raise BadInitialCellError(
            f"initial belief lies in bad cell {initial_cell}; refine the partition first"
        )

    safe = [c for c in p.cells if c.status == SAFE]
    usable = [c for c in p.cells if c.status != EXCLUDED]
    los = np.array([c.box.lo for c in usable])
    his = np.array([c.box.hi for c in usable])

    delta: dict = {}
    for a in m.actions:
        d = decomposition(m, a)
        for cell in safe:
            r = reach_box(d, cell.box, clip=clip)
            lo = np.maximum(r.lo, los)
            hi = np.minimum(r.hi, his)
            if overlap_mode == "strict":
                hit = np.all(lo < hi, axis=1)
            else:
                hit = np.all(lo <= hi, axis=1)
            targets = set()
            for idx in np.nonzero(hit)[0]:
                c = usable[idx]
                targets.add(BAD_STATE if c.status == BAD else c.id)
            if targets:
                delta[(cell.id, a)] = frozenset(targets)

    states = frozenset(c.id for c in safe) | {BAD_STATE}
    return Nfa(states=states, alphabet=m.actions, delta=delta, initial=frozenset({initial_cell}))


def prune(nfa: Nfa, initial: int, bad_state=BAD_STATE) -> tuple[Nfa, tuple[PruneEvent, ...]]:
    """Remove bad-leading actions and blocking states to a fixpoint.

    Any action with an edge into ``bad`` is disabled outright (the
    nondeterminism is adversarial).  A state left without enabled actions is
    deleted together with its incoming edges; a predecessor whose action
    thereby loses its last successor has that action disabled too.  States
    are processed in ascending order and actions in alphabet order, and
    every event is logged.  Deleting the initial state raises
    :class:`InitialCellPrunedError`.
    """
    if initial not in nfa.states:
        raise ValueError(f"initial state {initial!r} not in the automaton")
    live = sorted((q for q in nfa.states if q != bad_state), key=_state_key)
    alive = set(live)
    succ = {k: set(v) for k, v in nfa.delta.items() if k[0] != bad_state}
    events: list[PruneEvent] = []

    for q in live:
        for a in nfa.alphabet:
            if (q, a) in succ and bad_state in succ[(q, a)]:
                del succ[(q, a)]
                events.append(PruneEvent("disable", q, a, "reaches the bad region"))

    while True:
        blocking = [
            q for q in live if q in alive and not any((q, a) in succ for a in nfa.alphabet)
        ]
        if not blocking:
            break
        for q in blocking:
            alive.discard(q)
            events.append(PruneEvent("delete", q, None, "no enabled actions left"))
            if q == initial:
                raise InitialCellPrunedError(
                    f"initial abstraction state {initial} was pruned; "
                    + _FINER_PARTITION_HINT,
                    events=tuple(events),
                )
            for p_ in live:
                if p_ not in alive:
                    continue
                for a in nfa.alphabet:
                    key = (p_, a)
                    if key in succ and q in succ[key]:
                        succ[key].discard(q)
                        if not succ[key]:
                            del succ[key]
                            events.append(
                                PruneEvent("disable", p_, a, "all successors pruned")
                            )

    pruned = Nfa(
        states=frozenset(alive),
        alphabet=nfa.alphabet,
        delta={k: frozenset(v) for k, v in succ.items()},
        initial=frozenset({initial}),
    )
    return pruned, tuple(events)


def abstract(
    m: Mdp, p: Partition, overlap_mode: str = "strict", clip: bool = False
) -> AbstractionResult:
    """Build the abstraction and prune it in one step."""
    nfa = build_abstraction(m, p, overlap_mode=overlap_mode, clip=clip)
    initial_cell = next(iter(nfa.initial))
    pruned, log = prune(nfa, initial_cell)
    return AbstractionResult(nfa=nfa, initial_cell=initial_cell, pruned=pruned, log=log)


_EDGE_STYLES = ("solid", "dashed", "dotted", "bold")


def _node_name(q) -> str:
    return str(q).replace('"', '\\"')


def nfa_to_dot(nfa: Nfa, name: str = "T", bad_state=BAD_STATE) -> str:
    """Graphviz rendering: one edge style per action (solid for the first,
    dashed for the second), ``bad`` as a double circle, initial states
    marked by an arrow from a point node."""
    lines = [f"digraph {name} {{", "  rankdir=LR;", '  node [shape=circle];']
    for q in nfa.sorted_states():
        shape = "doublecircle" if q == bad_state else "circle"
        lines.append(f'  "{_node_name(q)}" [shape={shape}];')
    for i, q in enumerate(sorted(nfa.initial, key=_state_key)):
        lines.append(f"  __init{i} [shape=point];")
        lines.append(f'  __init{i} -> "{_node_name(q)}";')
    for q, a, q2 in nfa.sorted_edges():
        style = _EDGE_STYLES[nfa.alphabet.index(a) % len(_EDGE_STYLES)]
        lines.append(
            f'  "{_node_name(q)}" -> "{_node_name(q2)}" [label="{a}", style={style}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def edges_to_csv(nfa: Nfa) -> str:
    lines = ["src,action,dst"]
    for q, a, q2 in nfa.sorted_edges():
        lines.append(f"{q},{a},{q2}")
    return "\n".join(lines) + "\n"


def format_prune_log(events) -> str:
    lines = []
    for e in events:
        if e.kind == "disable":
            lines.append(f"disable action {e.action} at state {e.state}: {e.reason}")
        else:
            lines.append(f"delete state {e.state}: {e.reason}")
    return "\n".join(lines) + ("\n" if lines else "")
