"""Controller synthesis against the pruned belief abstraction.

Two enforcement routes are provided.  Direct synthesis intersects the MDP's
support automaton with the pruned abstraction and keeps, per state, only the
actions enabled at every reachable product state; a stand-in value-iteration
then maximizes the probability of reaching a target set inside the
restricted model.  Edit-function synthesis instead rewrites the observable
action stream at runtime: an edit automaton derived from the pruned
abstraction maps every actually executed action to some output action
enabled at the current abstract belief state, and the observer belief is
advanced with the output action, never the real one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dynamics import belief_update, reduce_belief
from .model import Mdp, Nfa, _state_key, mdp_to_nfa
from .partition import Partition, locate_cell

__all__ = [
    "InitialStatePrunedError",
    "EditUndefinedError",
    "RestrictedMdp",
    "Policy",
    "EditAutomaton",
    "EditEngine",
    "EditCounterexample",
    "EditVerifyReport",
    "STRATEGIES",
    "product",
    "restrict_actions",
    "prune_blocking",
    "synthesize_reach_policy",
    "build_edit_automaton",
    "verify_edit_requirements",
    "edit_to_dot",
    "allowed_to_csv",
    "policy_to_csv",
]

STRATEGIES = ("lex-first", "match-if-safe", "uniform-random")


class InitialStatePrunedError(RuntimeError):
    """Blocking-state removal reached an initial state of the MDP."""


class EditUndefinedError(RuntimeError):
    """The edit engine has no defined continuation."""


def product(t1: Nfa, t2: Nfa) -> Nfa:
    """Synchronous product, restricted to pairs reachable from I1 x I2.

    Both automata must share the action alphabet; a pair moves on an action
    exactly when both components can.
    """
    if set(t1.alphabet) != set(t2.alphabet):
        raise ValueError("product requires identical alphabets")
    alphabet = t1.alphabet
    initial = frozenset(itertools.product(
        sorted(t1.initial, key=_state_key), sorted(t2.initial, key=_state_key)
    ))
    seen = set(initial)
    frontier = sorted(initial, key=_state_key)
    delta: dict = {}
    while frontier:
        q1, q2 = frontier.pop()
        for a in alphabet:
            s1 = t1.successors(q1, a)
            s2 = t2.successors(q2, a)
            if not s1 or not s2:
                continue
            targets = frozenset(itertools.product(s1, s2))
            delta[((q1, q2), a)] = targets
            for t in targets:
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
    return Nfa(states=frozenset(seen), alphabet=alphabet, delta=delta, initial=initial)


@dataclass(frozen=True)
class RestrictedMdp:
    """An MDP with per-state action sets narrowed for privacy.

    States absent from ``allowed`` have been pruned away entirely;
    ``vacuous`` lists states that never appeared in the product and so kept
    the full action set by default.
    """

    base: Mdp
    allowed: dict[str, tuple[str, ...]]
    vacuous: frozenset[str]


def restrict_actions(m: Mdp, pruned_t: Nfa, all_pairs: bool = False) -> RestrictedMdp:
    """Per-state safe action sets from the pruned abstraction.

    For every product state (s, q) of the support automaton with the pruned
    abstraction, an action counts as enabled when both components can move;
    the safe set of s is the intersection over all such pairs.  By default
    only pairs reachable from the initial product states constrain the
    result; ``all_pairs`` switches to the literal intersection over every
    pair.  States that appear in no pair keep the full action set and are
    flagged vacuous.
    """
    t_m = mdp_to_nfa(m)
    if all_pairs:
        pairs = [(s, q) for s in m.states for q in sorted(pruned_t.states, key=_state_key)]

        def enabled(s, q):
            return tuple(
                a for a in m.actions if t_m.successors(s, a) and pruned_t.successors(q, a)
            )

        enabled_sets = {(s, q): enabled(s, q) for s, q in pairs}
    else:
        prod = product(t_m, pruned_t)
        pairs = sorted(prod.states, key=_state_key)
        enabled_sets = {pair: prod.enabled(pair) for pair in pairs}

    allowed: dict[str, tuple[str, ...]] = {}
    vacuous = set()
    for s in m.states:
        sets = [set(enabled_sets[pair]) for pair in pairs if pair[0] == s]
        if not sets:
            allowed[s] = m.actions
            vacuous.add(s)
            continue
        inter = set.intersection(*sets)
        allowed[s] = tuple(a for a in m.actions if a in inter)
    return RestrictedMdp(base=m, allowed=allowed, vacuous=frozenset(vacuous))


def _support(m: Mdp, state: str, action: str) -> frozenset[str]:
    j = m.states.index(state)
    h = m.matrix(action)
    return frozenset(m.states[i] for i in np.nonzero(h[:, j] > 0.0)[0])


def prune_blocking(r: RestrictedMdp) -> RestrictedMdp:
    """Iteratively delete states without allowed actions.

    When a state goes, every predecessor action that could reach it with
    positive probability is disabled as well, because dropping probability
    mass silently would falsify policy evaluation.  Removing a state that
    carries initial probability raises :class:`InitialStatePrunedError`.
    """
    m = r.base
    allowed = {s: set(acts) for s, acts in r.allowed.items()}
    removed: set[str] = set()
    while True:
        blocking = [s for s in m.states if s in allowed and not allowed[s]]
        if not blocking:
            break
        for s in blocking:
            del allowed[s]
            removed.add(s)
            if m.pi0[m.states.index(s)] > 0.0:
                raise InitialStatePrunedError(
                    f"initial state {s} has no privacy-safe actions; "
                    "the current partition may be too coarse, retry with smaller grid widths"
                )
        for s in m.states:
            if s not in allowed:
                continue
            for a in sorted(allowed[s], key=m.actions.index):
                if _support(m, s, a) & removed:
                    allowed[s].discard(a)
    final = {
        s: tuple(a for a in m.actions if a in allowed[s]) for s in m.states if s in allowed
    }
    return RestrictedMdp(base=m, allowed=final, vacuous=r.vacuous - removed)


@dataclass(frozen=True)
class Policy:
    """Memoryless policy with its reachability value per state."""

    choice: dict[str, str]
    value: dict[str, float]


def synthesize_reach_policy(
    r: RestrictedMdp, target, eps: float = 1e-9, max_iter: int = 1_000_000
) -> Policy:
    """Value iteration for the maximal probability of reaching ``target``
    using only allowed actions.

    Iterates until the sup-norm change drops below ``eps``; argmax ties go
    to the action listed first in the model.
    """
    m = r.base
    target = set(target)
    unknown = target - set(m.states)
    if unknown:
        raise ValueError(f"unknown target states: {sorted(unknown)}")
    if eps <= 0:
        raise ValueError("eps must be positive")

    live = [s for s in m.states if s in r.allowed]
    empty = [s for s in live if not r.allowed[s]]
    if empty:
        raise ValueError(
            f"states {empty} have no allowed actions; apply prune_blocking first"
        )
    live_idx = [m.states.index(s) for s in live]
    fixed = [m.states.index(s) for s in live if s in target]

    v = np.zeros(m.n)
    v[fixed] = 1.0
    q_by_action = {}
    for _ in range(max_iter):
        for a in m.actions:
            q_by_action[a] = m.trans[a].T @ v
        new_v = np.zeros(m.n)
        for s, j in zip(live, live_idx):
            acts = r.allowed[s]
            if acts:
                new_v[j] = max(q_by_action[a][j] for a in acts)
        new_v[fixed] = 1.0
        if np.max(np.abs(new_v - v)) < eps:
            v = new_v
            break
        v = new_v

    for a in m.actions:
        q_by_action[a] = m.trans[a].T @ v
    choice: dict[str, str] = {}
    value: dict[str, float] = {}
    for s, j in zip(live, live_idx):
        best_a, best_q = None, -1.0
        for a in r.allowed[s]:
            q = q_by_action[a][j]
            if q > best_q:
                best_a, best_q = a, q
        choice[s] = best_a
        value[s] = float(v[j])
    return Policy(choice=choice, value=value)


@dataclass(frozen=True)
class EditAutomaton:
    """Transition table of the observation rewriter.

    An edge (q, actual, output, q') says: in abstract belief state q, when
    ``actual`` really happens, the rewriter may report ``output`` and move
    to q'.  Every edge reports exactly one action.
    """

    states: frozenset
    alphabet: tuple[str, ...]
    initial: int
    edges: frozenset

    @cached_property
    def _outputs(self) -> dict:
        table: dict = {}
        order = {a: i for i, a in enumerate(self.alphabet)}
        for q, actual, output, _ in self.edges:
            table.setdefault((q, actual), set()).add(output)
        return {
            key: tuple(sorted(vals, key=order.__getitem__)) for key, vals in table.items()
        }

    def outputs(self, q, actual: str) -> tuple[str, ...]:
        """Outputs available at q for the given real action, in action order."""
        return self._outputs.get((q, actual), ())


def build_edit_automaton(pruned_t: Nfa) -> EditAutomaton:
    """Edit automaton over the pruned abstraction.

    Whatever really happened, any action enabled at the current abstract
    state may be reported; the real action is unconstrained, so the edges
    pair every real action with every enabled output.
    """
    if not pruned_t.states:
        raise ValueError("pruned abstraction is empty")
    initial = min(pruned_t.initial, key=_state_key)
    edges = set()
    for q in pruned_t.sorted_states():
        for o in pruned_t.enabled(q):
            for q2 in pruned_t.successors(q, o):
                for actual in pruned_t.alphabet:
                    edges.add((q, actual, o, q2))
    return EditAutomaton(
        states=pruned_t.states,
        alphabet=pruned_t.alphabet,
        initial=initial,
        edges=frozenset(edges),
    )


class EditEngine:
    """Stateful runtime rewriter of one observed action stream.

    Tracks the exact observer belief induced by the *output* actions; the
    abstract state is always the cell of that belief, which is how the
    nondeterminism of the automaton is resolved.  Engines are single-stream
    and not thread-safe; run one engine per monitored stream.
    """

    def __init__(
        self,
        m: Mdp,
        p: Partition,
        automaton: EditAutomaton,
        strategy: str = "lex-first",
        seed: int = 0,
    ):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; pick one of {STRATEGIES}")
        self.mdp = m
        self.partition = p
        self.automaton = automaton
        self.strategy = strategy
        self.rng = np.random.default_rng(seed)
        self.observer_belief = np.array(m.pi0, dtype=float)
        self.current_cell = locate_cell(reduce_belief(self.observer_belief), p)
        if self.current_cell not in automaton.states:
            raise ValueError(
                f"initial belief cell {self.current_cell} is not a state of the edit automaton"
            )

    def step(self, actual: str) -> str:
        """Rewrite one real action and advance the observer belief."""
        outputs = self.automaton.outputs(self.current_cell, actual)
        if not outputs:
            raise EditUndefinedError(
                f"no output defined at cell {self.current_cell} for action {actual!r}"
            )
        if self.strategy == "lex-first":
            out = outputs[0]
        elif self.strategy == "match-if-safe":
            out = actual if actual in outputs else outputs[0]
        else:
            out = outputs[int(self.rng.integers(len(outputs)))]
        self.observer_belief = belief_update(self.observer_belief, out, self.mdp)
        cell = locate_cell(self.observer_belief[:-1], self.partition)
        if cell not in self.automaton.states:
            raise EditUndefinedError(
                f"observer belief moved to cell {cell}, which the edit automaton does not cover"
            )
        self.current_cell = cell
        return out


@dataclass(frozen=True)
class EditCounterexample:
    requirement: int  # 1 output defined, 2 output word valid, 3 opacity holds
    strategy: str
    sequence: tuple[str, ...]
    step: int
    detail: str


@dataclass(frozen=True)
class EditVerifyReport:
    ok: bool
    sequences_checked: int
    counterexample: EditCounterexample | None

    def __str__(self):
        if self.ok:
            return f"ok ({self.sequences_checked} sequences checked)"
        c = self.counterexample
        return (
            f"requirement {c.requirement} fails under strategy {c.strategy} "
            f"on {'/'.join(c.sequence)} at step {c.step}: {c.detail}"
        )


def verify_edit_requirements(
    ea: EditAutomaton,
    m: Mdp,
    p: Partition,
    depth: int,
    strategies: tuple[str, ...] = STRATEGIES,
    support: Nfa | None = None,
    seed: int = 0,
) -> EditVerifyReport:
    """Bounded-exhaustive check of the three edit-function requirements.

    Runs every real-action sequence up to ``depth`` through the engine under
    each strategy and checks that an output is always defined, that the
    output word stays within the support automaton's language, and that the
    observer's secret mass never exceeds the threshold.  The cost grows as
    ``|actions| ** depth``.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    support = support if support is not None else mdp_to_nfa(m)
    checked = 0

    mass0 = m.secret_mass(m.pi0)
    if mass0 > m.threshold:
        return EditVerifyReport(
            ok=False,
            sequences_checked=0,
            counterexample=EditCounterexample(
                3, strategies[0], (), 0, f"initial secret mass {mass0!r} exceeds the threshold"
            ),
        )

    for strategy in strategies:
        for seq_idx, seq in enumerate(itertools.product(m.actions, repeat=depth)):
            engine = EditEngine(m, p, ea, strategy=strategy, seed=(seed, seq_idx))
            current = set(support.initial)
            checked += 1
            for step, actual in enumerate(seq, start=1):
                try:
                    out = engine.step(actual)
                except EditUndefinedError as exc:
                    return EditVerifyReport(
                        ok=False,
                        sequences_checked=checked,
                        counterexample=EditCounterexample(1, strategy, seq, step, str(exc)),
                    )
                current = (
                    set().union(*(support.successors(q, out) for q in current))
                    if current
                    else set()
                )
                if not current:
                    return EditVerifyReport(
                        ok=False,
                        sequences_checked=checked,
                        counterexample=EditCounterexample(
                            2, strategy, seq, step,
                            f"output word leaves the support language on {out!r}",
                        ),
                    )
                mass = m.secret_mass(engine.observer_belief)
                if mass > m.threshold:
                    return EditVerifyReport(
                        ok=False,
                        sequences_checked=checked,
                        counterexample=EditCounterexample(
                            3, strategy, seq, step,
                            f"observer secret mass {mass!r} exceeds the threshold",
                        ),
                    )
    return EditVerifyReport(ok=True, sequences_checked=checked, counterexample=None)


_EDGE_STYLES = ("solid", "dashed", "dotted", "bold")


def edit_to_dot(ea: EditAutomaton, name: str = "Tf") -> str:
    """Graphviz rendering with "actual/output" edge labels; the style
    follows the output action."""
    order = {a: i for i, a in enumerate(ea.alphabet)}
    lines = [f"digraph {name} {{", "  rankdir=LR;", "  node [shape=circle];"]
    for q in sorted(ea.states, key=_state_key):
        lines.append(f'  "{q}" [shape=circle];')
    lines.append("  __init [shape=point];")
    lines.append(f'  __init -> "{ea.initial}";')
    edges = sorted(
        ea.edges, key=lambda e: (_state_key(e[0]), order[e[1]], order[e[2]], _state_key(e[3]))
    )
    for q, actual, output, q2 in edges:
        style = _EDGE_STYLES[order[output] % len(_EDGE_STYLES)]
        lines.append(
            f'  "{q}" -> "{q2}" [label="{actual}/{output}", style={style}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def allowed_to_csv(r: RestrictedMdp) -> str:
    lines = ["state,actions,vacuous"]
    for s in r.base.states:
        if s not in r.allowed:
            continue
        acts = ";".join(r.allowed[s])
        lines.append(f"{s},{acts},{str(s in r.vacuous).lower()}")
    return "\n".join(lines) + "\n"


def policy_to_csv(policy: Policy) -> str:
    lines = ["state,action,value"]
    for s, a in policy.choice.items():
        lines.append(f"{s},{a},{policy.value[s]!r}")
    return "\n".join(lines) + "\n"
