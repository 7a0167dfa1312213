"""MDP model, secret-state requirement, and the generic NFA.

The model file format is YAML with the top-level keys ``states``,
``actions``, ``pi0``, ``trans``, ``secret`` and ``lambda``.  ``trans`` maps
each action name to an N x N matrix written as rows; entry (i, j) of the
stored matrix is the probability of moving *to* state i *from* state j
under that action, so every column must sum to one.  ``pi0`` is the initial
distribution over states and ``lambda`` is the opacity threshold on the
total probability mass the observer may assign to the secret states.

Parsing is strict about structure (shapes, names) but performs no numeric
checks; those live in :func:`validate_mdp` so that a malformed-but-parseable
document can still be loaded and reported on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
import yaml

__all__ = [
    "Mdp",
    "Nfa",
    "Issue",
    "ValidationReport",
    "ModelFormatError",
    "parse_model",
    "serialize_model",
    "load_model",
    "validate_mdp",
    "mdp_to_nfa",
    "canonical_reorder",
]

_MODEL_KEYS = ("states", "actions", "pi0", "trans", "secret", "lambda")


class ModelFormatError(ValueError):
    """Raised when a model document is structurally invalid."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Mdp:
    """A finite MDP with a secret-state set and an opacity threshold.

    ``trans[a]`` is the column-stochastic matrix whose (i, j) entry is the
    probability of reaching state i from state j under action ``a``; the
    observer belief therefore evolves as ``b' = trans[a] @ b``.
    """

    states: tuple[str, ...]
    pi0: np.ndarray
    actions: tuple[str, ...]
    trans: dict[str, np.ndarray]
    secret: frozenset[int]
    threshold: float

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "pi0", _freeze(self.pi0))
        object.__setattr__(self, "trans", {a: _freeze(h) for a, h in self.trans.items()})
        object.__setattr__(self, "secret", frozenset(self.secret))
        object.__setattr__(self, "threshold", float(self.threshold))
        n = len(self.states)
        if self.pi0.shape != (n,):
            raise ValueError(f"pi0 must have {n} entries, got shape {self.pi0.shape}")
        if set(self.trans) != set(self.actions):
            raise ValueError("trans must have exactly one matrix per action")
        for a in self.actions:
            if self.trans[a].shape != (n, n):
                raise ValueError(f"matrix for action {a!r} must be {n}x{n}")
        if any(i < 0 or i >= n for i in self.secret):
            raise ValueError("secret state index out of range")

    @property
    def n(self) -> int:
        return len(self.states)

    @cached_property
    def secret_indices(self) -> np.ndarray:
        return np.array(sorted(self.secret), dtype=int)

    def matrix(self, action: str) -> np.ndarray:
        try:
            return self.trans[action]
        except KeyError:
            raise ValueError(f"unknown action {action!r}") from None

    def action_index(self, action: str) -> int:
        try:
            return self.actions.index(action)
        except ValueError:
            raise ValueError(f"unknown action {action!r}") from None

    def secret_mass(self, belief: np.ndarray) -> float:
        """Total probability the belief assigns to secret states."""
        return float(np.asarray(belief, dtype=float)[self.secret_indices].sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mdp):
            return NotImplemented
        return (
            self.states == other.states
            and self.actions == other.actions
            and np.array_equal(self.pi0, other.pi0)
            and all(np.array_equal(self.trans[a], other.trans[a]) for a in self.actions)
            and self.secret == other.secret
            and self.threshold == other.threshold
        )


def _state_key(q):
    # total order over the mixed state universes we use (cell ids, names,
    # product tuples, the "bad" sink)
    if isinstance(q, tuple):
        return (2, tuple(_state_key(x) for x in q))
    if isinstance(q, str):
        return (1, q)
    return (0, q)


@dataclass(frozen=True)
class Nfa:
    """Nondeterministic finite automaton over an ordered action alphabet."""

    states: frozenset
    alphabet: tuple[str, ...]
    delta: dict
    initial: frozenset

    def __post_init__(self):
        object.__setattr__(self, "states", frozenset(self.states))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        clean = {}
        for (q, a), targets in self.delta.items():
            targets = frozenset(targets)
            if not targets:
                continue
            if q not in self.states or not targets <= self.states:
                raise ValueError(f"transition ({q!r}, {a!r}) references unknown states")
            if a not in self.alphabet:
                raise ValueError(f"transition symbol {a!r} not in alphabet")
            clean[(q, a)] = targets
        object.__setattr__(self, "delta", clean)
        object.__setattr__(self, "initial", frozenset(self.initial))
        if not self.initial <= self.states:
            raise ValueError("initial states must be a subset of the state set")

    def successors(self, q, a: str) -> frozenset:
        return self.delta.get((q, a), frozenset())

    def enabled(self, q) -> tuple[str, ...]:
        return tuple(a for a in self.alphabet if (q, a) in self.delta)

    def accepts(self, word: Iterable[str]) -> bool:
        """Whether the word can be generated from some initial state."""
        current = set(self.initial)
        for a in word:
            current = set().union(*(self.successors(q, a) for q in current)) if current else set()
            if not current:
                return False
        return True

    def reachable(self) -> frozenset:
        seen = set(self.initial)
        frontier = list(self.initial)
        while frontier:
            q = frontier.pop()
            for a in self.alphabet:
                for q2 in self.successors(q, a):
                    if q2 not in seen:
                        seen.add(q2)
                        frontier.append(q2)
        return frozenset(seen)

    def sorted_states(self) -> list:
        return sorted(self.states, key=_state_key)

    def sorted_edges(self) -> list[tuple]:
        """All (source, action, target) triples in a deterministic order."""
        out = []
        for q in self.sorted_states():
            for i, a in enumerate(self.alphabet):
                for q2 in sorted(self.successors(q, a), key=_state_key):
                    out.append((q, a, q2))
        return out

    def transition_count(self) -> int:
        return sum(len(t) for t in self.delta.values())


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" or "warning"
    message: str
    location: str

    def __str__(self):
        return f"{self.severity}: {self.message} [{self.location}]"


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple[Issue, ...]

    def __str__(self):
        if not self.issues:
            return "ok"
        head = "ok" if self.ok else "invalid"
        return "\n".join([head] + [f"  {i}" for i in self.issues])


def _require(cond: bool, message: str):
    if not cond:
        raise ModelFormatError(message)


def _as_number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ModelFormatError(f"{where} must be a number, got {v!r}")
    return float(v)


def parse_model(text: str) -> Mdp:
    """Parse a model document. Structural errors raise :class:`ModelFormatError`.

    Numeric soundness (stochastic columns, pi0 summing to one, the strict
    secret subset) is deliberately not checked here; see :func:`validate_mdp`.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise ModelFormatError(
                f"invalid model syntax: {getattr(exc, 'problem', exc)}",
                line=mark.line + 1,
                column=mark.column + 1,
            ) from exc
        raise ModelFormatError(f"invalid model syntax: {exc}") from exc

    _require(isinstance(doc, dict), "model document must be a mapping")
    for key in _MODEL_KEYS:
        _require(key in doc, f"missing key {key!r}")
    for key in doc:
        _require(key in _MODEL_KEYS, f"unknown key {key!r}")

    states = doc["states"]
    _require(
        isinstance(states, list) and states and all(isinstance(s, str) for s in states),
        "'states' must be a non-empty list of names",
    )
    _require(len(set(states)) == len(states), "duplicate state names")
    n = len(states)

    actions = doc["actions"]
    _require(
        isinstance(actions, list) and actions and all(isinstance(a, str) for a in actions),
        "'actions' must be a non-empty list of names",
    )
    _require(len(set(actions)) == len(actions), "duplicate action names")

    pi0 = doc["pi0"]
    _require(isinstance(pi0, list), "'pi0' must be a list of numbers")
    _require(len(pi0) == n, f"'pi0' must have {n} entries, got {len(pi0)}")
    pi0 = [_as_number(v, "pi0 entry") for v in pi0]

    trans_doc = doc["trans"]
    _require(isinstance(trans_doc, dict), "'trans' must map actions to matrices")
    for a in actions:
        _require(a in trans_doc, f"'trans' is missing a matrix for action {a!r}")
    for a in trans_doc:
        _require(a in actions, f"'trans' has a matrix for unknown action {a!r}")
    trans = {}
    for a in actions:
        rows = trans_doc[a]
        _require(
            isinstance(rows, list) and len(rows) == n,
            f"matrix for action {a!r} must have {n} rows",
        )
        mat = []
        for i, row in enumerate(rows):
            _require(
                isinstance(row, list) and len(row) == n,
                f"row {i + 1} of matrix for action {a!r} must have {n} entries",
            )
            mat.append([_as_number(v, f"trans[{a}] entry") for v in row])
        trans[a] = np.array(mat, dtype=float)

    secret_doc = doc["secret"]
    _require(isinstance(secret_doc, list), "'secret' must be a list of state names")
    index = {s: i for i, s in enumerate(states)}
    secret = set()
    for name in secret_doc:
        _require(name in index, f"unknown state name in secret set: {name!r}")
        secret.add(index[name])

    threshold = _as_number(doc["lambda"], "'lambda'")

    return Mdp(
        states=tuple(states),
        pi0=np.array(pi0, dtype=float),
        actions=tuple(actions),
        trans=trans,
        secret=frozenset(secret),
        threshold=threshold,
    )


def serialize_model(m: Mdp) -> str:
    """Render a model back to the document format. Inverse of :func:`parse_model`."""
    doc = {
        "states": list(m.states),
        "actions": list(m.actions),
        "pi0": [float(v) for v in m.pi0],
        "trans": {a: [[float(v) for v in row] for row in m.trans[a]] for a in m.actions},
        "secret": [m.states[i] for i in sorted(m.secret)],
        "lambda": float(m.threshold),
    }
    return yaml.safe_dump(doc, sort_keys=False)


def load_model(path) -> Mdp:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())


def validate_mdp(m: Mdp, tol: float = 1e-9) -> ValidationReport:
    """Check the numeric model axioms. Never raises; failures go in the report.

    The stochasticity tolerance is configurable; no renormalization is ever
    applied, a column off by more than ``tol`` is an error.
    """
    issues: list[Issue] = []

    def err(message, location):
        issues.append(Issue("error", message, location))

    def warn(message, location):
        issues.append(Issue("warning", message, location))

    # sums are taken over the nonnegative part so that negative entries
    # cannot cancel excess mass and mask a sum failure
    if np.any(m.pi0 < -tol) or np.any(m.pi0 > 1 + tol):
        err("entries must lie in [0, 1]", "pi0")
    pi0_mass = np.clip(m.pi0, 0.0, None).sum()
    if abs(pi0_mass - 1.0) > tol:
        err(f"entries sum to {pi0_mass!r}, expected 1", "pi0")

    for a in m.actions:
        h = m.trans[a]
        if np.any(h < -tol) or np.any(h > 1 + tol):
            err("entries must lie in [0, 1]", f"trans[{a}]")
        sums = np.clip(h, 0.0, None).sum(axis=0)
        for j in range(m.n):
            if abs(sums[j] - 1.0) > tol:
                err(
                    f"column {j + 1} sums to {sums[j]!r}, expected 1",
                    f"trans[{a}]",
                )

    if len(m.secret) == m.n:
        err("secret set must be a strict subset of the states", "secret")
    elif not m.secret:
        warn("secret set is empty; the opacity requirement holds trivially", "secret")

    if not 0.0 <= m.threshold <= 1.0:
        err(f"threshold {m.threshold!r} must lie in [0, 1]", "lambda")

    ok = not any(i.severity == "error" for i in issues)
    return ValidationReport(ok=ok, issues=tuple(issues))


def mdp_to_nfa(m: Mdp) -> Nfa:
    """Support automaton of the MDP: an edge wherever a transition has
    positive probability, initial wherever pi0 is positive."""
    delta = {}
    for a in m.actions:
        h = m.trans[a]
        for j, src in enumerate(m.states):
            targets = frozenset(m.states[i] for i in np.nonzero(h[:, j] > 0.0)[0])
            if targets:
                delta[(src, a)] = targets
    initial = frozenset(m.states[i] for i in np.nonzero(m.pi0 > 0.0)[0])
    return Nfa(states=frozenset(m.states), alphabet=m.actions, delta=delta, initial=initial)


def canonical_reorder(m: Mdp) -> tuple[Mdp, tuple[int, ...]]:
    """Permute states so the last one is non-secret.

    Downstream code eliminates the last belief coordinate; keeping that
    coordinate non-secret makes the secret mass a nonnegative linear form of
    the remaining coordinates, which the cell classifier relies on.  If the
    last state is already non-secret the permutation is the identity;
    otherwise the lowest-indexed non-secret state moves to the end and the
    rest keep their relative order.  Returns the reordered model and the
    permutation mapping new indices to old ones.
    """
    n = m.n
    if len(m.secret) >= n:
        raise ValueError("secret set must be a strict subset of the states")
    if (n - 1) not in m.secret:
        perm = tuple(range(n))
        return m, perm
    moved = min(i for i in range(n) if i not in m.secret)
    perm = tuple([i for i in range(n) if i != moved] + [moved])
    idx = np.array(perm, dtype=int)
    old_to_new = {old: new for new, old in enumerate(perm)}
    reordered = Mdp(
        states=tuple(m.states[i] for i in perm),
        pi0=m.pi0[idx],
        actions=m.actions,
        trans={a: m.trans[a][np.ix_(idx, idx)] for a in m.actions},
        secret=frozenset(old_to_new[i] for i in m.secret),
        threshold=m.threshold,
    )
    return reordered, perm
