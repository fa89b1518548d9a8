"""Adversary program descriptions.

Two adversary flavors run in this lab:

* ``AdversaryProgram`` is a quantum step list (local unitaries, oracle
  queries, measurements, answer submission) executed against one of the four
  oracle realizations.  Steps for round i are built only once the round-i
  challenge exists, which is what makes the multi-instance sequencing rule
  enforceable.
* ``ClassicalAdversary`` is plain callbacks over classical oracle access,
  used by the exhaustive enumerators and the classical attacks (Hellman,
  advice-storing attacks).

Both are immutable descriptions; execution state lives in the arena.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np


# ---------------------------------------------------------------------------
# quantum step language
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Uniform:
    """QFT on one register (maps |0> to the uniform superposition); the
    ``inverse`` flag applies the adjoint."""
    reg: str
    inverse: bool = False


@dataclass(frozen=True)
class ClassicalMap:
    """|v, u> -> |v, u + sign*f(v) mod m> on out_reg."""
    fn: Callable
    in_regs: tuple[str, ...]
    out_reg: str
    sign: int = 1


@dataclass(frozen=True)
class PhaseMap:
    """Diagonal unitary multiplying by fn(values) of modulus 1."""
    fn: Callable
    regs: tuple[str, ...]


@dataclass(frozen=True)
class Gate:
    """Dense unitary on a small register tuple."""
    matrix: Any
    regs: tuple[str, ...]


@dataclass(frozen=True)
class Query:
    """One oracle query |x, u> -> |x, u + sign*H(x)>; counts against budget."""
    in_reg: str
    out_reg: str
    sign: int = 1


@dataclass(frozen=True)
class MeasureReg:
    """Measure registers in the computational basis, store outcome under key."""
    regs: tuple[str, ...]
    key: str


@dataclass(frozen=True)
class Branch:
    """Classical control: expand to steps_fn(outcome) for a measured key."""
    key: str
    steps_fn: Callable[[tuple], Sequence]


@dataclass(frozen=True)
class Reset:
    """Measure a register and rotate the outcome back to |0> (classical reset)."""
    reg: str


Step = Uniform | ClassicalMap | PhaseMap | Gate | Query | MeasureReg | Branch | Reset


# ---------------------------------------------------------------------------
# advice
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdviceSpec:
    """Oracle-dependent advice handed to the online stage.

    ``kind`` is "classical" (an S-bit string, entering the program as a
    classical parameter) or "quantum" (an S-qubit state on ``registers``).
    ``prepare`` maps the full truth table (a lookup callable) to the advice:
    an int for classical advice, or a {label: amplitude} mapping over the
    advice registers for quantum advice.  ``uniform=True`` marks advice that
    has been replaced by the advice-removal transform: a fresh uniform string
    (classical) or a uniformly random basis state (quantum, the maximally
    mixed state realized as an ensemble).
    """

    kind: str
    bits: int
    registers: tuple = ()
    prepare: Callable | None = None
    uniform: bool = False

    def __post_init__(self):
        if self.kind not in ("classical", "quantum"):
            raise ValueError(f"unknown advice kind {self.kind!r}")
        if self.kind == "quantum" and not self.registers and self.bits > 0:
            raise ValueError("quantum advice needs registers")

    @property
    def dim(self) -> int:
        return 2 ** self.bits


@dataclass
class RoundContext:
    """What a program's round builder sees: the round index, the challenge
    for this round (None for free-running programs), classical advice, and a
    mutable cross-round memory dict."""

    round_index: int
    challenge: Any = None
    advice: Any = None
    memory: dict = field(default_factory=dict)
    params: Mapping = field(default_factory=dict)


@dataclass(frozen=True)
class AdversaryProgram:
    """A quantum adversary: per-round step list with a query budget.

    ``build_round(ctx)`` returns the round's steps ending in answer
    preparation on ``answer_regs``; the arena submits those registers.  For
    oracle-distribution experiments (no game), ``answer_regs`` double as the
    output registers of the final measurement.
    """

    name: str
    registers: tuple
    query_budget: int
    build_round: Callable[[RoundContext], Sequence[Step]]
    answer_regs: tuple[str, ...]
    rounds: int = 1
    advice: AdviceSpec | None = None
    post_round: Callable[[RoundContext], Sequence[Step]] | None = None
    metadata: Mapping = field(default_factory=dict)


class BudgetExceededError(RuntimeError):
    """An adversary issued more oracle queries than its declared budget."""


# ---------------------------------------------------------------------------
# classical adversaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RandomAnswer:
    """A distribution over answers; enumerators integrate it exactly and
    samplers draw from it."""

    dist: tuple[tuple[Any, float], ...]

    @classmethod
    def uniform(cls, answers: Sequence) -> "RandomAnswer":
        p = 1.0 / len(answers)
        return cls(tuple((a, p) for a in answers))

    def sample(self, rng: np.random.Generator):
        r = rng.random()
        acc = 0.0
        for a, p in self.dist:
            acc += p
            if r < acc:
                return a
        return self.dist[-1][0]


@dataclass(frozen=True)
class UniformAdvice:
    """Marker for advice replaced by a uniform S-bit guess."""
    count: int


@dataclass(frozen=True)
class ClassicalAdversary:
    """Classical online strategy with optional classical advice.

    ``prepare(oracle)`` reads the whole truth table (unbounded preprocessing)
    and returns the advice value.  ``act(ctx)`` plays one round given a
    counted ``query`` callable on the context and returns an answer or a
    RandomAnswer.  ``rng`` on the context is only present in sampling runs.
    """

    name: str
    query_budget: int
    advice_bits: int = 0
    prepare: Callable | None = None
    act: Callable | None = None
    metadata: Mapping = field(default_factory=dict)


@dataclass
class ClassicalRoundContext:
    round_index: int
    challenge: Any
    advice: Any
    query: Callable
    memory: dict
    rng: np.random.Generator | None = None


def invert_steps(steps: Sequence[Step]) -> list[Step]:
    """Inverse of a unitary step list (reversed order, each step daggered).

    Measurement, branching, and reset steps have no unitary inverse and are
    rejected; uncomputation wrappers are built from purely unitary rounds.
    """
    import numpy as np

    out: list[Step] = []
    for step in reversed(list(steps)):
        if isinstance(step, Uniform):
            out.append(Uniform(step.reg, inverse=not step.inverse))
        elif isinstance(step, ClassicalMap):
            out.append(ClassicalMap(step.fn, step.in_regs, step.out_reg, -step.sign))
        elif isinstance(step, PhaseMap):
            out.append(PhaseMap(lambda *v, _f=step.fn: np.conj(_f(*v)), step.regs))
        elif isinstance(step, Gate):
            out.append(Gate(np.asarray(step.matrix).conj().T, step.regs))
        elif isinstance(step, Query):
            out.append(Query(step.in_reg, step.out_reg, -step.sign))
        else:
            raise TypeError(f"step {step!r} has no unitary inverse")
    return out
