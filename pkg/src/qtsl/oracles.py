"""Random-oracle realizations: exact lazy-sampled, purified standard,
phase, and compressed-standard, plus the program executor that runs
adversary step lists against any of them.

The four modes agree on every output distribution (that is the point, and
the equivalence is enforced by tests rather than assumed):

* EXACT     - a concrete truth table H: [N] -> Z/M, queries are the
              classical-reversible unitary |x,u> -> |x, u+H(x)>.
* STANDARD  - the oracle register holds the uniform superposition over all
              M^N truth tables; a query adds H(x) per table branch.
* PHASE     - same purified register; a query imprints the phase
              w_M^{u*H(x)}.  Simulating standard-semantics programs on it
              conjugates each query by QFT on the output register.
* COMPRESSED - Zhandry-style: the oracle register is N cells over
              Z/M + {bot}; a query is StdDecomp o CStO' o StdDecomp, which
              lazily samples, writes, and re-compresses.

Compressed-mode cells use alphabet M+1 with bot encoded as the value M, and
the joint state stays sparse because at most one cell decompresses per query.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import qcore
from .programs import (AdversaryProgram, Branch, BudgetExceededError, ClassicalMap, Gate,
                       MeasureReg, PhaseMap, Query, Reset, RoundContext, Uniform)
from .qcore import (PureState, Register, RegisterLayout, apply_classical, apply_phase,
                    apply_register_unitary, check_dim_guard, measure, qft)

BOT_SENTINEL = None  # printable stand-in for the bot cell symbol


class OracleMode(str, Enum):
    EXACT = "exact"
    STANDARD = "standard"
    PHASE = "phase"
    COMPRESSED = "compressed"

    @classmethod
    def parse(cls, value) -> "OracleMode":
        if isinstance(value, OracleMode):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class TruthTable:
    """A concrete function [N] -> Z/M as a value array."""

    N: int
    M: int
    values: tuple[int, ...]

    def __post_init__(self):
        if self.N < 1 or self.M < 1:
            raise ValueError("need N, M >= 1")
        if len(self.values) != self.N or any(not 0 <= v < self.M for v in self.values):
            raise ValueError("truth table values out of range")

    def __call__(self, x: int) -> int:
        return self.values[x]

    @classmethod
    def random(cls, N: int, M: int, rng: np.random.Generator) -> "TruthTable":
        return cls(N, M, tuple(int(v) for v in rng.integers(0, M, size=N)))

    @classmethod
    def all_tables(cls, N: int, M: int):
        """All M^N tables in lexicographic order (guarded)."""
        total = M**N
        check_dim_guard(total, f"enumerating truth tables for N={N}, M={M}")
        for code in range(total):
            vals = []
            c = code
            for _ in range(N):
                vals.append(c % M)
                c //= M
            yield cls(N, M, tuple(reversed(vals)))

    def to_json(self) -> str:
        return json.dumps({"N": self.N, "M": self.M, "values": list(self.values)})

    @classmethod
    def from_json(cls, text: str) -> "TruthTable":
        obj = json.loads(text)
        return cls(obj["N"], obj["M"], tuple(obj["values"]))


@dataclass(frozen=True)
class Database:
    """A partial truth table: length-N cells over Z/M + {bot}."""

    N: int
    M: int
    cells: tuple

    @classmethod
    def empty(cls, N: int, M: int) -> "Database":
        return cls(N, M, (BOT_SENTINEL,) * N)

    def size(self) -> int:
        return sum(1 for c in self.cells if c is not BOT_SENTINEL)

    def insert(self, x: int, y: int) -> "Database":
        if self.cells[x] is not BOT_SENTINEL:
            raise ValueError(f"cell {x} already holds {self.cells[x]}")
        cells = list(self.cells)
        cells[x] = y
        return Database(self.N, self.M, tuple(cells))

    def pairs(self) -> list[tuple[int, int]]:
        return [(x, y) for x, y in enumerate(self.cells) if y is not BOT_SENTINEL]

    def __str__(self):
        return "{" + ", ".join(f"({x},{y})" for x, y in self.pairs()) + "}"


@dataclass
class OracleSession:
    """Single-owner handle on one oracle realization.

    Carries the mode, the domain sizes, the concrete table (exact mode only),
    the query counter, an optional query budget, and the bot-leak
    instrumentation counter (amplitude mass on which CStO' would have had to
    act on an uninitialized cell; provably zero on reachable states, measured
    instead of assumed).
    """

    mode: OracleMode
    N: int
    M: int
    table: TruthTable | None = None
    budget: int | None = None
    query_count: int = 0
    bot_leak: float = 0.0

    @classmethod
    def create(cls, mode, N: int, M: int, *, table: TruthTable | None = None,
               seed=None, budget: int | None = None) -> "OracleSession":
        mode = OracleMode.parse(mode)
        if mode == OracleMode.EXACT:
            if table is None:
                if seed is None:
                    raise ValueError("exact mode needs a table or a seed")
                table = TruthTable.random(N, M, np.random.default_rng(np.random.Philox(key=seed)))
            if (table.N, table.M) != (N, M):
                raise ValueError("table shape mismatch")
        else:
            table = None
        if mode in (OracleMode.STANDARD, OracleMode.PHASE):
            check_dim_guard(M**N, "purified truth-table register")
        return cls(mode=mode, N=N, M=M, table=table, budget=budget)

    def clone(self) -> "OracleSession":
        return replace(self)

    def oracle_registers(self) -> tuple[Register, ...]:
        if self.mode == OracleMode.EXACT:
            return ()
        if self.mode == OracleMode.COMPRESSED:
            return tuple(Register(f"d{x}", self.M + 1, "oracle") for x in range(self.N))
        return tuple(Register(f"h{x}", self.M, "oracle") for x in range(self.N))

    def oracle_initial_state(self) -> PureState | None:
        """The oracle component's start state on its own registers: uniform
        over all tables (standard/phase), the empty database (compressed)."""
        regs = self.oracle_registers()
        if not regs:
            return None
        layout = RegisterLayout(regs)
        if self.mode == OracleMode.COMPRESSED:
            return PureState.basis(layout, **{f"d{x}": self.M for x in range(self.N)})
        block = self.M**self.N
        codes = np.arange(block, dtype=np.int64)
        amps = np.full(block, block**-0.5, dtype=np.complex128)
        return PureState(layout, codes, amps, _trusted=True)

    def initial_joint(self, adversary_regs: Sequence) -> PureState:
        """|0...0> on the adversary registers tensored with the oracle start."""
        oracle = self.oracle_initial_state()
        layout = RegisterLayout(list(adversary_regs) + list(self.oracle_registers()))
        if oracle is None:
            return PureState.basis(layout)
        block = oracle.layout.dim
        adv_zero = PureState.basis(RegisterLayout(adversary_regs))
        codes = (adv_zero.codes[:, None] * block + oracle.codes[None, :]).ravel()
        amps = (adv_zero.amps[:, None] * oracle.amps[None, :]).ravel()
        return PureState(layout, codes, amps, _trusted=True)

    def count_query(self) -> None:
        if self.budget is not None and self.query_count >= self.budget:
            raise BudgetExceededError(
                f"oracle budget {self.budget} exhausted in {self.mode.value} session")
        self.query_count += 1


# ---------------------------------------------------------------------------
# per-mode query unitaries
# ---------------------------------------------------------------------------

def _oracle_coefs(layout: RegisterLayout, prefix: str, N: int) -> np.ndarray:
    return np.array([layout.coef_of(f"{prefix}{x}") for x in range(N)], dtype=np.int64)


def _purified_add(session: OracleSession, state: PureState, in_reg: str, out_reg: str,
                  sign: int) -> PureState:
    """StO branch arithmetic: u += sign * H(x) per truth-table branch."""
    layout = state.layout
    M = session.M
    xcol = layout.column(state.codes, in_reg)
    hcoefs = _oracle_coefs(layout, "h", session.N)
    hvals = (state.codes // hcoefs[xcol]) % M
    ucoef = layout.coef_of(out_reg)
    uold = layout.column(state.codes, out_reg)
    unew = (uold + sign * hvals) % M
    codes = state.codes + (unew - uold) * ucoef
    codes, amps = qcore._canonical(codes, state.amps.copy())
    return PureState(layout, codes, amps, _trusted=True)


def _purified_phase(session: OracleSession, state: PureState, in_reg: str, out_reg: str,
                    sign: int) -> PureState:
    """PhO: multiply each branch by w_M^{sign * u * H(x)}."""
    layout = state.layout
    M = session.M
    xcol = layout.column(state.codes, in_reg)
    hcoefs = _oracle_coefs(layout, "h", session.N)
    hvals = (state.codes // hcoefs[xcol]) % M
    u = layout.column(state.codes, out_reg)
    phase = np.exp(2j * np.pi * sign * ((u * hvals) % M) / M)
    return PureState(layout, state.codes, state.amps * phase, _trusted=True)


def std_decomp_matrix(M: int) -> np.ndarray:
    """The StdDecomp cell unitary on Z/M + {bot} (bot = index M).

    It swaps |bot> with the uniform superposition (frequency-0 Fourier
    vector) and fixes every nonzero-frequency Fourier vector, so it is a
    self-inverse change between "unsampled" and "freshly sampled" cells.
    """
    phi0 = np.full(M, M**-0.5, dtype=np.complex128)
    S = np.zeros((M + 1, M + 1), dtype=np.complex128)
    S[:M, :M] = np.eye(M) - np.outer(phi0, phi0.conj())
    S[:M, M] = phi0
    S[M, :M] = phi0.conj()
    return S


def std_decomp(state: PureState, x: int, M: int) -> PureState:
    """StdDecomp at a fixed domain point (acts on cell d{x})."""
    if f"d{x}" not in state.layout:
        raise qcore.UnknownRegisterError(f"no database cell d{x} in layout")
    return apply_register_unitary(state, f"d{x}", std_decomp_matrix(M))


def _controlled_std_decomp(session: OracleSession, state: PureState,
                           in_reg: str) -> PureState:
    """StdDecomp_x controlled on the query register value: each x-sector of
    the state gets the cell unitary on its own cell, in one rebuild pass."""
    S = std_decomp_matrix(session.M)
    layout = state.layout
    xcol = layout.column(state.codes, in_reg)
    pieces = []
    for v in np.unique(xcol):
        mask = xcol == v
        pieces.append(qcore._register_unitary_raw(
            layout, state.codes[mask], state.amps[mask], (f"d{int(v)}",), S))
    codes = np.concatenate([p[0] for p in pieces])
    amps = np.concatenate([p[1] for p in pieces])
    codes, amps = qcore._canonical(codes, amps)
    return PureState(layout, codes, amps, _trusted=True)


def _csto_prime(session: OracleSession, state: PureState, in_reg: str, out_reg: str,
                sign: int) -> PureState:
    """CStO': u += sign * D(x) on components whose cell is initialized.

    The composite never reaches this operator with an uninitialized cell; we
    extend it as the identity there anyway and meter the leaked mass.
    """
    layout = state.layout
    M = session.M
    xcol = layout.column(state.codes, in_reg)
    dcoefs = _oracle_coefs(layout, "d", session.N)
    cellvals = (state.codes // dcoefs[xcol]) % (M + 1)
    live = cellvals < M
    session.bot_leak += float(np.sum(np.abs(state.amps[~live]) ** 2))
    ucoef = layout.coef_of(out_reg)
    uold = layout.column(state.codes, out_reg)
    unew = np.where(live, (uold + sign * cellvals) % M, uold)
    codes = state.codes + (unew - uold) * ucoef
    codes, amps = qcore._canonical(codes, state.amps.copy())
    return PureState(layout, codes, amps, _trusted=True)


def exact_query(session: OracleSession, state: PureState, in_reg: str, out_reg: str,
                *, sign: int = 1) -> PureState:
    if session.mode != OracleMode.EXACT:
        raise ValueError("exact_query needs an exact-mode session")
    session.count_query()
    table = np.array(session.table.values, dtype=np.int64)
    return apply_classical(state, None, (in_reg,), out_reg, sign=sign, table=table)


def sto_query(session: OracleSession, state: PureState, in_reg: str = "x",
              out_reg: str = "u", *, sign: int = 1) -> PureState:
    if session.mode != OracleMode.STANDARD:
        raise ValueError("sto_query needs a standard-mode session")
    session.count_query()
    return _purified_add(session, state, in_reg, out_reg, sign)


def pho_query(session: OracleSession, state: PureState, in_reg: str = "x",
              out_reg: str = "u", *, sign: int = 1) -> PureState:
    if session.mode != OracleMode.PHASE:
        raise ValueError("pho_query needs a phase-mode session")
    session.count_query()
    return _purified_phase(session, state, in_reg, out_reg, sign)


def csto_query(session: OracleSession, state: PureState, in_reg: str = "x",
               out_reg: str = "u", *, sign: int = 1) -> PureState:
    if session.mode != OracleMode.COMPRESSED:
        raise ValueError("csto_query needs a compressed-mode session")
    session.count_query()
    state = _controlled_std_decomp(session, state, in_reg)
    state = _csto_prime(session, state, in_reg, out_reg, sign)
    return _controlled_std_decomp(session, state, in_reg)


def oracle_query(session: OracleSession, state: PureState, in_reg: str, out_reg: str,
                 *, sign: int = 1, mask: tuple[int, int] | None = None) -> PureState:
    """Mode-dispatching query with standard addition semantics.

    In phase mode the query is conjugated by QFT on the output register, so a
    program written against |x,u> -> |x,u+H(x)> runs unchanged (the textbook
    simulation of a standard oracle by a phase oracle).

    ``mask=(point, const)`` replaces the oracle at one domain point with a
    constant addition: components querying the masked point get u += const
    and everything else sees the real oracle.  This realizes challenge-
    excluding query oracles.
    """
    if mask is None:
        return _dispatch_query(session, state, in_reg, out_reg, sign)
    point, const = mask
    layout = state.layout
    sel = layout.column(state.codes, in_reg) == point
    masked = PureState(layout, state.codes[sel], state.amps[sel], _trusted=True)
    rest = PureState(layout, state.codes[~sel], state.amps[~sel], _trusted=True)
    if len(masked):
        ucoef = layout.coef_of(out_reg)
        uold = layout.column(masked.codes, out_reg)
        unew = (uold + sign * const) % session.M
        codes = masked.codes + (unew - uold) * ucoef
        codes, amps = qcore._canonical(codes, masked.amps.copy())
        masked = PureState(layout, codes, amps, _trusted=True)
    if len(rest):
        rest = _dispatch_query(session, rest, in_reg, out_reg, sign)
    else:
        session.count_query()
    codes = np.concatenate([masked.codes, rest.codes])
    amps = np.concatenate([masked.amps, rest.amps])
    codes, amps = qcore._canonical(codes, amps)
    return PureState(layout, codes, amps, _trusted=True)


def _dispatch_query(session, state, in_reg, out_reg, sign):
    if session.mode == OracleMode.EXACT:
        return exact_query(session, state, in_reg, out_reg, sign=sign)
    if session.mode == OracleMode.STANDARD:
        return sto_query(session, state, in_reg, out_reg, sign=sign)
    if session.mode == OracleMode.COMPRESSED:
        return csto_query(session, state, in_reg, out_reg, sign=sign)
    # phase mode, conjugated to standard semantics
    state = qft(state, out_reg)
    state = pho_query(session, state, in_reg, out_reg, sign=sign)
    return qft(state, out_reg, inverse=True)


def oracle_query_fixed(session: OracleSession, state: PureState, point: int,
                       out_reg: str, *, sign: int = 1) -> PureState:
    """Oracle query at a classically fixed domain point: u += sign * H(point).

    Needs no input register, which keeps challenger-side reads and
    challenge delivery out of the adversary's register budget (and out of
    the layout's code space).
    """
    session.count_query()
    layout = state.layout
    M = session.M
    if session.mode == OracleMode.EXACT:
        val = session.table(point)
        return apply_classical(state, lambda _v=val: _v, (), out_reg, sign=sign)
    if session.mode == OracleMode.COMPRESSED:
        S = std_decomp_matrix(M)
        state = apply_register_unitary(state, f"d{point}", S)
        cell = layout.column(state.codes, f"d{point}")
        live = cell < M
        session.bot_leak += float(np.sum(np.abs(state.amps[~live]) ** 2))
        uold = layout.column(state.codes, out_reg)
        unew = np.where(live, (uold + sign * cell) % M, uold)
        codes = state.codes + (unew - uold) * layout.coef_of(out_reg)
        codes, amps = qcore._canonical(codes, state.amps.copy())
        state = PureState(layout, codes, amps, _trusted=True)
        return apply_register_unitary(state, f"d{point}", S)
    # purified modes
    hcol = layout.column(state.codes, f"h{point}")
    if session.mode == OracleMode.STANDARD:
        uold = layout.column(state.codes, out_reg)
        unew = (uold + sign * hcol) % M
        codes = state.codes + (unew - uold) * layout.coef_of(out_reg)
        codes, amps = qcore._canonical(codes, state.amps.copy())
        return PureState(layout, codes, amps, _trusted=True)
    state = qft(state, out_reg)
    u = layout.column(state.codes, out_reg)
    hcol = layout.column(state.codes, f"h{point}")
    phase = np.exp(2j * np.pi * sign * ((u * hcol) % M) / M)
    state = PureState(layout, state.codes, state.amps * phase, _trusted=True)
    return qft(state, out_reg, inverse=True)


# ---------------------------------------------------------------------------
# compressed-state diagnostics
# ---------------------------------------------------------------------------

def database_size_mass(state: PureState, session: OracleSession) -> np.ndarray:
    """Amplitude mass per database size |D| (count of initialized cells)."""
    layout = state.layout
    sizes = np.zeros(state.codes.size, dtype=np.int64)
    for x in range(session.N):
        sizes += (layout.column(state.codes, f"d{x}") < session.M).astype(np.int64)
    mass = np.zeros(session.N + 1, dtype=float)
    np.add.at(mass, sizes, np.abs(state.amps) ** 2)
    return mass


def decode_database(label_values: dict, N: int, M: int) -> Database:
    cells = tuple(label_values[f"d{x}"] if label_values[f"d{x}"] < M else BOT_SENTINEL
                  for x in range(N))
    return Database(N, M, cells)


# ---------------------------------------------------------------------------
# program execution
# ---------------------------------------------------------------------------

@dataclass
class ProgramRun:
    """Mutable execution state for one program against one session."""

    layout: RegisterLayout
    state: PureState
    session: OracleSession
    rng: np.random.Generator | None = None
    outcomes: dict = field(default_factory=dict)
    round_queries: int = 0
    challenger_queries: int = 0
    mask: tuple[int, int] | None = None
    weight: float = 1.0

    def clone(self) -> "ProgramRun":
        dup = copy.copy(self)
        dup.outcomes = dict(self.outcomes)
        dup.session = self.session.clone()
        return dup

    # -- single-step application (unitary steps only mutate in place) --

    def apply(self, step) -> None:
        st = self.state
        if isinstance(step, Uniform):
            self.state = qft(st, step.reg, inverse=step.inverse)
        elif isinstance(step, ClassicalMap):
            self.state = apply_classical(st, step.fn, step.in_regs, step.out_reg,
                                         sign=step.sign)
        elif isinstance(step, PhaseMap):
            self.state = apply_phase(st, step.fn, step.regs)
        elif isinstance(step, Gate):
            self.state = apply_register_unitary(st, step.regs, np.asarray(step.matrix))
        elif isinstance(step, Query):
            self.count_adversary_query()
            self.state = oracle_query(self.session, st, step.in_reg, step.out_reg,
                                      sign=step.sign, mask=self.mask)
        else:
            raise TypeError(f"step {step!r} needs run_steps (measurement/branching)")

    def count_adversary_query(self, budget: int | None = None) -> None:
        self.round_queries += 1

    def classical_read(self, point: int, val_reg: str,
                       rng: np.random.Generator) -> int:
        """Challenger-side classical oracle read: query at a fixed point and
        measure the result (collapsing purified oracles exactly the way a
        classical sampler would)."""
        self.challenger_queries += 1
        st = oracle_query_fixed(self.session, self.state, point, val_reg)
        records = measure(st, regs=(val_reg,))
        probs = [r.probability for r in records]
        pick = rng.choice(len(records), p=np.array(probs) / sum(probs))
        rec = records[pick]
        val = rec.outcome[0]
        self.state = apply_classical(rec.post_state, lambda: val, (), val_reg, sign=-1)
        return val


def run_steps(run: ProgramRun, steps: Sequence, *, enumerate_branches: bool = False,
              budget: int | None = None) -> list[ProgramRun]:
    """Execute steps, returning terminal runs (one when sampling, one per
    measurement branch when enumerating; branch weights multiply)."""
    pending = list(steps)
    while pending:
        step = pending.pop(0)
        if isinstance(step, MeasureReg):
            records = measure(run.state, regs=step.regs)
            if enumerate_branches and len(records) > 1:
                leaves = []
                for rec in records:
                    child = run.clone()
                    child.state = rec.post_state
                    child.weight *= rec.probability
                    child.outcomes[step.key] = rec.outcome
                    leaves.extend(run_steps(child, list(pending),
                                            enumerate_branches=True, budget=budget))
                return leaves
            if len(records) == 1:
                rec = records[0]
            else:
                probs = np.array([r.probability for r in records])
                rec = records[run.rng.choice(len(records), p=probs / probs.sum())]
            run.state = rec.post_state
            run.outcomes[step.key] = rec.outcome
        elif isinstance(step, Reset):
            pending = ([MeasureReg((step.reg,), f"_reset_{step.reg}"),
                        Branch(f"_reset_{step.reg}",
                               lambda out, _r=step.reg: [
                                   ClassicalMap(lambda v=out[0]: v, (), _r, sign=-1)])]
                       + pending)
        elif isinstance(step, Branch):
            outcome = run.outcomes[step.key]
            pending = list(step.steps_fn(outcome)) + pending
        else:
            if isinstance(step, Query) and budget is not None and run.round_queries >= budget:
                raise BudgetExceededError(
                    f"query budget {budget} exceeded within a round")
            run.apply(step)
    return [run]


def start_run(program_regs: Sequence, session: OracleSession,
              rng: np.random.Generator | None = None) -> ProgramRun:
    state = session.initial_joint(program_regs)
    return ProgramRun(layout=state.layout, state=state, session=session, rng=rng)


def final_distribution(leaves: Sequence[ProgramRun], out_regs: Sequence[str]) -> dict:
    """Exact distribution over output registers, aggregated across leaves."""
    dist: dict[tuple, float] = {}
    for leaf in leaves:
        for rec in measure(leaf.state, regs=tuple(out_regs)):
            dist[rec.outcome] = dist.get(rec.outcome, 0.0) + leaf.weight * rec.probability
    return dist


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def oracle_output_distribution(program: AdversaryProgram, mode, N: int, M: int,
                               *, seed: int = 0, table: TruthTable | None = None,
                               mc_tables: int | None = None) -> dict:
    """Exact final-measurement distribution of a one-round program.

    Exact mode averages over all M^N truth tables when they fit the guard
    (or over ``mc_tables`` sampled tables otherwise); purified modes need a
    single run.  Programs with intermediate measurements are branch-
    enumerated, so the result is exact in every mode.
    """
    mode = OracleMode.parse(mode)
    if program.rounds != 1:
        raise ValueError("oracle_output_distribution runs one-round programs")
    ctx = RoundContext(round_index=0)
    steps = list(program.build_round(ctx))

    def one_run(session):
        run = start_run(program.registers, session)
        leaves = run_steps(run, steps, enumerate_branches=True,
                           budget=program.query_budget)
        return final_distribution(leaves, program.answer_regs)

    if mode != OracleMode.EXACT:
        return one_run(OracleSession.create(mode, N, M))

    if table is not None:
        return one_run(OracleSession.create(mode, N, M, table=table))
    if M**N <= qcore.dim_guard_limit():
        tables = list(TruthTable.all_tables(N, M))
        weight = 1.0 / len(tables)
    elif mc_tables:
        rng = np.random.default_rng(np.random.Philox(key=seed))
        tables = [TruthTable.random(N, M, rng) for _ in range(mc_tables)]
        weight = 1.0 / mc_tables
    else:
        raise qcore.DimensionGuardError(
            f"M^N = {M**N} exceeds the guard and no Monte-Carlo fallback was enabled")
    dist: dict[tuple, float] = {}
    for t in tables:
        for k, v in one_run(OracleSession.create(mode, N, M, table=t)).items():
            dist[k] = dist.get(k, 0.0) + weight * v
    return dist
