"""Game execution: single games and the sequential multi-instance game.

The multi-instance challenger follows the definition exactly: per round it
samples fresh randomness, issues the challenge, opens the (possibly masked)
query oracle, accepts a submitted answer register, measures the projective
{P0, P1} induced by Ver, stores the bit, and hands the post-measurement
answer state back.  P1 is realized operationally as
compute-Ver / measure / uncompute, which matches the simulator used for the
one-way-function analysis and keeps everything sparse.

Two engines coexist:

* the classical engine runs ClassicalAdversary strategies against a concrete
  truth table (sampled or exhaustively enumerated, including advice and
  answer-distribution branches), and
* the quantum engine runs AdversaryProgram step lists against any oracle
  mode, with the verification measurement in superposition.

Probabilities are computed exactly by enumeration whenever the configured
guard allows, otherwise by seeded Monte-Carlo with Wilson intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import qcore
from .games import GameSpec
from .oracles import OracleMode, OracleSession, ProgramRun, TruthTable, run_steps, start_run
from .programs import (AdversaryProgram, BudgetExceededError, ClassicalAdversary,
                       ClassicalRoundContext, RandomAnswer, RoundContext, UniformAdvice)
from .qcore import (PureState, ZeroSupportError, apply_classical, collapse, measure,
                    reduced_density, tensor)

Z95 = 1.959963984540054
ENUM_GUARD = 10**6


class SequentialityError(RuntimeError):
    """An adversary tried to read a challenge before its round opened."""


@dataclass
class RoundRecord:
    index: int
    challenge: object
    queries_used: int
    answer: object
    bit: int
    tags: dict = field(default_factory=dict)


@dataclass
class Transcript:
    rounds: list[RoundRecord]
    win: int
    seed: object = None
    weight: float | None = None  # set for enumerated (exact) transcripts
    meta: dict = field(default_factory=dict)

    def bits(self) -> tuple[int, ...]:
        return tuple(r.bit for r in self.rounds)

    def to_json_dict(self) -> dict:
        def clean(v):
            if isinstance(v, (np.integer,)):
                return int(v)
            if isinstance(v, (np.floating,)):
                return float(v)
            if isinstance(v, tuple):
                return [clean(x) for x in v]
            return v
        return {
            "win": int(self.win),
            "weight": self.weight,
            "seed": clean(self.seed),
            "rounds": [
                {"i": r.index, "challenge": clean(r.challenge), "queries": r.queries_used,
                 "answer": clean(r.answer), "bit": int(r.bit),
                 "tags": {k: clean(v) for k, v in r.tags.items()
                          if not isinstance(v, np.ndarray)}}
                for r in self.rounds
            ],
        }


@dataclass(frozen=True)
class Estimate:
    """A win-rate estimate: exact (zero-width interval) or Wilson 95%."""

    mean: float
    ci_low: float
    ci_high: float
    trials: int
    seed: object = None
    exact: bool = False

    def __post_init__(self):
        if not (self.ci_low - 1e-12 <= self.mean <= self.ci_high + 1e-12):
            raise ValueError("estimate interval does not bracket its mean")

    @classmethod
    def from_exact(cls, value: float, trials: int = 0, seed=None) -> "Estimate":
        return cls(value, value, value, trials, seed, exact=True)

    @classmethod
    def from_bernoulli(cls, successes: float, trials: int, seed=None) -> "Estimate":
        lo, hi = wilson_interval(successes, trials)
        return cls(successes / trials, lo, hi, trials, seed, exact=False)

    def compatible(self, other: "Estimate") -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high


def wilson_interval(successes: float, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("need at least one trial")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based per-trial stream: reproducible regardless of worker
    count or execution order."""
    return np.random.default_rng(np.random.Philox(key=(int(seed), int(trial))))


class ChallengeFeed:
    """Sequencing guard: challenge i is readable only once round i is open."""

    def __init__(self):
        self._challenges: list = []
        self._open = -1

    def publish(self, i: int, ch) -> None:
        assert i == len(self._challenges)
        self._challenges.append(ch)
        self._open = i

    def get(self, i: int):
        if i > self._open:
            raise SequentialityError(
                f"challenge {i} requested but only round {self._open} is open")
        return self._challenges[i]


# ---------------------------------------------------------------------------
# classical engine
# ---------------------------------------------------------------------------

class _CountedOracle:
    def __init__(self, fn, budget=None):
        self.fn = fn
        self.count = 0
        self.budget = budget

    def __call__(self, x):
        if self.budget is not None and self.count >= self.budget:
            raise BudgetExceededError(f"classical query budget {self.budget} exceeded")
        self.count += 1
        return self.fn(x)


def _advice_branches(adv: ClassicalAdversary, table_fn, enumerate_branches: bool,
                     rng: np.random.Generator | None):
    if adv.prepare is None:
        return [(1.0, None)]
    advice = adv.prepare(table_fn)
    if isinstance(advice, UniformAdvice):
        if enumerate_branches:
            w = 1.0 / advice.count
            return [(w, v) for v in range(advice.count)]
        return [(1.0, int(rng.integers(advice.count)))]
    return [(1.0, advice)]


def _answer_branches(ans, enumerate_branches: bool, rng):
    if isinstance(ans, RandomAnswer):
        if enumerate_branches:
            return list((p, a) for a, p in ans.dist)
        return [(1.0, ans.sample(rng))]
    return [(1.0, ans)]


def _play_classical(game: GameSpec, adv: ClassicalAdversary, table_fn, g: int,
                    *, rng=None, enumerate_branches=False, rs=None,
                    seed=None) -> list[Transcript]:
    """All (or one sampled) transcripts of adv against the game on one table."""
    leaves: list[Transcript] = []
    feed = ChallengeFeed()

    def recurse(i, weight, memory, rounds):
        if i == g:
            bits = [r.bit for r in rounds]
            win = int(all(bits))
            leaves.append(Transcript(list(rounds), win, seed=seed,
                                     weight=weight if enumerate_branches else None))
            return
        if rs is not None:
            r_choices = [(1.0, rs[i])]
        elif enumerate_branches:
            r_choices = [(1.0 / len(game.randomness), r) for r in game.randomness]
        else:
            r_choices = [(1.0, game.randomness[rng.integers(len(game.randomness))])]
        for wr, r in r_choices:
            ch = game.samp(table_fn, r)
            feed._challenges = feed._challenges[:i]  # rewind across branch exploration
            feed._open = i - 1
            feed.publish(i, ch)
            oracle = _CountedOracle(lambda x, _r=r: game.query(table_fn, _r, x),
                                    budget=adv.query_budget)
            mem = dict(memory)
            mem["feed"] = feed
            ctx = ClassicalRoundContext(i, ch, memory.get("_advice"), oracle, mem, rng)
            ans = adv.act(ctx)
            mem.pop("feed", None)
            for wa, a in _answer_branches(ans, enumerate_branches, rng):
                if not isinstance(a, tuple):
                    a = (a,)
                bit = int(game.ver(table_fn, r, a))
                mem2 = dict(mem)
                mem2.setdefault("answers", [])
                mem2["answers"] = mem2["answers"] + [a]
                rec = RoundRecord(i, ch, oracle.count, a, bit)
                recurse(i + 1, weight * wr * wa, mem2, rounds + [rec])

    base_memory: dict = {}
    if adv.metadata.get("needs_table"):
        # analytic adversaries (exact in-round quantum simulation) read the
        # oracle content directly; their query accounting is documented in
        # their metadata rather than routed through the counted wrapper
        base_memory["_table"] = table_fn
    for w_adv, advice in _advice_branches(adv, table_fn, enumerate_branches, rng):
        recurse(0, w_adv, {**base_memory, "_advice": advice}, [])
    return leaves


# ---------------------------------------------------------------------------
# quantum engine
# ---------------------------------------------------------------------------

def _program_layout_parts(game: GameSpec, program: AdversaryProgram,
                          session: OracleSession):
    regs = [r if isinstance(r, qcore.Register) else qcore.Register(*r)
            for r in program.registers]
    if program.advice is not None and program.advice.kind == "quantum":
        regs += [r if isinstance(r, qcore.Register) else qcore.Register(*r)
                 for r in program.advice.registers]
    anc = []
    if game is not None and game.ver_circuit is not None:
        for j in range(game.t_ver):
            anc.append(qcore.Register(f"_vpt{j}", game.N, "work"))
            anc.append(qcore.Register(f"_vval{j}", game.M, "work"))
        anc.append(qcore.Register("_vdec", 2, "decision"))
    if session.mode != OracleMode.EXACT:
        anc.append(qcore.Register("_cval", session.M, "work"))
    return regs, anc


def _initial_run(game, program, session, rng, advice_state: PureState | None):
    regs, anc = _program_layout_parts(game, program, session)
    all_regs = regs + anc
    if advice_state is not None:
        # advice registers sit inside `regs`; build the product state piecewise
        adv_names = [r.name if isinstance(r, qcore.Register) else r[0]
                     for r in program.advice.registers]
        plain = [r for r in all_regs if r.name not in adv_names]
        st = PureState.basis(qcore.RegisterLayout(plain[:len(program.registers)]))
        st = tensor(st, advice_state)
        rest = plain[len(program.registers):]
        if rest:
            st = tensor(st, PureState.basis(qcore.RegisterLayout(rest)))
        oracle_regs = session.oracle_registers()
        if oracle_regs:
            st = tensor(st, session.oracle_initial_state())
        layout = st.layout
        return ProgramRun(layout=layout, state=st, session=session, rng=rng)
    run = start_run(all_regs, session, rng)
    return run


def challenger_verify_superposed(run: ProgramRun, game: GameSpec, r, ch,
                                 answer_regs: Sequence[str], *,
                                 rng: np.random.Generator | None = None,
                                 force_bit: int | None = None) -> tuple[int, float]:
    """Projective verification of a (possibly superposed) answer register.

    Computes Ver into a fresh decision register using at most t_ver oracle
    queries, measures the bit, then uncomputes the queries and the workspace,
    leaving the post-measurement answer state in place.  Returns the bit and
    the probability of the accepting branch at the time of measurement.
    """
    circ = game.ver_circuit(r, ch)
    if len(circ.queries) > game.t_ver:
        raise ValueError(f"ver circuit uses {len(circ.queries)} > t_ver={game.t_ver} queries")
    from .oracles import oracle_query

    answer_regs = tuple(answer_regs)
    val_regs: list[str] = []
    n_ans = len(answer_regs)
    for j, vq in enumerate(circ.queries):
        in_regs = answer_regs + tuple(val_regs)
        fn = (lambda *vals, _f=vq.point_fn, _n=n_ans:
              _f(tuple(vals[:_n]), tuple(vals[_n:])))
        run.state = apply_classical(run.state, fn, in_regs, f"_vpt{j}")
        run.state = oracle_query(run.session, run.state, f"_vpt{j}", f"_vval{j}")
        val_regs.append(f"_vval{j}")
    pred_in = answer_regs + tuple(val_regs)
    pred = (lambda *vals, _p=circ.predicate, _n=n_ans:
            int(_p(tuple(vals[:_n]), tuple(vals[_n:]))))
    run.state = apply_classical(run.state, pred, pred_in, "_vdec")

    records = measure(run.state, regs=("_vdec",))
    by_bit = {rec.outcome[0]: rec for rec in records}
    p1 = by_bit[1].probability if 1 in by_bit else 0.0
    if force_bit is not None:
        if force_bit not in by_bit:
            raise ZeroSupportError(f"forced verification bit {force_bit} has zero support")
        rec = by_bit[force_bit]
    elif len(records) == 1:
        rec = records[0]
    else:
        probs = np.array([rec.probability for rec in records])
        rec = records[rng.choice(len(records), p=probs / probs.sum())]
    bit = int(rec.outcome[0])
    p_branch = rec.probability
    run.state = rec.post_state

    # uncompute: the surviving components all satisfy predicate == bit
    run.state = apply_classical(run.state, pred, pred_in, "_vdec", sign=-1)
    for j in reversed(range(len(circ.queries))):
        in_regs = answer_regs + tuple(val_regs[:j])
        vq = circ.queries[j]
        fn = (lambda *vals, _f=vq.point_fn, _n=n_ans:
              _f(tuple(vals[:_n]), tuple(vals[_n:])))
        run.state = oracle_query(run.session, run.state, f"_vpt{j}", f"_vval{j}", sign=-1)
        run.state = apply_classical(run.state, fn, in_regs, f"_vpt{j}", sign=-1)
    return bit, p1


def _play_quantum(game: GameSpec, program: AdversaryProgram, g: int, mode,
                  *, table: TruthTable | None = None, rng=None, rs=None,
                  force_bits=None, snapshot_regs=None, measure_answer_first=False,
                  advice_state=None, advice_value=None, seed=None) -> tuple[Transcript, ProgramRun]:
    """One sampled multi-instance interaction (quantum adversary)."""
    mode = OracleMode.parse(mode)
    session = OracleSession.create(mode, game.N, game.M, table=table,
                                   seed=None if table is not None else int(rng.integers(2**63)))
    run = _initial_run(game, program, session, rng, advice_state)
    feed = ChallengeFeed()
    memory: dict = {}
    rounds: list[RoundRecord] = []
    snapshots = []
    if snapshot_regs:
        snapshots.append(reduced_density([(1.0, run.state)], snapshot_regs))

    def challenger_oracle(x):
        if session.mode == OracleMode.EXACT:
            return session.table(x)
        return run.classical_read(int(x), "_cval", rng)

    for i in range(g):
        r = rs[i] if rs is not None else game.randomness[rng.integers(len(game.randomness))]
        ch = game.samp(challenger_oracle, r)
        feed.publish(i, ch)
        ctx = RoundContext(round_index=i, challenge=ch, advice=advice_value,
                           memory=memory, params={"feed": feed, "game": game})
        steps = program.build_round(ctx)
        run.round_queries = 0
        run.mask = game.quantum_mask(r) if game.quantum_mask is not None else None
        run_steps(run, steps, budget=program.query_budget)
        run.mask = None

        answer_value = None
        if measure_answer_first:
            recs = measure(run.state, regs=program.answer_regs)
            probs = np.array([rec.probability for rec in recs])
            rec = recs[rng.choice(len(recs), p=probs / probs.sum())]
            run.state = rec.post_state
            answer_value = rec.outcome
        force = force_bits[i] if force_bits is not None else None
        bit, p_accept = challenger_verify_superposed(
            run, game, r, ch, program.answer_regs, rng=rng, force_bit=force)
        if program.post_round is not None:
            # the answer state was handed back; the adversary uncomputes its
            # round against its own (possibly masked) query oracle
            run.mask = game.quantum_mask(r) if game.quantum_mask is not None else None
            run_steps(run, program.post_round(ctx), budget=program.query_budget)
            run.mask = None
        if answer_value is None:
            # answers that are classical after the projective step get recorded
            vals = [np.unique(run.state.layout.column(run.state.codes, a))
                    for a in program.answer_regs]
            if all(v.size == 1 for v in vals):
                answer_value = tuple(int(v[0]) for v in vals)
        memory.setdefault("answers", []).append(answer_value)
        tags = {"p_accept": p_accept, "r": r}
        if snapshot_regs:
            tags["snapshot"] = reduced_density([(1.0, run.state)], snapshot_regs)
        rounds.append(RoundRecord(i, ch, run.round_queries, answer_value, bit, tags))

    transcript = Transcript(rounds, int(all(rr.bit for rr in rounds)), seed=seed,
                            meta={"mode": mode.value})
    if snapshot_regs:
        transcript.meta["snapshot0"] = snapshots[0]
    return transcript, run


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def run_single(game: GameSpec, adv, mode="exact", seed: int = 0, *,
               table: TruthTable | None = None, r=None) -> Transcript:
    """Play the game once.  Superposed answers are measured in the
    computational basis before classical verification."""
    return run_multi_instance(game, 1, adv, mode=mode, seed=seed, table=table,
                              rs=None if r is None else [r],
                              measure_answer_first=True)


def run_multi_instance(game: GameSpec, g: int, adv, mode="exact", seed: int = 0, *,
                       table: TruthTable | None = None, rs=None, force_bits=None,
                       snapshot_regs=None, measure_answer_first=False,
                       rng=None) -> Transcript:
    """One sampled transcript of the g-round sequential game."""
    rng = rng if rng is not None else trial_rng(seed, 0)
    mode = OracleMode.parse(mode)
    if isinstance(adv, ClassicalAdversary):
        if mode != OracleMode.EXACT:
            raise ValueError("classical adversaries run against exact-mode oracles")
        if table is None:
            table = TruthTable.random(game.N, game.M, rng)
        leaves = _play_classical(game, adv, table, g, rng=rng, rs=rs, seed=seed)
        return leaves[0]
    advice_state, advice_value = _prepare_advice(adv, game, mode, table, rng)
    t, _ = _play_quantum(game, adv, g, mode, table=table, rng=rng, rs=rs,
                         force_bits=force_bits, snapshot_regs=snapshot_regs,
                         measure_answer_first=measure_answer_first,
                         advice_state=advice_state, advice_value=advice_value,
                         seed=seed)
    return t


def _prepare_advice(program: AdversaryProgram, game, mode, table, rng):
    spec = program.advice
    if spec is None:
        return None, None
    if OracleMode.parse(mode) != OracleMode.EXACT:
        raise ValueError("advice preparation reads the truth table; use exact mode")
    if table is None:
        raise ValueError("advice preparation needs the concrete table")
    if spec.kind == "classical":
        if spec.uniform:
            return None, int(rng.integers(spec.dim))
        return None, spec.prepare(table)
    layout = qcore.RegisterLayout(spec.registers)
    if spec.uniform:
        code = int(rng.integers(layout.dim))
        return PureState.basis(layout, layout.decode(code)), None
    return PureState.from_amplitudes(layout, spec.prepare(table)), None


def estimate_win(game: GameSpec, adv, *, g: int = 1, mode="exact", trials: int,
                 seed: int = 0, collect: bool = False,
                 trial_indices=None) -> tuple[Estimate, list[Transcript]]:
    """Monte-Carlo win-rate over fresh (oracle, randomness, measurement)
    draws, with a Wilson 95% interval."""
    wins = 0
    kept: list[Transcript] = []
    indices = list(trial_indices) if trial_indices is not None else list(range(trials))
    for trial in indices:
        rng = trial_rng(seed, trial)
        t = run_multi_instance(game, g, adv, mode=mode, seed=seed, rng=rng)
        wins += t.win
        if collect:
            t.seed = (seed, trial)
            kept.append(t)
    return Estimate.from_bernoulli(wins, len(indices), seed=seed), kept


def enumerate_win(game: GameSpec, adv, *, g: int = 1, tables=None,
                  guard: int = ENUM_GUARD) -> tuple[Estimate, list[Transcript]]:
    """Exact win probability by full enumeration over truth tables,
    challenger randomness, advice, and answer branches (classical
    adversaries, exact-mode semantics)."""
    if not isinstance(adv, ClassicalAdversary):
        raise TypeError("enumerate_win drives classical adversaries; "
                        "use quantum_round_distribution for programs")
    if tables is None:
        size = game.M ** game.N
        if size > guard:
            raise qcore.DimensionGuardError(
                f"enumeration space exceeds guard {guard}")
        tables = list(TruthTable.all_tables(game.N, game.M))
    # deterministic advice is one branch; only uniform-guess advice fans out
    probe = adv.prepare(tables[0]) if adv.prepare is not None else None
    advice_dim = probe.count if isinstance(probe, UniformAdvice) else 1
    if len(tables) * advice_dim * len(game.randomness) ** g > guard:
        raise qcore.DimensionGuardError(
            f"enumeration space exceeds guard {guard}")
    weight = 1.0 / len(tables)
    total = 0.0
    out: list[Transcript] = []
    for table in tables:
        for t in _play_classical(game, adv, table, g, enumerate_branches=True):
            t.weight *= weight
            total += t.weight * t.win
            out.append(t)
    return Estimate.from_exact(total, trials=len(out)), out


def conditional_round_success(transcripts: Sequence[Transcript], i: int,
                              condition: Callable[[Transcript], bool] | None = None
                              ) -> Estimate:
    """Estimate Pr[b_i = 1 | condition on earlier rounds].

    ``i`` is 1-based.  Exact when the transcripts carry enumeration weights.
    Zero support under the condition raises rather than returning 0/0.
    """
    if i < 1:
        raise ValueError("rounds are 1-based")
    sel = [t for t in transcripts if condition is None or condition(t)]
    if not sel:
        raise ZeroSupportError("condition has zero support in the transcripts")
    if all(t.weight is not None for t in sel):
        denom = sum(t.weight for t in sel)
        if denom <= 0:
            raise ZeroSupportError("condition has zero probability mass")
        num = sum(t.weight for t in sel if t.rounds[i - 1].bit == 1)
        return Estimate.from_exact(num / denom, trials=len(sel))
    wins = sum(t.rounds[i - 1].bit for t in sel)
    return Estimate.from_bernoulli(wins, len(sel))


def given_prior_bits(*bits: int) -> Callable[[Transcript], bool]:
    """Condition helper: earlier rounds produced exactly these bits."""
    def cond(t: Transcript) -> bool:
        return all(t.rounds[j].bit == b for j, b in enumerate(bits))
    return cond
