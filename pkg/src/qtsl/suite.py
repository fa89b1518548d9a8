"""Named property families behind `qtsl verify`.

Each family is a function returning CheckResult rows; the CLI runner prints
one line per check and exits nonzero on any failure.  The acceptance test
module reuses these functions at their criterion-scale parameters, so the
CLI and pytest agree on what was verified.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import adversaries as advs
from . import arena, games, qcore
from .oracles import (OracleMode, OracleSession, TruthTable, database_size_mass,
                      final_distribution, oracle_output_distribution, run_steps,
                      start_run, total_variation)
from .programs import (AdversaryProgram, ClassicalAdversary, Gate, MeasureReg, Query,
                       RandomAnswer, RoundContext)
from .qcore import PureState, RegisterLayout, measure, qft, trace_distance_pure


@dataclass
class CheckResult:
    family: str
    name: str
    passed: bool
    detail: str = ""


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(np.random.Philox(key=seed))


def _haar(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_state(layout: RegisterLayout, rng: np.random.Generator) -> PureState:
    amps = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    amps /= np.linalg.norm(amps)
    return PureState(layout, np.arange(layout.dim, dtype=np.int64), amps)


def random_query_program(N: int, M: int, n_queries: int, rng: np.random.Generator,
                         with_measurement: bool = False) -> AdversaryProgram:
    """A seeded random oracle algorithm: Haar-random local unitaries on the
    input and output registers interleaved with standard-semantics queries."""
    gates = []
    for _ in range(n_queries + 1):
        gates.append((_haar(N, rng), _haar(M, rng)))
    measure_at = int(rng.integers(n_queries + 1)) if with_measurement else -1

    def build(ctx):
        steps: list = []
        for j in range(n_queries):
            steps += [Gate(gates[j][0], ("x",)), Gate(gates[j][1], ("u",))]
            if j == measure_at:
                steps.append(MeasureReg(("u",), "mid"))
            steps.append(Query("x", "u"))
        steps += [Gate(gates[n_queries][0], ("x",)), Gate(gates[n_queries][1], ("u",))]
        return steps

    return AdversaryProgram(f"random(N={N},M={M},q={n_queries})", (("x", N), ("u", M)),
                            n_queries, build, ("x", "u"))


# ---------------------------------------------------------------------------
# family: qcore-props
# ---------------------------------------------------------------------------

def check_qcore_props(trials: int = 100, seed: int = 2024) -> list[CheckResult]:
    rng = _rng(seed)
    out = []

    worst_norm = 0.0
    worst_qft = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        m = int(rng.integers(2, 6))
        lay = RegisterLayout([("a", n), ("b", m)])
        st = random_state(lay, rng)
        st2 = qcore.apply_register_unitary(st, "a", _haar(n, rng))
        st2 = qcore.apply_classical(st2, lambda a: (a * a + 1) % m, ("a",), "b")
        st2 = qcore.apply_phase(st2, lambda b: np.exp(2j * np.pi * b / m), ("b",))
        worst_norm = max(worst_norm, abs(st2.norm2() - 1.0))
        back = qft(qft(st, "a"), "a", inverse=True)
        worst_qft = max(worst_qft, qcore.l2_distance(back, st))
    out.append(CheckResult("qcore-props", "norm preservation (unitary ops)",
                           worst_norm <= 1e-12, f"worst drift {worst_norm:.2e}"))
    out.append(CheckResult("qcore-props", "qft . inverse qft = identity",
                           worst_qft <= 1e-12, f"worst distance {worst_qft:.2e}"))

    # measurement completeness and re-measurement stability
    ok = True
    for _ in range(20):
        lay = RegisterLayout([("a", 4), ("b", 3)])
        st = random_state(lay, rng)
        recs = measure(st, regs=("a",))
        total = sum(r.probability for r in recs)
        ok &= abs(total - 1.0) <= 1e-9
        for r in recs:
            again = measure(r.post_state, regs=("a",))
            ok &= len(again) == 1 and again[0].outcome == r.outcome
    out.append(CheckResult("qcore-props", "measurement completeness + idempotence", ok))

    # the worked probability example: (3/5)|0> + (4/5)|1>
    lay = RegisterLayout([("b", 2)])
    st = PureState.from_amplitudes(lay, {(0,): 0.6, (1,): 0.8})
    recs = measure(st, regs=("b",))
    out.append(CheckResult("qcore-props", "3/5,4/5 state measures 0 w.p. 9/25",
                           abs(recs[0].probability - 9 / 25) < 1e-12,
                           f"got {recs[0].probability}"))

    # trace distance: symmetry, zero iff equal up to phase, triangle
    ok, detail = True, ""
    for _ in range(50):
        lay = RegisterLayout([("a", 5)])
        x, y, z = (random_state(lay, rng) for _ in range(3))
        dxy, dyx = trace_distance_pure(x, y), trace_distance_pure(y, x)
        ok &= abs(dxy - dyx) <= 1e-12
        # near zero the sqrt form amplifies rounding to ~1e-8
        ok &= trace_distance_pure(x, x) <= 1e-7
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi))
        xr = PureState(lay, x.codes, x.amps * phase)
        ok &= trace_distance_pure(x, xr) <= 1e-6
        ok &= dxy <= trace_distance_pure(x, z) + trace_distance_pure(z, y) + 1e-12
    out.append(CheckResult("qcore-props", "trace distance metric properties", ok, detail))

    # gentle measurement: two-outcome partition with P(0) = 1 - eps
    worst = 0.0
    for _ in range(trials):
        lay = RegisterLayout([("a", 6)])
        st = random_state(lay, rng)
        recs = measure(st, partition=lambda lab: 0 if lab[0] < 5 else 1)
        likely = max(recs, key=lambda r: r.probability)
        eps = 1.0 - likely.probability
        td = trace_distance_pure(st, likely.post_state)
        worst = max(worst, td - math.sqrt(max(eps, 0.0)))
    out.append(CheckResult("qcore-props", "gentle measurement: disturbance <= sqrt(eps)",
                           worst <= 1e-9, f"worst excess {worst:.2e}"))
    return out


# ---------------------------------------------------------------------------
# family: oracle-equiv  (exact / standard / phase / compressed agree)
# ---------------------------------------------------------------------------

MODES = ("exact", "standard", "phase", "compressed")


def check_oracle_equivalence(programs: int = 200, seed: int = 7,
                             budget_s: float | None = None) -> list[CheckResult]:
    rng = _rng(seed)
    worst = 0.0
    worst_cfg = None
    t0 = time.time()
    for i in range(programs):
        N = int(rng.integers(2, 5))
        M = int(rng.integers(2, 5))
        nq = int(rng.integers(0, 4))
        with_meas = i % 10 == 9
        prog = random_query_program(N, M, nq, rng, with_measurement=with_meas)
        dists = {m: oracle_output_distribution(prog, m, N, M) for m in MODES}
        for a in range(len(MODES)):
            for b in range(a + 1, len(MODES)):
                tv = total_variation(dists[MODES[a]], dists[MODES[b]])
                if tv > worst:
                    worst, worst_cfg = tv, (N, M, nq, MODES[a], MODES[b])
    elapsed = time.time() - t0
    ok = worst <= 1e-9 and (budget_s is None or elapsed <= budget_s)
    return [CheckResult("oracle-equiv",
                        f"{programs} random programs, pairwise TV across modes",
                        ok, f"worst TV {worst:.2e} at {worst_cfg}, {elapsed:.1f}s")]


# ---------------------------------------------------------------------------
# family: bounded-db
# ---------------------------------------------------------------------------

def check_bounded_database(seed: int = 11, max_t: int = 4) -> list[CheckResult]:
    rng = _rng(seed)
    out = []
    worst = 0.0
    for trial in range(12):
        N = int(rng.integers(2, 5))
        M = int(rng.integers(2, 5))
        T = int(rng.integers(1, max_t + 1))
        prog = random_query_program(N, M, T, rng, with_measurement=(trial % 3 == 2))
        session = OracleSession.create("compressed", N, M)
        run = start_run(prog.registers, session)
        leaves = run_steps(run, list(prog.build_round(RoundContext(0))),
                           enumerate_branches=True, budget=T)
        for leaf in leaves:
            # conditioned branches must satisfy the same support bound
            mass = database_size_mass(leaf.state.normalized(), session)
            excess = float(mass[T + 1:].sum()) if T + 1 <= N else 0.0
            worst = max(worst, excess)
    out.append(CheckResult("bounded-db",
                           f"support on |D| <= T after T <= {max_t} queries "
                           "(incl. conditioned branches)",
                           worst <= 1e-12, f"worst excess mass {worst:.2e}"))
    return out


# ---------------------------------------------------------------------------
# family: lemma5  (truth-table vs database semantics)
# ---------------------------------------------------------------------------

def _relation_probability(leaves, relation, layout_cols: Callable) -> float:
    p = 0.0
    for leaf in leaves:
        st = leaf.state
        xcol, ucol, hit = layout_cols(st)
        sel = hit & np.array([(int(a), int(b)) in relation
                              for a, b in zip(xcol, ucol)])
        p += leaf.weight * float(np.sum(np.abs(st.amps[sel]) ** 2))
    return p


def lemma5_instance(N: int, M: int, T: int, seed: int,
                    conditioned: bool = False) -> tuple[float, float]:
    """One experiment: p under standard-oracle truth-table semantics vs p'
    under compressed-oracle database semantics, for a random program and a
    random 1-tuple relation."""
    rng = _rng(seed)
    prog = random_query_program(N, M, T, rng, with_measurement=conditioned)
    n_rel = int(rng.integers(1, N * M + 1))
    flat = rng.choice(N * M, size=n_rel, replace=False)
    relation = {(int(v // M), int(v % M)) for v in flat}

    def run_mode(mode):
        session = OracleSession.create(mode, N, M)
        run = start_run(prog.registers, session)
        leaves = run_steps(run, list(prog.build_round(RoundContext(0))),
                           enumerate_branches=True, budget=T)
        if conditioned:
            keys = sorted({leaf.outcomes.get("mid") for leaf in leaves},
                          key=lambda v: (v is None, v))
            chosen = keys[0]
            leaves = [l for l in leaves if l.outcomes.get("mid") == chosen]
            total = sum(l.weight for l in leaves)
            for l in leaves:
                l.weight /= total
        return leaves, session

    leaves_s, sess_s = run_mode("standard")

    def cols_standard(st):
        lay = st.layout
        xcol = lay.column(st.codes, "x")
        ucol = lay.column(st.codes, "u")
        hcoefs = np.array([lay.coef_of(f"h{x}") for x in range(N)], dtype=np.int64)
        hvals = (st.codes // hcoefs[xcol]) % M
        return xcol, ucol, hvals == ucol

    p = _relation_probability(leaves_s, relation, cols_standard)

    leaves_c, sess_c = run_mode("compressed")

    def cols_compressed(st):
        lay = st.layout
        xcol = lay.column(st.codes, "x")
        ucol = lay.column(st.codes, "u")
        dcoefs = np.array([lay.coef_of(f"d{x}") for x in range(N)], dtype=np.int64)
        dvals = (st.codes // dcoefs[xcol]) % (M + 1)
        return xcol, ucol, dvals == ucol  # bot (= M) never equals u < M
    p_prime = _relation_probability(leaves_c, relation, cols_compressed)
    return p, p_prime


def check_lemma5(instances: int = 100, N: int = 4, M: int = 4, T: int = 2,
                 seed: int = 13) -> list[CheckResult]:
    worst = -1.0
    for i in range(instances):
        p, pp = lemma5_instance(N, M, T, seed=(seed, i), conditioned=(i % 4 == 3))
        slack = math.sqrt(pp) + math.sqrt(1.0 / M) - math.sqrt(p)
        worst = max(worst, -slack)
    return [CheckResult("lemma5",
                        f"sqrt(p) <= sqrt(p') + sqrt(1/M) on {instances} instances "
                        f"(N={N}, M={M}, T={T})",
                        worst <= 1e-9, f"worst violation {worst:.2e}")]


# ---------------------------------------------------------------------------
# family: exact-values  (paper's exact quantities)
# ---------------------------------------------------------------------------

def check_exact_values() -> list[CheckResult]:
    out = []
    est, _ = arena.enumerate_win(games.yaobox_game(4), advs.yaobox_store_first(4))
    out.append(CheckResult("exact-values", "yaobox store-first N=4 wins 0.625",
                           abs(est.mean - 0.625) <= 1e-12, f"got {est.mean!r}"))
    for M in (2, 4):
        game = games.prediction_game(M)
        est, _ = arena.enumerate_win(game, advs.uniform_guesser(game))
        out.append(CheckResult("exact-values", f"prediction without advice wins 1/M (M={M})",
                               abs(est.mean - 1.0 / M) <= 1e-12, f"got {est.mean!r}"))
    lay = RegisterLayout([("b", 2)])
    st = PureState.from_amplitudes(lay, {(0,): 0.6, (1,): 0.8})
    p0 = measure(st, regs=("b",))[0].probability
    out.append(CheckResult("exact-values", "measurement example: result 0 w.p. 9/25",
                           abs(p0 - 0.36) <= 1e-12, f"got {p0!r}"))
    game = games.owf_game(4, 4)
    est, _ = arena.enumerate_win(game, advs.uniform_guesser(game))
    out.append(CheckResult("exact-values", "owf random guess wins >= 1/N (N=M=4)",
                           est.mean >= 0.25 - 1e-12, f"got {est.mean!r}"))
    return out


# ---------------------------------------------------------------------------
# family: grover
# ---------------------------------------------------------------------------

def grover_simulated_success(N: int, T: int, y: int = 0) -> float:
    """Step-program Grover against a unique-preimage table, exact mode."""
    table = TruthTable(N, N, tuple(range(N)))
    prog = advs.grover_invert(y, N, N, T)
    session = OracleSession.create("exact", N, N, table=table)
    run = start_run(prog.registers, session)
    leaves = run_steps(run, list(prog.build_round(RoundContext(0))),
                       enumerate_branches=True, budget=prog.query_budget)
    dist = final_distribution(leaves, ("x",))
    return dist.get((y,), 0.0)


def check_grover(ns=(2, 4, 8, 16), max_t: int = 3) -> list[CheckResult]:
    worst = 0.0
    worst_cfg = None
    for N in ns:
        for T in range(max_t + 1):
            sim = grover_simulated_success(N, T)
            closed = advs.grover_closed_form(N, T)
            err = abs(sim - closed)
            if err > worst:
                worst, worst_cfg = err, (N, T)
    ok = worst <= 1e-9
    res = [CheckResult("grover", f"reflection simulation matches closed form, N in {ns}, T <= {max_t}",
                       ok, f"worst |sim-closed| {worst:.2e} at {worst_cfg}")]
    exact_one = grover_simulated_success(4, 1)
    res.append(CheckResult("grover", "N=4, T=1, unique preimage wins with certainty",
                           abs(exact_one - 1.0) <= 1e-9, f"got {exact_one!r}"))
    return res


# ---------------------------------------------------------------------------
# family: salted-tightness  (criterion-6 attack values)
# ---------------------------------------------------------------------------

def check_salted_tightness(K: int = 8, M: int = 4, s_values=(2, 4),
                           t_values=(0, 1)) -> list[CheckResult]:
    out = []
    for S in s_values:
        for T in t_values:
            enum = advs.salted_prediction_enumerate(K, M, S, T)
            closed = advs.salted_prediction_exact_success(K, M, S, T)
            out.append(CheckResult(
                "salted-tightness",
                f"sum-advice attack K={K} M={M} S={S} T={T} wins c+(1-c)/M",
                abs(enum - closed) <= 1e-12,
                f"enumerated {enum!r} vs closed {closed!r}"))
    # generic branch-enumerator cross-check at a reduced size
    game = games.salt_wrap(games.prediction_game(2), 4)
    est, _ = arena.enumerate_win(game, advs.salted_prediction_attack(4, 2, 1, 0))
    vec = advs.salted_prediction_enumerate(4, 2, 1, 0)
    out.append(CheckResult("salted-tightness", "generic enumerator agrees (K=4, M=2)",
                           abs(est.mean - vec) <= 1e-12, f"{est.mean} vs {vec}"))
    return out


# ---------------------------------------------------------------------------
# family: reductions  (advice removal, repetition, wrapper gentleness)
# ---------------------------------------------------------------------------

def _advice_removal_configs():
    yield "yaobox N=2 store-first (S=1)", games.yaobox_game(2), advs.yaobox_store_first(2)
    yield "yaobox N=4 store-first (S=1)", games.yaobox_game(4), advs.yaobox_store_first(4)

    def store_pred(M):
        bits = int(math.log2(M))
        return ClassicalAdversary("pred_store", 0, advice_bits=bits,
                                  prepare=lambda t: t(0),
                                  act=lambda ctx: (ctx.advice,))
    yield "prediction M=2 store H(1) (S=1)", games.prediction_game(2), store_pred(2)
    yield "prediction M=4 store H(1) (S=2)", games.prediction_game(4), store_pred(4)
    yield "crh N=2 M=2 store pair (S=2)", games.crh_game(2, 2), advs.crh_store_collision(2, 2, 2)


def check_advice_removal() -> list[CheckResult]:
    out = []
    for name, game, adv in _advice_removal_configs():
        base, _ = arena.enumerate_win(game, adv)
        removed, _ = arena.enumerate_win(game, advs.remove_advice(adv))
        lower = 2.0 ** -adv.advice_bits * base.mean
        out.append(CheckResult(
            "reductions", f"advice removal keeps win >= 2^-S * original: {name}",
            removed.mean >= lower - 1e-12,
            f"original {base.mean:.6f}, removed {removed.mean:.6f}, bound {lower:.6f}"))
    # repetition product law: per-instance repeat of a 0-query guesser
    game = games.owf_y_game(2, 2)
    guesser = advs.uniform_guesser(game)
    est, _ = arena.enumerate_win(game, advs.repeat_per_instance(guesser, 2), g=2)
    out.append(CheckResult("reductions", "repeat-per-instance: g=2 guesser wins (1/M)^2",
                           abs(est.mean - 0.25) <= 1e-12, f"got {est.mean!r}"))
    return out


def wrapper_gentleness_report(k: int, gamma: float, g: int = 3, seed: int = 11,
                              table_values=(0, 1)) -> dict:
    """Run the k-copy wrapper on a corrupted-advice inverter at N=M=2 and
    measure per-round and cumulative advice disturbance against the gentle
    and union bounds."""
    N = M = 2
    game = games.owf_game(N, M)
    inner = _corrupted_table_inverter(N, M, gamma)
    wrapped = advs.public_verif_wrapper(inner, k, game)
    adv_regs = tuple(r.name for r in wrapped.advice.registers)
    table = TruthTable(N, M, table_values)
    rng = arena.trial_rng(seed, 0)
    t = arena.run_multi_instance(game, g, wrapped, mode="exact", seed=seed, table=table,
                                 force_bits=(1,) * g, snapshot_regs=adv_regs, rng=rng)
    rho0 = t.meta["snapshot0"]
    prev = rho0
    rounds = []
    cum_bound = 0.0
    for rr in t.rounds:
        eps = max(0.0, 1.0 - rr.tags["p_accept"])
        td_round = qcore.trace_distance_density(rr.tags["snapshot"], prev)
        td_total = qcore.trace_distance_density(rr.tags["snapshot"], rho0)
        cum_bound += math.sqrt(eps)
        rounds.append({"eps": eps, "td_round": td_round, "td_total": td_total,
                       "cum_bound": cum_bound})
        prev = rr.tags["snapshot"]
    return {"rounds": rounds, "win": t.win}


def _corrupted_table_inverter(N, M, gamma):
    from .programs import AdviceSpec, ClassicalMap
    regs = tuple((f"a{i}", M) for i in range(N))

    def prepare(table):
        good = tuple(table(x) for x in range(N))
        bad = tuple((v + 1) % M for v in good)
        out = {good: math.sqrt(1 - gamma)}
        out[bad] = out.get(bad, 0) + math.sqrt(gamma)
        return out

    def build(ctx):
        y = ctx.challenge

        def lookup(*tbl):
            for x, v in enumerate(tbl):
                if v == y:
                    return x
            return 0
        return [ClassicalMap(lookup, tuple(f"a{i}" for i in range(N)), "ans")]

    bits = N * max(1, int(math.log2(M)))
    return AdversaryProgram("corrupted_inverter", (("ans", N),), 0, build, ("ans",),
                            advice=AdviceSpec("quantum", bits=bits, registers=regs,
                                              prepare=prepare))


def check_wrapper_gentleness(gs=(1, 2, 3)) -> list[CheckResult]:
    out = []
    for g in gs:
        for k, gamma in ((1, 0.2), (2, 0.3)):
            rep = wrapper_gentleness_report(k, gamma, g=g)
            ok = all(r["td_round"] <= math.sqrt(r["eps"]) + 1e-9 for r in rep["rounds"])
            ok &= all(r["td_total"] <= r["cum_bound"] + 1e-9 for r in rep["rounds"])
            out.append(CheckResult(
                "reductions",
                f"k-copy wrapper gentle + union bounds (k={k}, gamma={gamma}, g={g})",
                ok, "; ".join(f"td={r['td_round']:.3f}<=sqrt({r['eps']:.3f})"
                              for r in rep["rounds"])))
    rep = wrapper_gentleness_report(1, 0.0, g=3)
    ok = all(r["td_total"] <= 1e-9 for r in rep["rounds"]) and rep["win"] == 1
    out.append(CheckResult("reductions",
                           "perfect per-round success leaves advice undisturbed",
                           ok, f"worst td {max(r['td_total'] for r in rep['rounds']):.2e}"))
    return out


# ---------------------------------------------------------------------------
# family: games-props
# ---------------------------------------------------------------------------

def check_game_properties(seed: int = 3) -> list[CheckResult]:
    rng = _rng(seed)
    out = []

    # determinism of (samp, query, ver) given (H, r)
    ok = True
    for game in (games.owf_game(3, 3), games.owf_y_game(2, 4), games.yaobox_game(4),
                 games.crh_game(3, 2), games.salt_wrap(games.prediction_game(2), 4)):
        table = TruthTable.random(game.N, game.M, rng)
        for r in game.randomness[:6]:
            a = (game.samp(table, r), game.query(table, r, 0), game.ver(table, r, (0,) * len(game.answer_sizes)))
            b = (game.samp(table, r), game.query(table, r, 0), game.ver(table, r, (0,) * len(game.answer_sizes)))
            ok &= a == b
    out.append(CheckResult("games-props", "samp/query/ver deterministic given (H, r)", ok))

    # t_ver honesty: instrumented oracle accesses inside ver
    ok, detail = True, []
    for game in (games.owf_game(3, 3), games.owf_y_game(3, 3), games.crh_game(3, 2)):
        table = TruthTable.random(game.N, game.M, rng)
        counter = [0]

        def counted(x):
            counter[0] += 1
            return table(x)
        for r in game.randomness[:4]:
            counter[0] = 0
            game.ver(counted, r, tuple(0 for _ in game.answer_sizes))
            ok &= counter[0] <= game.t_ver or not game.publicly_verifiable
            detail.append(f"{game.name}:{counter[0]}<={game.t_ver}")
    out.append(CheckResult("games-props", "ver oracle accesses within declared t_ver",
                           ok, " ".join(detail[:6])))

    # decision flag: complementing the final bit maps p -> 1-p
    game = games.yaobox_game(3)
    base = advs.yaobox_store_first(3)
    comp = ClassicalAdversary("complement", 0, advice_bits=1,
                              prepare=base.prepare,
                              act=lambda ctx: _complement_answer(base.act(ctx)))
    p, _ = arena.enumerate_win(game, base)
    q, _ = arena.enumerate_win(game, comp)
    out.append(CheckResult("games-props", "decision game: complemented answers win 1-p",
                           abs(p.mean + q.mean - 1.0) <= 1e-12,
                           f"p={p.mean}, complement={q.mean}"))

    # salting with identity delegation reproduces the raw oracle off-salt
    inner = games.owf_y_game(2, 3)
    salted = games.salt_wrap(inner, 4)
    table = TruthTable.random(salted.N, salted.M, rng)
    ok = True
    for sr in salted.randomness[:8]:
        for p_point in range(salted.N):
            expect = table(p_point)  # inner query is the raw oracle
            ok &= salted.query(table, sr, p_point) == expect
    out.append(CheckResult("games-props", "salt wrapper: raw oracle on every point "
                           "(identity delegation)", ok))

    # sequentiality instrumentation: reading ahead raises
    feed = arena.ChallengeFeed()
    feed.publish(0, "c0")
    try:
        feed.get(1)
        ok = False
    except arena.SequentialityError:
        ok = True
    out.append(CheckResult("games-props", "challenge feed refuses out-of-order access", ok))
    return out


def _complement_answer(ans):
    if isinstance(ans, RandomAnswer):
        return RandomAnswer(tuple(((1 - a[0],), p) for a, p in ans.dist))
    return (1 - ans[0],)


# ---------------------------------------------------------------------------
# family: mis-structure  (multi-instance sequencing checks)
# ---------------------------------------------------------------------------

def check_mis_structure(trials: int = 600, seed: int = 42) -> list[CheckResult]:
    from .programs import Uniform

    out = []

    # with a classical-distribution answer, the challenger's projective
    # measurement accepts with exactly the classical Ver rate on every
    # (H, r): step 1(e)'s returned state changes nothing, and g=1 collapses
    # to single-game semantics
    game = games.owf_y_game(2, 2)
    prog = AdversaryProgram("super", (("ans", 2),), 0,
                            lambda ctx: [Uniform("ans")], ("ans",))
    worst = 0.0
    for ti, table in enumerate(TruthTable.all_tables(2, 2)):
        for r in game.randomness:
            t = arena.run_multi_instance(game, 1, prog, mode="exact", seed=seed,
                                         table=table, rs=[r],
                                         rng=arena.trial_rng(seed, ti))
            p_proj = t.rounds[0].tags["p_accept"]
            p_cls = sum(game.ver(table, r, (a,)) for a in range(2)) / 2.0
            worst = max(worst, abs(p_proj - p_cls))
    out.append(CheckResult("mis-structure",
                           "projective accept rate equals classical Ver rate "
                           "on every (H, r) for classical answer mixes",
                           worst <= 1e-12, f"worst gap {worst:.2e}"))

    # verification idempotence: re-verifying the post-measurement answer
    # state yields the same bit with certainty
    table = TruthTable(2, 2, (0, 1))
    rng = arena.trial_rng(seed, 99)
    session = OracleSession.create("exact", 2, 2, table=table)
    from .arena import _initial_run, challenger_verify_superposed
    run = _initial_run(game, prog, session, rng, None)
    run_steps(run, [Uniform("ans")])
    b1, _ = challenger_verify_superposed(run, game, 0, 0, ("ans",), rng=rng)
    b2, p_again = challenger_verify_superposed(run, game, 0, 0, ("ans",),
                                               rng=rng)
    idem = (b1 == b2) and abs(p_again - float(b1)) <= 1e-12
    out.append(CheckResult("mis-structure", "projective verification is idempotent",
                           idem, f"bits {b1},{b2}, second accept prob {p_again}"))

    # chain rule: per-round Grover vs owf_y, conditional round-2 success
    # within CI of round-1 success (independence across rounds)
    game8 = games.owf_y_game(8, 8)
    adv = advs.grover_for_challenge(8, 8, 1)
    transcripts = []
    for trial in range(trials):
        rng = arena.trial_rng(seed, trial)
        transcripts.append(arena.run_multi_instance(game8, 2, adv, mode="exact",
                                                    seed=seed, rng=rng))
    r1 = arena.conditional_round_success(transcripts, 1)
    r2 = arena.conditional_round_success(transcripts, 2, arena.given_prior_bits(1))
    overall = sum(t.win for t in transcripts) / len(transcripts)
    chain = r1.mean * r2.mean
    out.append(CheckResult("mis-structure",
                           "chain rule: round-1 x conditional round-2 = overall win; "
                           "conditional round-2 within CI of round-1",
                           r1.compatible(r2) and abs(chain - overall) <= 1e-9,
                           f"r1={r1.mean:.3f}, r2|b1={r2.mean:.3f}, overall={overall:.3f}"))

    # quarantined parallel multi-target Grover strictly beats the legal
    # sequential game on unique-preimage instances (exact values)
    table = TruthTable(8, 8, tuple(range(8)))
    seq = (7 / 8) * advs.sequential_game_win(table, [0, 1], 1) \
        + (1 / 8) * advs.sequential_game_win(table, [0, 0], 1)
    par = (7 / 8) * advs.multi_target_problem_win(table, [0, 1], 1) \
        + (1 / 8) * advs.multi_target_problem_win(table, [0, 0], 1)
    out.append(CheckResult("mis-structure",
                           "parallel multi-target Grover beats the sequential game "
                           "(g=2, N=8, T=1, exact)",
                           par > seq + 1e-9, f"parallel {par:.6f} > sequential {seq:.6f}"))
    return out


# ---------------------------------------------------------------------------
# family: hellman-spot  (soundness at desk scale; the regime check is heavier)
# ---------------------------------------------------------------------------

def check_hellman_spot(seed: int = 5) -> list[CheckResult]:
    out = []
    rng = _rng(seed)
    N = 256
    table = TruthTable.random(N, N, rng)
    ht = advs.hellman_build(table, N, N, 8, 8, 8, seed=seed)
    sound = True
    found_count = 0
    for _ in range(200):
        y = table(int(rng.integers(N)))
        got = advs.hellman_invert(ht, y, table)
        if got is not None:
            found_count += 1
            sound &= table(got) == y
    out.append(CheckResult("hellman-spot", "inversion never returns an unverified preimage",
                           sound, f"{found_count}/200 inverted"))
    # full dictionary at t=1 covers everything
    small = TruthTable.random(32, 32, rng)
    ht2 = advs.hellman_build(small, 32, 32, m=32, t=1, ell=1, seed=seed)
    all_found = all(advs.hellman_invert(ht2, small(x), small) is not None
                    for x in range(32))
    out.append(CheckResult("hellman-spot", "t=1, m=N dictionary inverts every image",
                           all_found))
    return out


# ---------------------------------------------------------------------------
# family: prgind-spot
# ---------------------------------------------------------------------------

def check_prgind_spot() -> list[CheckResult]:
    out = []
    for (N, M, q, qp) in ((4, 4, 0, 0), (4, 4, 1, 0), (4, 4, 1, 1), (9, 4, 1, 1)):
        adv, bound = advs.prgind_advantage(N, M, q, qp)
        out.append(CheckResult("prgind-spot",
                               f"image-vs-uniform advantage <= 2(sqrt q + q')/sqrt N "
                               f"(N={N}, M={M}, q={q}, q'={qp})",
                               adv <= bound + 1e-9, f"adv {adv:.6f} vs bound {bound:.4f}"))
    return out


# ---------------------------------------------------------------------------
# registry and runner
# ---------------------------------------------------------------------------

FAMILIES: dict[str, Callable[[], list[CheckResult]]] = {
    "qcore-props": check_qcore_props,
    "oracle-equiv": check_oracle_equivalence,
    "bounded-db": check_bounded_database,
    "lemma5": check_lemma5,
    "exact-values": check_exact_values,
    "grover": check_grover,
    "salted-tightness": check_salted_tightness,
    "reductions": lambda: check_advice_removal() + check_wrapper_gentleness(),
    "games-props": check_game_properties,
    "mis-structure": check_mis_structure,
    "hellman-spot": check_hellman_spot,
    "prgind-spot": check_prgind_spot,
}


def run_families(names: Sequence[str] | None = None, report=print) -> bool:
    all_ok = True
    chosen = list(FAMILIES) if not names else list(names)
    for name in chosen:
        if name not in FAMILIES:
            report(f"?? unknown family {name!r}; known: {', '.join(FAMILIES)}")
            return False
        t0 = time.time()
        for res in FAMILIES[name]():
            mark = "PASS" if res.passed else "FAIL"
            report(f"[{mark}] {res.family}: {res.name}"
                   + (f"  ({res.detail})" if res.detail else ""))
            all_ok &= res.passed
        report(f"       {name} done in {time.time() - t0:.1f}s")
    return all_ok
