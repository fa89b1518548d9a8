"""Security games as challenger triples (Samp, Query, Ver).

A game is deterministic given the oracle and an explicit randomness value r
drawn from a finite set R, which is what makes exact enumeration over
challenges possible.  Oracle access inside samp/query/ver goes through a
callable so the arena can count accesses (t_ver honesty) and so the same
game definition drives classical tables and purified oracles alike.

Answers are always tuples over the declared answer alphabets.  Decision
games answer a single bit; the collision game answers a pair of domain
points.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence


@dataclass(frozen=True)
class VerQuery:
    """One oracle access inside a verification circuit.

    ``point_fn(ans, fetched)`` maps the answer tuple and previously fetched
    values to the domain point to query; it runs in superposition over the
    answer register when the challenger verifies a submitted quantum state.
    """

    point_fn: Callable


@dataclass(frozen=True)
class VerCircuit:
    """Ver as a bounded-query circuit: fetch values, then decide."""

    queries: tuple[VerQuery, ...]
    predicate: Callable  # (ans, fetched) -> 0/1


@dataclass(frozen=True)
class GameSpec:
    """A challenger triple plus flags.

    ``N`` is the oracle domain size as the oracle sees it (salting enlarges
    it to K * inner N), ``M`` the range size.  ``randomness`` is the explicit
    challenger randomness set R.  ``quantum_mask(r)`` describes the
    adversary's online oracle when it differs from the raw oracle at a single
    point: a (point, constant) pair meaning queries there add the constant
    instead of H(point).
    """

    name: str
    N: int
    M: int
    randomness: tuple
    samp: Callable
    query: Callable
    ver: Callable
    answer_sizes: tuple[int, ...]
    K: int = 1
    is_decision: bool = False
    publicly_verifiable: bool = False
    t_ver: int = 0
    ver_circuit: Callable | None = None
    quantum_mask: Callable | None = None
    metadata: dict = field(default_factory=dict)

    def describe(self) -> str:
        flags = []
        if self.is_decision:
            flags.append("decision")
        if self.publicly_verifiable:
            flags.append(f"publicly-verifiable(t_ver={self.t_ver})")
        return f"{self.name}(N={self.N}, M={self.M}, K={self.K}) {' '.join(flags)}"


def owf_game(N: int, M: int) -> GameSpec:
    """Invert a random image: challenge H(x) for uniform x, win on any
    preimage of it."""
    if N < 1 or M < 1:
        raise ValueError("need N, M >= 1")

    def samp(oracle, r):
        return oracle(r)

    def query(oracle, r, x):
        return oracle(x)

    def ver(oracle, r, ans):
        return int(oracle(ans[0]) == oracle(r))

    def ver_circuit(r, ch):
        return VerCircuit(
            queries=(VerQuery(lambda ans, fetched: ans[0]),),
            predicate=lambda ans, fetched: int(fetched[0] == ch),
        )

    return GameSpec("owf", N, M, tuple(range(N)), samp, query, ver, (N,),
                    publicly_verifiable=True, t_ver=2, ver_circuit=ver_circuit)


def owf_y_game(N: int, M: int) -> GameSpec:
    """Invert a uniform range element (which may have no preimage at all)."""
    if N < 1 or M < 1:
        raise ValueError("need N, M >= 1")

    def samp(oracle, r):
        return r

    def query(oracle, r, x):
        return oracle(x)

    def ver(oracle, r, ans):
        return int(oracle(ans[0]) == r)

    def ver_circuit(r, ch):
        return VerCircuit(
            queries=(VerQuery(lambda ans, fetched: ans[0]),),
            predicate=lambda ans, fetched: int(fetched[0] == ch),
        )

    return GameSpec("owf_y", N, M, tuple(range(M)), samp, query, ver, (N,),
                    publicly_verifiable=True, t_ver=1, ver_circuit=ver_circuit)


def prg_game(N: int, M: int) -> GameSpec:
    """Distinguish a random image H(x) from a uniform range element.

    The definition wants N < M (expansion); N = M is admitted for testing
    with a warning and a metadata flag.
    """
    if N > M:
        raise ValueError("prg game needs N <= M")
    meta = {}
    if N == M:
        warnings.warn("prg game with N = M relaxes the N < M definition", stacklevel=2)
        meta["relaxed_n_equals_m"] = True

    randomness = tuple((b, x, y) for b in (0, 1) for x in range(N) for y in range(M))

    def samp(oracle, r):
        b, x, y = r
        return oracle(x) if b == 0 else y

    def query(oracle, r, x):
        return oracle(x)

    def ver(oracle, r, ans):
        return int(ans[0] == r[0])

    return GameSpec("prg", N, M, randomness, samp, query, ver, (2,),
                    is_decision=True, metadata=meta)


def yaobox_game(N: int) -> GameSpec:
    """Predict H(x) for a random x without querying it.

    The online oracle answers the constant 1 at the challenge point, exactly
    as defined, rather than refusing the query.
    """
    if N < 1:
        raise ValueError("need N >= 1")

    def samp(oracle, r):
        return r

    def query(oracle, r, x):
        return 1 if x == r else oracle(x)

    def ver(oracle, r, ans):
        return int(ans[0] == oracle(r))

    return GameSpec("yaobox", N, 2, tuple(range(N)), samp, query, ver, (2,),
                    is_decision=True, quantum_mask=lambda r: (r, 1))


def crh_game(N: int, M: int) -> GameSpec:
    """Find a colliding pair: win on x1 != x2 with H(x1) = H(x2)."""
    if N < 2:
        raise ValueError("collision game needs N >= 2")

    def samp(oracle, r):
        return None

    def query(oracle, r, x):
        return oracle(x)

    def ver(oracle, r, ans):
        x1, x2 = ans
        return int(x1 != x2 and oracle(x1) == oracle(x2))

    def ver_circuit(r, ch):
        return VerCircuit(
            queries=(VerQuery(lambda ans, fetched: ans[0]),
                     VerQuery(lambda ans, fetched: ans[1])),
            predicate=lambda ans, fetched: int(ans[0] != ans[1]
                                               and fetched[0] == fetched[1]),
        )

    return GameSpec("crh", N, M, (None,), samp, query, ver, (N, N),
                    publicly_verifiable=True, t_ver=2, ver_circuit=ver_circuit)


def prediction_game(M: int) -> GameSpec:
    """Predict H(1) with a blind online oracle (N = 1, queries reveal
    nothing).  Security without advice is exactly 1/M."""
    if M < 1:
        raise ValueError("need M >= 1")

    def samp(oracle, r):
        return None

    def query(oracle, r, x):
        return None

    def ver(oracle, r, ans):
        return int(ans[0] == oracle(0))

    return GameSpec("predict", 1, M, (None,), samp, query, ver, (M,),
                    quantum_mask=lambda r: (0, 0))


def salt_wrap(inner: GameSpec, K: int) -> GameSpec:
    """Salted version of a game: the oracle domain becomes [K] x [N], a salt
    is drawn per challenge, the inner game plays on the salt's slice, and
    off-salt queries hit the raw oracle."""
    if K < 1:
        raise ValueError("need K >= 1")
    n_inner = inner.N

    def slice_oracle(oracle, s):
        return lambda x: oracle(s * n_inner + x)

    randomness = tuple((s, r) for s in range(K) for r in inner.randomness)

    def samp(oracle, sr):
        s, r = sr
        return (s, inner.samp(slice_oracle(oracle, s), r))

    def query(oracle, sr, p):
        s, r = sr
        s_prime, x = divmod(p, n_inner)
        if s_prime == s:
            return inner.query(slice_oracle(oracle, s), r, x)
        return oracle(p)

    def ver(oracle, sr, ans):
        s, r = sr
        return inner.ver(slice_oracle(oracle, s), r, ans)

    ver_circuit = None
    if inner.ver_circuit is not None:
        def ver_circuit(sr, ch):
            s, r = sr
            circ = inner.ver_circuit(r, ch[1])
            queries = tuple(
                VerQuery(lambda ans, fetched, _f=vq.point_fn, _s=s:
                         _s * n_inner + _f(ans, fetched))
                for vq in circ.queries)
            return VerCircuit(queries, circ.predicate)

    quantum_mask = None
    if inner.quantum_mask is not None:
        def quantum_mask(sr):
            s, r = sr
            m = inner.quantum_mask(r)
            if m is None:
                return None
            return (s * n_inner + m[0], m[1])

    return GameSpec(f"salted:{inner.name}", K * n_inner, inner.M, randomness,
                    samp, query, ver, inner.answer_sizes, K=K,
                    is_decision=inner.is_decision,
                    publicly_verifiable=inner.publicly_verifiable,
                    t_ver=inner.t_ver, ver_circuit=ver_circuit,
                    quantum_mask=quantum_mask,
                    metadata={"inner": inner.name, "inner_N": n_inner,
                              **inner.metadata})


def make_game(name: str, **params) -> GameSpec:
    """Game factory keyed by CLI names (salted:<inner> wraps recursively)."""
    if name.startswith("salted:"):
        k = params.pop("K")
        return salt_wrap(make_game(name[len("salted:"):], **params), k)
    builders: dict[str, Callable] = {
        "owf": lambda: owf_game(params["N"], params["M"]),
        "owf_y": lambda: owf_y_game(params["N"], params["M"]),
        "prg": lambda: prg_game(params["N"], params["M"]),
        "yaobox": lambda: yaobox_game(params["N"]),
        "crh": lambda: crh_game(params["N"], params["M"]),
        "predict": lambda: prediction_game(params["M"]),
    }
    if name not in builders:
        raise KeyError(f"unknown game {name!r}; known: {sorted(builders)} or salted:<inner>")
    return builders[name]()
