"""Sparse pure-state simulator over named modular registers.

Every register holds a value in Z/n for its own alphabet size n, so a basis
label is a tuple of small integers and a composite basis state is a single
mixed-radix code.  States are stored as parallel numpy arrays (sorted codes,
complex amplitudes) because the states this lab cares about (compressed-oracle
databases, Grover iterates) are sparse in very large product spaces.

Conventions:

* all alphabets are 0-based residues 0..n-1 (the paper-facing [N] = {1..N}
  convention is handled at API boundaries by callers),
* the first register in a layout is the most significant digit, so ascending
  code order is lexicographic label order and runs are bit-reproducible,
* amplitudes below PRUNE_EPS are dropped after every operation; exact values
  in these experiments never live below that threshold.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse

PRUNE_EPS = 1e-14
DEFAULT_DIM_GUARD = 4096

_QFT_CACHE: dict[tuple[int, bool], np.ndarray] = {}


class QcoreError(Exception):
    pass


class UnknownRegisterError(QcoreError, KeyError):
    pass


class LayoutMismatchError(QcoreError, ValueError):
    pass


class DimensionGuardError(QcoreError, RuntimeError):
    """Raised when a dense operation would exceed the dimension guard.

    The guard defaults to 4096 basis states and can be raised by setting the
    QTSL_GUARD_OVERRIDE environment variable (memory cost grows quadratically
    for density-matrix work, linearly for purified oracles).
    """


def dim_guard_limit() -> int:
    override = os.environ.get("QTSL_GUARD_OVERRIDE", "")
    if override:
        return int(override)
    return DEFAULT_DIM_GUARD


def check_dim_guard(dim: int, what: str) -> None:
    limit = dim_guard_limit()
    if dim > limit:
        raise DimensionGuardError(
            f"{what} needs dimension {dim} > guard {limit} "
            "(set QTSL_GUARD_OVERRIDE to raise the guard)"
        )


@dataclass(frozen=True)
class Register:
    """A named register with alphabet size and a role tag.

    Roles are descriptive ("query_input", "query_output", "answer",
    "decision", "work", "oracle"); only "oracle" is load-bearing, marking
    registers owned by an oracle session rather than the adversary.
    """

    name: str
    size: int
    role: str = "work"

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"register {self.name!r} needs size >= 1, got {self.size}")


def _as_register(spec) -> Register:
    if isinstance(spec, Register):
        return spec
    if isinstance(spec, tuple):
        return Register(*spec)
    raise TypeError(f"cannot interpret {spec!r} as a register")


class RegisterLayout:
    """Ordered collection of registers defining a composite basis.

    The layout owns the mixed-radix encoding: ``code = sum(v_i * coef_i)``
    with the first register most significant.  Total dimension is the product
    of alphabet sizes.
    """

    __slots__ = ("registers", "_index", "sizes", "coefs", "dim")

    def __init__(self, registers: Sequence):
        regs = tuple(_as_register(r) for r in registers)
        if not regs:
            raise ValueError("layout needs at least one register")
        names = [r.name for r in regs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate register names in {names}")
        self.registers = regs
        self._index = {r.name: i for i, r in enumerate(regs)}
        self.sizes = np.array([r.size for r in regs], dtype=np.int64)
        coefs = np.ones(len(regs), dtype=np.int64)
        dim = 1
        for i in range(len(regs) - 1, -1, -1):
            coefs[i] = dim
            dim *= int(regs[i].size)
        if dim > 2**62:
            raise DimensionGuardError(f"layout dimension {dim} overflows the code space")
        self.coefs = coefs
        self.dim = dim

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, RegisterLayout) and self.registers == other.registers

    def __hash__(self):
        return hash(self.registers)

    def __repr__(self):
        inner = ", ".join(f"{r.name}:{r.size}" for r in self.registers)
        return f"RegisterLayout({inner})"

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.registers)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownRegisterError(f"no register named {name!r} in {self}") from None

    def size_of(self, name: str) -> int:
        return int(self.sizes[self.index(name)])

    def coef_of(self, name: str) -> int:
        return int(self.coefs[self.index(name)])

    def encode(self, label: Sequence[int]) -> int:
        if len(label) != len(self.registers):
            raise LayoutMismatchError(f"label {label} has wrong arity for {self}")
        code = 0
        for v, r, c in zip(label, self.registers, self.coefs):
            if not 0 <= v < r.size:
                raise ValueError(f"value {v} out of range for register {r.name}")
            code += int(v) * int(c)
        return code

    def decode(self, code: int) -> tuple[int, ...]:
        return tuple(int(code // c) % int(s) for c, s in zip(self.coefs, self.sizes))

    def column(self, codes: np.ndarray, name: str) -> np.ndarray:
        i = self.index(name)
        return (codes // self.coefs[i]) % self.sizes[i]

    def columns(self, codes: np.ndarray, names: Sequence[str]) -> list[np.ndarray]:
        return [self.column(codes, n) for n in names]

    def extended(self, extra: Sequence) -> "RegisterLayout":
        """New layout with registers appended at the least-significant end."""
        return RegisterLayout(list(self.registers) + [_as_register(r) for r in extra])

    def select(self, names: Sequence[str]) -> "RegisterLayout":
        return RegisterLayout([self.registers[self.index(n)] for n in names])


def _canonical(codes: np.ndarray, amps: np.ndarray, merge: bool = False):
    """Sort by code, optionally merge duplicates, prune dust."""
    order = np.argsort(codes, kind="stable")
    codes = codes[order]
    amps = amps[order]
    if merge and codes.size:
        uniq, inverse = np.unique(codes, return_inverse=True)
        if uniq.size != codes.size:
            merged = np.zeros(uniq.size, dtype=np.complex128)
            np.add.at(merged, inverse, amps)
            codes, amps = uniq, merged
    keep = np.abs(amps) > PRUNE_EPS
    return codes[keep], amps[keep]


class PureState:
    """Immutable sparse amplitude vector over a layout's basis.

    Operations return fresh states; instances are safe to share across
    parallel workers.
    """

    __slots__ = ("layout", "codes", "amps")

    def __init__(self, layout: RegisterLayout, codes: np.ndarray, amps: np.ndarray,
                 *, _trusted: bool = False):
        self.layout = layout
        if _trusted:
            self.codes, self.amps = codes, amps
        else:
            codes = np.asarray(codes, dtype=np.int64)
            amps = np.asarray(amps, dtype=np.complex128)
            self.codes, self.amps = _canonical(codes, amps, merge=True)

    @classmethod
    def basis(cls, layout: RegisterLayout, label=None, **values) -> "PureState":
        """Computational basis state; unspecified registers default to 0."""
        if label is None:
            label = [values.get(r.name, 0) for r in layout.registers]
        code = layout.encode(label)
        return cls(layout, np.array([code], dtype=np.int64),
                   np.array([1.0 + 0j]), _trusted=True)

    @classmethod
    def from_amplitudes(cls, layout: RegisterLayout, mapping) -> "PureState":
        codes = np.array([layout.encode(k) for k in mapping], dtype=np.int64)
        amps = np.array(list(mapping.values()), dtype=np.complex128)
        return cls(layout, codes, amps)

    def __len__(self) -> int:
        return int(self.codes.size)

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2))

    def check_normalized(self, tol: float = 1e-9) -> "PureState":
        if abs(self.norm2() - 1.0) > tol:
            raise QcoreError(f"state norm^2 = {self.norm2()} is not 1 within {tol}")
        return self

    def normalized(self) -> "PureState":
        n = math.sqrt(self.norm2())
        if n == 0:
            raise QcoreError("cannot normalize the zero state")
        return PureState(self.layout, self.codes, self.amps / n, _trusted=True)

    def items(self) -> Iterator[tuple[tuple[int, ...], complex]]:
        for code, amp in zip(self.codes, self.amps):
            yield self.layout.decode(int(code)), complex(amp)

    def amplitude(self, label) -> complex:
        code = self.layout.encode(label)
        i = np.searchsorted(self.codes, code)
        if i < self.codes.size and self.codes[i] == code:
            return complex(self.amps[i])
        return 0j

    def inner(self, other: "PureState") -> complex:
        """<self|other> via sorted-merge on codes."""
        if self.layout != other.layout:
            raise LayoutMismatchError("inner product needs matching layouts")
        if self.codes.size == 0 or other.codes.size == 0:
            return 0j
        idx = np.clip(np.searchsorted(self.codes, other.codes), 0, self.codes.size - 1)
        hit = self.codes[idx] == other.codes
        return complex(np.sum(np.conj(self.amps[idx[hit]]) * other.amps[hit]))


@dataclass(frozen=True)
class MeasurementRecord:
    """One branch of a projective measurement: outcome, Born probability,
    renormalized post-state."""

    outcome: tuple
    probability: float
    post_state: PureState


# ---------------------------------------------------------------------------
# register-local operations
# ---------------------------------------------------------------------------

def _value_table(fn: Callable, sizes: Sequence[int]) -> np.ndarray:
    """Tabulate fn over the full product of input alphabets (row-major)."""
    if not sizes:
        return np.array([fn()], dtype=np.int64)
    total = 1
    for s in sizes:
        total *= int(s)
    if total > 4_000_000:
        raise DimensionGuardError(f"classical-map table of size {total} is too large")
    grids = np.indices(tuple(int(s) for s in sizes)).reshape(len(sizes), -1)
    out = np.empty(total, dtype=np.int64)
    for j in range(total):
        out[j] = fn(*(int(g[j]) for g in grids))
    return out


def apply_classical(state: PureState, fn: Callable, in_regs, out_reg: str,
                    *, sign: int = 1, table: np.ndarray | None = None) -> PureState:
    """In-place modular addition of a classical function: |v, u> -> |v, u + f(v)>.

    ``fn`` takes one int per input register and must return a value that is
    reduced mod the output alphabet.  ``sign=-1`` subtracts (the inverse
    unitary).  A precomputed flat ``table`` (row-major over input alphabets)
    skips the tabulation step.
    """
    if isinstance(in_regs, str):
        in_regs = (in_regs,)
    layout = state.layout
    m = layout.size_of(out_reg)
    sizes = [layout.size_of(r) for r in in_regs]
    if table is None:
        table = _value_table(fn, sizes)
    if in_regs:
        flat = np.zeros(state.codes.size, dtype=np.int64)
        for r, s in zip(in_regs, sizes):
            flat = flat * s + layout.column(state.codes, r)
        add = table[flat]
    else:
        add = np.full(state.codes.size, int(table[0]), dtype=np.int64)
    coef = layout.coef_of(out_reg)
    old = layout.column(state.codes, out_reg)
    new = (old + sign * add) % m
    codes = state.codes + (new - old) * coef
    codes, amps = _canonical(codes, state.amps.copy())
    return PureState(layout, codes, amps, _trusted=True)


def apply_phase(state: PureState, fn: Callable, regs) -> PureState:
    """Diagonal unitary: multiply each component by fn(values), |fn| = 1."""
    if isinstance(regs, str):
        regs = (regs,)
    layout = state.layout
    sizes = [layout.size_of(r) for r in regs]
    total = 1
    for s in sizes:
        total *= s
    if total > 4_000_000:
        raise DimensionGuardError(f"phase table of size {total} is too large")
    grids = np.indices(tuple(sizes)).reshape(len(sizes), -1)
    table = np.array([fn(*(int(g[j]) for g in grids)) for j in range(total)],
                     dtype=np.complex128)
    flat = np.zeros(state.codes.size, dtype=np.int64)
    for r, s in zip(regs, sizes):
        flat = flat * s + layout.column(state.codes, r)
    return PureState(state.layout, state.codes, state.amps * table[flat], _trusted=True)


def _register_unitary_raw(layout: RegisterLayout, codes: np.ndarray, amps: np.ndarray,
                          regs: tuple[str, ...], matrix: np.ndarray):
    """Core of a register-local dense unitary: group components by every
    other register's value, hit each group vector with the matrix, and
    return unsorted (codes, amps) arrays with dust pruned."""
    sizes = [layout.size_of(r) for r in regs]
    coefs = [layout.coef_of(r) for r in regs]
    d = matrix.shape[0]
    sub = np.zeros(codes.size, dtype=np.int64)
    rest = codes.copy()
    for r, s, c in zip(regs, sizes, coefs):
        col = (codes // c) % s
        sub = sub * s + col
        rest -= col * c
    rest_unique, inverse = np.unique(rest, return_inverse=True)
    block = np.zeros((rest_unique.size, d), dtype=np.complex128)
    block[inverse, sub] = amps
    block = block @ matrix.T

    rows, cols = np.nonzero(np.abs(block) > PRUNE_EPS)
    offsets = np.zeros(d, dtype=np.int64)
    tmp = np.arange(d, dtype=np.int64)
    for s, c in zip(reversed(sizes), reversed(coefs)):
        offsets += (tmp % s) * c
        tmp //= s
    return rest_unique[rows] + offsets[cols], block[rows, cols]


def apply_register_unitary(state: PureState, regs, matrix: np.ndarray) -> PureState:
    """Dense unitary on one register or a tuple of registers."""
    if isinstance(regs, str):
        regs = (regs,)
    layout = state.layout
    d = 1
    for r in regs:
        d *= layout.size_of(r)
    check_dim_guard(d, f"dense unitary on {regs}")
    matrix = np.asarray(matrix, dtype=np.complex128)
    if matrix.shape != (d, d):
        raise ValueError(f"matrix shape {matrix.shape} does not match subspace dim {d}")
    codes, amps = _register_unitary_raw(layout, state.codes, state.amps,
                                        tuple(regs), matrix)
    codes, amps = _canonical(codes, amps)
    return PureState(layout, codes, amps, _trusted=True)


def qft_matrix(n: int, inverse: bool = False) -> np.ndarray:
    """DFT matrix y_k = (1/sqrt(n)) sum_j w_n^{jk} x_j with w_n = e^{2 pi i/n}."""
    key = (n, inverse)
    if key not in _QFT_CACHE:
        j = np.arange(n)
        w = np.exp((2j if not inverse else -2j) * np.pi / n)
        _QFT_CACHE[key] = (w ** np.outer(j, j)) / math.sqrt(n)
    return _QFT_CACHE[key]


def qft(state: PureState, reg: str, inverse: bool = False) -> PureState:
    n = state.layout.size_of(reg)
    if n == 1:
        return state
    return apply_register_unitary(state, reg, qft_matrix(n, inverse))


# ---------------------------------------------------------------------------
# measurement
# ---------------------------------------------------------------------------

def measure(state: PureState, partition: Callable[[tuple], object] | None = None,
            regs: Sequence[str] | str | None = None) -> list[MeasurementRecord]:
    """Projective measurement along a label partition.

    Either ``regs`` (measure those registers in the computational basis,
    outcome = tuple of their values) or a ``partition`` callable mapping a
    full basis label to an outcome id.  Branches come back sorted by outcome
    for deterministic downstream sampling.
    """
    if state.codes.size == 0:
        raise QcoreError("cannot measure the empty state")
    layout = state.layout
    records = []
    if regs is not None:
        if isinstance(regs, str):
            regs = (regs,)
        sizes = [layout.size_of(r) for r in regs]
        sub = np.zeros(state.codes.size, dtype=np.int64)
        for r, s in zip(regs, sizes):
            sub = sub * s + layout.column(state.codes, r)
        order = np.argsort(sub, kind="stable")
        sub_sorted = sub[order]
        starts = np.flatnonzero(np.r_[True, np.diff(sub_sorted) != 0])
        bounds = np.r_[starts, sub_sorted.size]
        for a, b in zip(bounds[:-1], bounds[1:]):
            idx = order[a:b]
            amps = state.amps[idx]
            p = float(np.sum(np.abs(amps) ** 2))
            # decode the outcome subcode back into per-register values
            out, c = [], int(sub_sorted[a])
            for s in reversed(sizes):
                out.append(c % s)
                c //= s
            # stable sort keeps within-group codes ascending
            post = PureState(layout, state.codes[idx], amps / math.sqrt(p),
                             _trusted=True)
            records.append(MeasurementRecord(tuple(reversed(out)), p, post))
    elif partition is not None:
        keys = [partition(layout.decode(int(c))) for c in state.codes]
        buckets: dict = {}
        for i, k in enumerate(keys):
            buckets.setdefault(k, []).append(i)
        for outcome in sorted(buckets):
            idx = np.array(buckets[outcome], dtype=np.intp)
            amps = state.amps[idx]
            p = float(np.sum(np.abs(amps) ** 2))
            post = PureState(layout, state.codes[idx], amps / math.sqrt(p),
                             _trusted=True)
            out = outcome if isinstance(outcome, tuple) else (outcome,)
            records.append(MeasurementRecord(out, p, post))
    else:
        raise ValueError("measure needs a partition or register list")
    total = sum(r.probability for r in records)
    if abs(total - 1.0) > 1e-9:
        raise QcoreError(f"measurement branch probabilities sum to {total}")
    return records


def collapse(state: PureState, regs, value) -> tuple[float, PureState]:
    """Probability of reading ``value`` on ``regs`` and the collapsed state.

    Zero-probability branches raise; selecting on an outcome that cannot
    occur is a caller bug, mirroring the non-zero-probability conditioning
    assumption used throughout the compressed-oracle lemmas.
    """
    if isinstance(regs, str):
        regs = (regs,)
        value = (value,)
    layout = state.layout
    mask = np.ones(state.codes.size, dtype=bool)
    for r, v in zip(regs, value):
        mask &= layout.column(state.codes, r) == v
    amps = state.amps[mask]
    p = float(np.sum(np.abs(amps) ** 2))
    if p <= 1e-15:
        raise ZeroSupportError(f"conditioning on zero-probability branch {regs}={value}")
    post = PureState(layout, state.codes[mask], amps / math.sqrt(p), _trusted=True)
    return p, post


class ZeroSupportError(QcoreError):
    pass


# ---------------------------------------------------------------------------
# distances and density-matrix utilities
# ---------------------------------------------------------------------------

def trace_distance_pure(a: PureState, b: PureState) -> float:
    """Trace distance of two pure states: sqrt(1 - |<a|b>|^2)."""
    if a.layout != b.layout:
        raise LayoutMismatchError("trace_distance_pure needs matching layouts")
    ov = abs(a.inner(b))
    return math.sqrt(max(0.0, 1.0 - min(ov, 1.0) ** 2))


def l2_distance(a: PureState, b: PureState) -> float:
    """Amplitude-vector L2 distance (no square-root degeneracy near zero,
    unlike the trace distance, so it suits exact-identity assertions)."""
    if a.layout != b.layout:
        raise LayoutMismatchError("l2_distance needs matching layouts")
    codes = np.union1d(a.codes, b.codes)

    def dense(st):
        v = np.zeros(codes.size, dtype=np.complex128)
        v[np.searchsorted(codes, st.codes)] = st.amps
        return v

    return float(np.linalg.norm(dense(a) - dense(b)))


def equal_up_to_phase(a: PureState, b: PureState, tol: float = 1e-9) -> bool:
    return abs(a.inner(b)) >= 1.0 - tol


def reduced_density(members: Iterable[tuple[float, PureState]],
                    keep_regs: Sequence[str]) -> np.ndarray:
    """Density matrix of a weighted pure-state ensemble, traced down to
    ``keep_regs``.

    Per member the state is viewed as a (kept x rest) sparse matrix Psi so the
    partial trace is Psi Psi^dagger; scipy.sparse carries the heavy cases
    (compressed-oracle databases in the traced-out part).
    """
    members = list(members)
    if not members:
        raise ValueError("empty ensemble")
    layout = members[0][1].layout
    if isinstance(keep_regs, str):
        keep_regs = (keep_regs,)
    sizes = [layout.size_of(r) for r in keep_regs]
    d = 1
    for s in sizes:
        d *= s
    check_dim_guard(d, f"reduced density on {tuple(keep_regs)}")
    rho = np.zeros((d, d), dtype=np.complex128)
    for weight, st in members:
        if st.layout != layout:
            raise LayoutMismatchError("ensemble members need a common layout")
        keep = np.zeros(st.codes.size, dtype=np.int64)
        rest = st.codes.copy()
        for r, s in zip(keep_regs, sizes):
            col = layout.column(st.codes, r)
            keep = keep * s + col
            rest -= col * layout.coef_of(r)
        rest_unique, rest_idx = np.unique(rest, return_inverse=True)
        psi = scipy.sparse.coo_matrix(
            (st.amps, (keep, rest_idx)), shape=(d, rest_unique.size)
        ).tocsr()
        rho += weight * (psi @ psi.getH()).toarray()
    return rho


def trace_distance_density(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(1/2) * trace norm of rho - sigma via Hermitian eigenvalues."""
    diff = rho - sigma
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def trace_distance_mixed(ensemble_a: Iterable[tuple[float, PureState]],
                         ensemble_b: Iterable[tuple[float, PureState]]) -> float:
    """Exact trace distance of two explicitly mixed states on a common layout.

    Weights must be nonnegative and sum to 1 per ensemble.  The full layout
    dimension is subject to the dimension guard since the difference matrix
    is eigendecomposed densely.
    """
    ensemble_a = list(ensemble_a)
    ensemble_b = list(ensemble_b)
    for ens in (ensemble_a, ensemble_b):
        w = [x[0] for x in ens]
        if any(x < -1e-12 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError("ensemble weights must be nonnegative and sum to 1")
    layout = ensemble_a[0][1].layout
    if ensemble_b[0][1].layout != layout:
        raise LayoutMismatchError("ensembles need a common layout")
    names = layout.names
    rho = reduced_density(ensemble_a, names)
    sigma = reduced_density(ensemble_b, names)
    return trace_distance_density(rho, sigma)


# ---------------------------------------------------------------------------
# state construction helpers
# ---------------------------------------------------------------------------

def tensor(a: PureState, b: PureState) -> PureState:
    """Product state over the concatenated layout (b appended as low digits)."""
    layout = a.layout.extended(b.layout.registers)
    codes = (a.codes[:, None] * b.layout.dim + b.codes[None, :]).ravel()
    amps = (a.amps[:, None] * b.amps[None, :]).ravel()
    codes, amps = _canonical(codes, amps)
    return PureState(layout, codes, amps, _trusted=True)


def extend_state(state: PureState, extra: Sequence, fill: dict | None = None) -> PureState:
    """Append fresh registers (initialized to basis values, default 0)."""
    layout = state.layout.extended(extra)
    fill = fill or {}
    offset = 0
    scale = 1
    for r in reversed([_as_register(x) for x in extra]):
        offset += fill.get(r.name, 0) * scale
        scale *= r.size
    codes = state.codes * scale + offset
    return PureState(layout, codes, state.amps.copy(), _trusted=True)


def uniform_state(layout: RegisterLayout, reg: str, base: PureState | None = None) -> PureState:
    """Uniform superposition on one register of a basis state."""
    st = base if base is not None else PureState.basis(layout)
    return qft(st, reg)
