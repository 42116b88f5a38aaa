"""I.i.d. insertion/deletion/substitution channel.

The channel reads the input as a queue.  While symbol ``x_i`` is at the head
of the queue the channel either inserts a uniform random symbol and stays
(``p_ins``), deletes ``x_i`` (``p_del``) or transmits it (``p_trans``), where
a transmitted symbol is replaced by a uniformly chosen different symbol with
probability ``p_sub``.  Insertions are unbounded here; only decoders cap them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .seeding import TAG_READ, derive

DNA_ALPHABET = "ACGT"

DELETE, CLEAN, SUBSTITUTE = 0, 1, 2


class ChannelParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelParams:
    p_ins: float = 0.0
    p_del: float = 0.0
    p_sub: float = 0.0
    q: int = 4

    def __post_init__(self):
        if not (self.p_ins >= 0 and self.p_del >= 0):
            raise ChannelParameterError("p_ins and p_del must be non-negative")
        if not 0 <= self.p_sub <= 1:
            raise ChannelParameterError("p_sub must lie in [0, 1]")
        if int(self.q) != self.q or self.q < 2:
            raise ChannelParameterError("alphabet size q must be an integer >= 2")
        all_delete = self.p_del == 1 and self.p_ins == 0
        if not (self.p_ins + self.p_del < 1 or all_delete):
            raise ChannelParameterError("need p_ins + p_del < 1 (or p_del = 1, p_ins = 0)")

    @property
    def p_trans(self) -> float:
        return 1.0 - self.p_ins - self.p_del

    @classmethod
    def symmetric(cls, p: float, p_sub: float = 0.0, q: int = 4) -> "ChannelParams":
        """Channel with ``p_ins = p_del = p``, the setting swept in the experiments."""
        return cls(p_ins=p, p_del=p, p_sub=p_sub, q=q)

    @property
    def noiseless(self) -> bool:
        return self.p_ins == 0 and self.p_del == 0 and self.p_sub == 0


@dataclass(frozen=True)
class EventTrace:
    """Per-input-symbol record of what the channel did.

    ``insertions[i]`` symbols (taken in order from ``inserted``) are emitted
    while ``x_i`` waits in the queue, after which ``fate[i]`` says whether it
    was deleted, transmitted cleanly or substituted by ``emitted[i]``.
    """

    insertions: np.ndarray
    inserted: np.ndarray
    fate: np.ndarray
    emitted: np.ndarray
    _offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        offsets = np.concatenate(([0], np.cumsum(self.insertions)))
        object.__setattr__(self, "_offsets", offsets)

    def __len__(self):
        return len(self.fate)

    @property
    def symbol_drift(self) -> np.ndarray:
        """Insertions minus deletions seen before each symbol is enqueued.

        Entry ``i`` (``0 <= i <= N``) is the drift once ``x_1..x_i`` have left
        the queue; the last entry equals ``N' - N``.
        """
        step = self.insertions - (self.fate == DELETE)
        return np.concatenate(([0], np.cumsum(step))).astype(np.int64)

    def events(self):
        """Yield ``("ins", a)``, ``("del",)``, ``("tx", a)`` or ``("sub", a)`` in channel order."""
        for i in range(len(self.fate)):
            for a in self.inserted[self._offsets[i]:self._offsets[i + 1]]:
                yield ("ins", int(a))
            if self.fate[i] == DELETE:
                yield ("del",)
            elif self.fate[i] == CLEAN:
                yield ("tx", int(self.emitted[i]))
            else:
                yield ("sub", int(self.emitted[i]))

    def replay(self, x) -> np.ndarray:
        """Apply the trace to ``x`` and return the channel output."""
        x = np.asarray(x)
        if len(x) != len(self.fate):
            raise ValueError("trace length does not match input length")
        out = []
        it = iter(self.events())
        for xi in x:
            while True:
                ev = next(it)
                if ev[0] == "ins":
                    out.append(ev[1])
                    continue
                if ev[0] == "tx":
                    if ev[1] != xi:
                        raise ValueError("clean transmission does not match input symbol")
                    out.append(int(xi))
                elif ev[0] == "sub":
                    if ev[1] == xi:
                        raise ValueError("substitution reproduces the input symbol")
                    out.append(ev[1])
                break
        return np.asarray(out, dtype=np.int64)


@dataclass(frozen=True)
class ReadSet:
    reads: list
    traces: list

    def __post_init__(self):
        if len(self.reads) < 1:
            raise ChannelParameterError("a read set needs at least one read")

    @property
    def M(self) -> int:
        return len(self.reads)


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return derive(seed)


def transmit(x, params: ChannelParams, seed) -> tuple[np.ndarray, EventTrace]:
    """Pass ``x`` once through the channel; returns ``(y, trace)``."""
    if not isinstance(params, ChannelParams):
        raise ChannelParameterError("params must be a ChannelParams instance")
    x = np.asarray(x, dtype=np.int64)
    if x.ndim != 1:
        raise ValueError("x must be one-dimensional")
    if len(x) and (x.min() < 0 or x.max() >= params.q):
        raise ValueError("input symbol outside the channel alphabet")
    rng = _as_generator(seed)
    N, q = len(x), params.q

    if params.p_ins > 0:
        n_ins = rng.geometric(1.0 - params.p_ins, size=N) - 1
    else:
        n_ins = np.zeros(N, dtype=np.int64)
    # Given that the state did not insert, delete vs transmit.
    p_del_cond = params.p_del / (1.0 - params.p_ins)
    deleted = rng.random(N) < p_del_cond
    substituted = (rng.random(N) < params.p_sub) & ~deleted
    shift = rng.integers(1, q, size=N)
    inserted = rng.integers(0, q, size=int(n_ins.sum()))

    fate = np.where(deleted, DELETE, np.where(substituted, SUBSTITUTE, CLEAN)).astype(np.int8)
    emitted = np.where(substituted, (x + shift) % q, x)
    emitted = np.where(deleted, -1, emitted)

    keep = (~deleted).astype(np.int64)
    per_symbol = n_ins + keep
    starts = np.concatenate(([0], np.cumsum(per_symbol)[:-1])) if N else np.zeros(0, np.int64)
    y = np.empty(int(per_symbol.sum()), dtype=np.int64)
    if len(inserted):
        first_ins = np.concatenate(([0], np.cumsum(n_ins)[:-1]))
        rank = np.arange(len(inserted)) - np.repeat(first_ins, n_ins)
        y[np.repeat(starts, n_ins) + rank] = inserted
    kept = ~deleted
    y[(starts + n_ins)[kept]] = emitted[kept]

    trace = EventTrace(
        insertions=n_ins.astype(np.int64),
        inserted=inserted.astype(np.int64),
        fate=fate,
        emitted=emitted.astype(np.int64),
    )
    return y, trace


def read_seed(seed, j: int) -> int:
    """Integer sub-seed used for read ``j`` of a multi-read transmission."""
    return int(np.random.SeedSequence([int(seed), TAG_READ, int(j)]).generate_state(1, np.uint64)[0])


def transmit_multi(x, params: ChannelParams, M: int, seed) -> ReadSet:
    if M < 1:
        raise ChannelParameterError("number of reads M must be >= 1")
    outs = [transmit(x, params, read_seed(seed, j)) for j in range(M)]
    return ReadSet(reads=[y for y, _ in outs], traces=[t for _, t in outs])


def block_drift(trace: EventTrace, n: int) -> np.ndarray:
    """Drift sampled at block boundaries, ``(d_0, d_1, ..., d_{N/n})``."""
    if n < 1 or len(trace) % n:
        raise ValueError("block length must be >= 1 and divide the sequence length")
    return trace.symbol_drift[::n].copy()


def drift_std(N: int, p_del: float) -> float:
    """Standard deviation of the final drift, ``sqrt(N p_del / (1 - p_del))``."""
    if not 0 <= p_del < 1:
        raise ChannelParameterError("drift_std needs 0 <= p_del < 1")
    return math.sqrt(N * p_del / (1.0 - p_del))


def to_dna(symbols) -> str:
    return "".join(DNA_ALPHABET[int(s)] for s in symbols)


def from_dna(text: str) -> np.ndarray:
    try:
        return np.array([DNA_ALPHABET.index(c) for c in text.strip().upper()], dtype=np.int64)
    except ValueError:
        raise ValueError(f"not a DNA string: {text!r}") from None
