"""Inner synchronization codes: watermark, time-varying block codes and the
rate-1 quaternary convolutional code, with an optional pseudo-random offset.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import DNA_ALPHABET
from .seeding import TAG_OFFSET, TAG_PATTERN, derive

KINDS = ("cc", "wm", "tvc1", "tvc2")

# Schemes carrying the random offset sequence by default.
_DEFAULT_OFFSET = {"cc": True, "wm": True, "tvc1": False, "tvc2": True}


class CodebookError(ValueError):
    pass


@dataclass(frozen=True)
class Codebook:
    id: int
    words: np.ndarray  # (2**k, n)
    q: int = 4

    def __post_init__(self):
        words = np.asarray(self.words, dtype=np.int64)
        if words.ndim != 2:
            raise CodebookError(f"codebook {self.id}: words must form a 2-D array")
        size = words.shape[0]
        if size < 2 or size & (size - 1):
            raise CodebookError(f"codebook {self.id}: size {size} is not a power of two >= 2")
        if words.min() < 0 or words.max() >= self.q:
            raise CodebookError(f"codebook {self.id}: symbol outside alphabet of size {self.q}")
        if len({tuple(w) for w in words}) != size:
            raise CodebookError(f"codebook {self.id}: duplicate entries")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    @property
    def n(self) -> int:
        return self.words.shape[1]

    @property
    def k(self) -> int:
        return int(self.words.shape[0]).bit_length() - 1


def levenshtein(a, b) -> int:
    """Edit distance with unit-cost insertions, deletions and substitutions."""
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def indel_distance(a, b) -> int:
    """Edit distance when only insertions and deletions are allowed."""
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0]
        for j, cb in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if ca == cb else max(prev[j], cur[j - 1]))
        prev = cur
    return len(a) + len(b) - 2 * prev[-1]


_METRICS = {"edit": levenshtein, "indel": indel_distance}


def codebook_min_levenshtein(cb, metric: str = "edit") -> int:
    """Minimum pairwise distance between the words of ``cb``.

    ``metric="edit"`` is the usual Levenshtein distance; ``metric="indel"``
    counts a substitution as a deletion plus an insertion.
    """
    words = cb.words if isinstance(cb, Codebook) else cb
    words = [tuple(int(s) for s in w) for w in words]
    if len(words) < 2:
        raise CodebookError("need at least two codewords")
    dist = _METRICS[metric]
    return min(dist(a, b) for a, b in itertools.combinations(words, 2))


# --------------------------------------------------------------------------
# codebook files


def parse_codebooks(text: str, q: int = 4) -> list[Codebook]:
    books, current, header = [], None, None

    def close():
        if current is None:
            return
        cid, n, k = header
        if len(current) != 2**k:
            raise CodebookError(f"codebook {cid}: expected {2**k} entries, got {len(current)}")
        words = np.zeros((2**k, n), dtype=np.int64)
        seen = set()
        for label, word in current:
            if label in seen or not 0 <= label < 2**k:
                raise CodebookError(f"codebook {cid}: bad or repeated label {label}")
            if len(word) != n:
                raise CodebookError(f"codebook {cid}: word for label {label} has length {len(word)} != {n}")
            seen.add(label)
            words[label] = word
        books.append(Codebook(cid, words, q))

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "codebook":
            close()
            try:
                opts = dict(p.split("=", 1) for p in parts[2:])
                header = (int(parts[1]), int(opts["n"]), int(opts["k"]))
            except (IndexError, KeyError, ValueError):
                raise CodebookError(f"line {lineno}: malformed header {raw!r}") from None
            current = []
            continue
        if current is None or len(parts) != 2:
            raise CodebookError(f"line {lineno}: expected '<label> <word>' inside a codebook block")
        try:
            label = int(parts[0])
            word = [DNA_ALPHABET.index(c) if c in DNA_ALPHABET else int(c) for c in parts[1].upper()]
        except ValueError:
            raise CodebookError(f"line {lineno}: cannot parse entry {raw!r}") from None
        current.append((label, word))
    close()
    if not books:
        raise CodebookError("no codebooks found")
    return books


def load_codebooks(path=None, q: int = 4) -> list[Codebook]:
    """Read a codebook file; ``None`` loads the bundled fallback set."""
    if path is None:
        text = resources.files("dnabound.data").joinpath("codebooks.cb").read_text()
    else:
        text = Path(path).read_text()
    return parse_codebooks(text, q)


def format_codebooks(books) -> str:
    lines = []
    for cb in books:
        lines.append(f"codebook {cb.id} n={cb.n} k={cb.k}")
        for label, word in enumerate(cb.words):
            lines.append(f"{label} {''.join(DNA_ALPHABET[s] for s in word)}")
    return "\n".join(lines) + "\n"


def greedy_codebooks(t=4, n=4, k=4, q=4, min_indel=4, seed=2022, tries=1000) -> list[Codebook]:
    """Seeded greedy construction of ``t`` distinct codebooks.

    Words are scanned in a random order and kept when their insertion/deletion
    distance to every kept word is at least ``min_indel``.  Labels follow the
    lexicographic order of the kept words.
    """
    universe = list(itertools.product(range(q), repeat=n))
    rng = np.random.default_rng(seed)
    books, used = [], set()
    for _ in range(tries):
        order = rng.permutation(len(universe))
        kept = []
        for idx in order:
            w = universe[idx]
            if all(indel_distance(w, c) >= min_indel for c in kept):
                kept.append(w)
                if len(kept) == 2**k:
                    break
        key = tuple(sorted(kept))
        if len(kept) == 2**k and key not in used:
            used.add(key)
            books.append(Codebook(len(books) + 1, np.array(sorted(kept)), q))
            if len(books) == t:
                return books
    raise CodebookError("greedy search did not find enough codebooks")


def identity_codebook(n=4, k=4, q=4, id=0) -> Codebook:
    """Label ``l`` maps to its base-``q`` digits (most significant first); needs 2**k <= q**n."""
    words = np.array([[(label // q ** (n - 1 - j)) % q for j in range(n)] for label in range(2**k)])
    return Codebook(id, words, q)


# --------------------------------------------------------------------------
# schemes


@dataclass(frozen=True)
class StepBranches:
    """Trellis edges of one inner-code step, before the offset is applied."""

    src: np.ndarray  # (B,) code state before the step
    dst: np.ndarray  # (B,) code state after the step
    label: np.ndarray  # (B,) outer symbol carried by the edge
    word: np.ndarray  # (B, n) inner output symbols


@dataclass(frozen=True)
class InnerScheme:
    kind: str
    n: int
    k: int
    q: int = 4
    codebooks: tuple = ()
    generators: tuple = ()
    memory: int = 0
    offset_seed: int | None = None
    pattern_seed: int | None = None
    _cc_tables: tuple = field(default=None, repr=False, compare=False)

    @property
    def q_outer(self) -> int:
        return 2**self.k

    @property
    def t(self) -> int:
        return len(self.codebooks)

    @property
    def n_states(self) -> int:
        return 2**self.memory

    def n_steps(self, n_outer: int) -> int:
        return n_outer + self.memory

    def length(self, n_outer: int) -> int:
        return self.n_steps(n_outer) * self.n

    def rate(self, n_outer: int) -> float:
        """Inner rate in bits per DNA symbol, termination included."""
        return n_outer * self.k / self.length(n_outer)

    def pattern(self, n_steps: int) -> np.ndarray:
        """Codebook index (0-based) used at each block position."""
        t = self.t
        if self.kind == "wm":
            return np.zeros(n_steps, dtype=np.int64)
        if self.kind == "tvc2":
            return np.arange(n_steps, dtype=np.int64) % t
        if self.kind == "tvc1":
            rng = derive(self.pattern_seed, TAG_PATTERN)
            steps = rng.integers(1, t, size=n_steps)
            steps[0] = rng.integers(0, t)
            return np.cumsum(steps) % t
        raise ValueError(f"{self.kind} has no codebook pattern")

    def offset(self, length: int, seed=None) -> np.ndarray:
        seed = self.offset_seed if seed is None else seed
        if seed is None:
            return np.zeros(length, dtype=np.int64)
        return offset_sequence(seed, length, self.q)

    def branches(self, n_outer: int) -> list[StepBranches]:
        """Per-step edge lists for the whole frame (``n_outer + memory`` steps)."""
        steps = self.n_steps(n_outer)
        if self.kind == "cc":
            src, dst, label, word = self._cc_tables
            body = StepBranches(src, dst, label, word)
            zero = label == 0
            tail = StepBranches(src[zero], dst[zero], label[zero], word[zero])
            return [body] * n_outer + [tail] * self.memory
        per_book = []
        for cb in self.codebooks:
            size = len(cb.words)
            z = np.zeros(size, dtype=np.int64)
            per_book.append(StepBranches(z, z, np.arange(size), cb.words))
        return [per_book[c] for c in self.pattern(steps)]


def _cc_tables(generators, memory, q):
    bits_out = q.bit_length() - 1
    if len(generators) != bits_out:
        raise ValueError(f"need {bits_out} generators to fill one symbol over an alphabet of size {q}")
    src, dst, label, word = [], [], [], []
    for s in range(2**memory):
        for b in (0, 1):
            reg = (b << memory) | s
            sym = 0
            for g in generators:
                sym = (sym << 1) | (bin(g & reg).count("1") & 1)
            src.append(s)
            dst.append(reg >> 1)
            label.append(b)
            word.append([sym])
    return tuple(np.array(a, dtype=np.int64) for a in (src, dst, label, word))


def offset_sequence(seed, length: int, q: int = 4) -> np.ndarray:
    """Uniform i.i.d. offset symbols; ``seed=None`` gives the all-zero sequence."""
    if seed is None:
        return np.zeros(length, dtype=np.int64)
    return derive(seed, TAG_OFFSET).integers(0, q, size=length)


def make_scheme(kind: str, codebooks=None, seed: int = 0, offset: bool | None = None,
                strict: bool = False, metric: str = "edit", generators=(0o5, 0o7),
                memory: int = 2, q: int = 4) -> InnerScheme:
    """Build one of the inner schemes ``cc``, ``wm``, ``tvc1``, ``tvc2``.

    ``codebooks`` is a list of :class:`Codebook`, a path to a codebook file or
    ``None`` for the bundled set.  ``wm`` uses the first book only.  ``seed``
    fixes the offset sequence and the random TVC-1 pattern for the experiment.
    ``strict`` demands a minimum distance of 4 under ``metric``.
    """
    kind = kind.lower().replace("-", "")
    if kind not in KINDS:
        raise ValueError(f"unknown inner scheme {kind!r}; choose from {KINDS}")
    use_offset = _DEFAULT_OFFSET[kind] if offset is None else offset
    offset_seed = int(seed) if use_offset else None
    if kind == "cc":
        gens = tuple(int(g) for g in generators)
        for g in gens:
            if g <= 0 or g.bit_length() > memory + 1:
                raise ValueError(f"generator {oct(g)} does not fit memory {memory}")
        return InnerScheme("cc", n=1, k=1, q=q, generators=gens, memory=memory,
                           offset_seed=offset_seed,
                           _cc_tables=_cc_tables(gens, memory, q))

    if codebooks is None or isinstance(codebooks, (str, Path)):
        codebooks = load_codebooks(codebooks, q)
    books = list(codebooks)
    if kind == "wm":
        books = books[:1]
    if not books:
        raise CodebookError("no codebooks supplied")
    n, k = books[0].n, books[0].k
    for cb in books:
        if (cb.n, cb.k) != (n, k):
            raise CodebookError("all codebooks of a scheme must share n and k")
        if cb.q != q:
            raise CodebookError("codebook alphabet does not match q")
        if strict and codebook_min_levenshtein(cb, metric) < 4:
            raise CodebookError(f"codebook {cb.id}: minimum {metric} distance below 4")
    if kind.startswith("tvc") and len(books) < 2:
        raise CodebookError("a time-varying code needs at least two codebooks")
    return InnerScheme(kind, n=n, k=k, q=q, codebooks=tuple(books),
                       offset_seed=offset_seed,
                       pattern_seed=int(seed) if kind == "tvc1" else None)


def encode(scheme: InnerScheme, w, offset_seed=None) -> np.ndarray:
    """Inner-encode outer symbols ``w`` and add the offset (mod q).

    ``offset_seed`` overrides the scheme's own offset, e.g. for per-frame
    offsets.
    """
    w = np.asarray(w, dtype=np.int64)
    if w.ndim != 1 or len(w) == 0:
        raise ValueError("w must be a non-empty 1-D sequence")
    if w.min() < 0 or w.max() >= scheme.q_outer:
        raise ValueError(f"outer symbol outside [0, {scheme.q_outer})")
    if scheme.kind == "cc":
        src, dst, label, word = scheme._cc_tables
        table = {(int(s), int(b)): (int(d), int(o[0])) for s, d, b, o in zip(src, dst, label, word)}
        state, out = 0, []
        for b in np.concatenate((w, np.zeros(scheme.memory, dtype=np.int64))):
            state, sym = table[(state, int(b))]
            out.append(sym)
        v = np.array(out, dtype=np.int64)
    else:
        pat = scheme.pattern(len(w))
        v = np.concatenate([scheme.codebooks[c].words[s] for c, s in zip(pat, w)])
    off = scheme.offset(len(v), offset_seed)
    return (v + off) % scheme.q


def invert(scheme: InnerScheme, x, offset_seed=None) -> np.ndarray:
    """Recover ``w`` from an uncorrupted inner codeword."""
    x = np.asarray(x, dtype=np.int64)
    v = (x - scheme.offset(len(x), offset_seed)) % scheme.q
    n_outer = len(v) // scheme.n - scheme.memory
    if scheme.kind == "cc":
        src, dst, label, word = scheme._cc_tables
        state, w = 0, []
        for sym in v:
            hit = np.flatnonzero((src == state) & (word[:, 0] == sym))
            if len(hit) != 1:
                raise ValueError("sequence is not a codeword")
            w.append(int(label[hit[0]]))
            state = int(dst[hit[0]])
        if state != 0:
            raise ValueError("convolutional code not terminated")
        return np.array(w[:n_outer], dtype=np.int64)
    pat = scheme.pattern(n_outer)
    blocks = v.reshape(n_outer, scheme.n)
    w = []
    for c, blk in zip(pat, blocks):
        hit = np.flatnonzero((scheme.codebooks[c].words == blk).all(axis=1))
        if len(hit) != 1:
            raise ValueError("block is not a codeword")
        w.append(int(hit[0]))
    return np.array(w, dtype=np.int64)
