"""Protograph-based nonbinary LDPC outer codes.

A ``r_p x n_p`` base matrix is lifted by replacing entry ``b`` with the sum
of ``b`` distinct ``Q_p x Q_p`` circulant permutations (zero block for
``b = 0``).  Circulant shifts come from a progressive edge-growth search over
the lifted Tanner graph.  Edges then receive nonzero labels from GF(2^k).
Decoding is sum-product over symbol distributions with the check-node
convolution done in the Walsh-Hadamard domain.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.linalg import hadamard

from .gf import GF
from .seeding import TAG_LABELS, TAG_LIFT, derive

B1 = np.array([[1, 1, 0, 0, 0, 3],
               [0, 1, 1, 2, 1, 0],
               [1, 1, 1, 0, 1, 1]])
B2 = np.array([[0, 1, 1, 1, 1, 1],
               [1, 1, 1, 1, 1, 1],
               [1, 0, 1, 1, 0, 0]])
B1.setflags(write=False)
B2.setflags(write=False)

PROTOGRAPHS = {"B1": B1, "B2": B2}

# Inner scheme -> protograph pairing used in the experiments.
DEFAULT_PROTOGRAPH = {"cc": "B1", "wm": "B1", "tvc1": "B2", "tvc2": "B2"}


class LiftingError(ValueError):
    pass


def load_base_matrix(path) -> np.ndarray:
    """Dense integer rows, whitespace separated; ``#`` starts a comment."""
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].split()
        if line:
            rows.append([int(v) for v in line])
    B = np.array(rows, dtype=np.int64)
    if B.ndim != 2 or B.size == 0 or (B < 0).any():
        raise ValueError(f"{path}: not a non-negative integer matrix")
    return B


def get_protograph(name_or_path) -> np.ndarray:
    if isinstance(name_or_path, np.ndarray):
        return name_or_path
    if str(name_or_path).upper() in PROTOGRAPHS:
        return PROTOGRAPHS[str(name_or_path).upper()]
    return load_base_matrix(name_or_path)


@dataclass(frozen=True)
class LdpcCode:
    base: np.ndarray
    Qp: int
    shifts: tuple  # ((i, j, shift), ...)
    check: np.ndarray  # (E,) check index of each edge
    var: np.ndarray  # (E,) variable index of each edge
    labels: np.ndarray  # (E,) nonzero field labels
    gf: GF = field(default_factory=lambda: GF(1))

    @property
    def n_checks(self) -> int:
        return self.base.shape[0] * self.Qp

    @property
    def N(self) -> int:
        return self.base.shape[1] * self.Qp

    @property
    def q(self) -> int:
        return self.gf.q

    @property
    def design_rate(self) -> float:
        rp, n_p = self.base.shape
        return (n_p - rp) / n_p

    def parity_check_matrix(self) -> np.ndarray:
        H = np.zeros((self.n_checks, self.N), dtype=np.int64)
        H[self.check, self.var] = self.labels
        return H

    @cached_property
    def _systematic(self):
        """Reduced row echelon form of H; pivots taken from the right."""
        gf = self.gf
        A = self.parity_check_matrix()
        m, n = A.shape
        pivots, r = [], 0
        for c in range(n - 1, -1, -1):
            if r == m:
                break
            nz = np.flatnonzero(A[r:, c])
            if len(nz) == 0:
                continue
            p = r + nz[0]
            A[[r, p]] = A[[p, r]]
            A[r] = gf.mul_table[gf.inv_table[A[r, c]], A[r]]
            others = np.flatnonzero(A[:, c])
            others = others[others != r]
            if len(others):
                A[others] ^= gf.mul_table[A[others, c][:, None], A[r][None, :]]
            pivots.append(c)
            r += 1
        pivots = np.array(pivots, dtype=np.int64)
        info = np.setdiff1d(np.arange(n), pivots)
        return A[:r][:, info], pivots, info

    @property
    def K(self) -> int:
        return len(self._systematic[2])

    @property
    def rank(self) -> int:
        return len(self._systematic[1])

    @property
    def info_positions(self) -> np.ndarray:
        """Codeword positions carrying the message symbols."""
        return self._systematic[2]

    @property
    def rate(self) -> float:
        return self.K / self.N

    def syndrome(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.int64)
        s = np.zeros(self.n_checks, dtype=np.int64)
        np.bitwise_xor.at(s, self.check, self.gf.mul_table[self.labels, w[self.var]])
        return s

    def is_codeword(self, w) -> bool:
        return not self.syndrome(w).any()

    @cached_property
    def _layout(self):
        """Index tables for the decoder (check-major and variable-major views)."""
        E = len(self.check)
        by_check = np.argsort(self.check, kind="stable")
        by_var = np.argsort(self.var, kind="stable")

        def padded(order, owner, count):
            deg = np.bincount(owner, minlength=count)
            table = np.full((count, max(int(deg.max()), 1)), E, dtype=np.int64)
            pos = np.arange(E) - np.repeat(np.cumsum(deg) - deg, deg)
            table[owner[order], pos] = order
            return table

        check_tab = padded(by_check, self.check, self.n_checks)
        var_tab = padded(by_var, self.var, self.N)
        gf = self.gf
        a = np.arange(self.q)
        # distribution of w  -> distribution of h*w, and back
        to_scaled = gf.mul_table[gf.inv_table[self.labels][:, None], a[None, :]]
        from_scaled = gf.mul_table[self.labels[:, None], a[None, :]]
        return check_tab, var_tab, to_scaled, from_scaled


def _local_girth(adj_v, adj_c, v, limit):
    """Length of the shortest cycle through variable node ``v`` (capped at ``limit``)."""
    dist = {("v", v): 0}
    branch = {}
    queue = deque()
    seen_first = set()
    for c in adj_v[v]:
        if c in seen_first:
            return 2
        seen_first.add(c)
        node = ("c", c)
        dist[node] = 1
        branch[node] = c
        queue.append((node, ("v", v)))
    best = limit
    while queue:
        node, parent = queue.popleft()
        d = dist[node]
        if 2 * d + 1 >= best:
            break
        kind, idx = node
        nbrs = adj_c[idx] if kind == "c" else adj_v[idx]
        nkind = "v" if kind == "c" else "c"
        skipped_parent = False
        for m in nbrs:
            other = (nkind, m)
            if other == parent and not skipped_parent:
                skipped_parent = True
                continue
            if other == ("v", v):
                continue
            if other not in dist:
                dist[other] = d + 1
                branch[other] = branch[node]
                queue.append((other, node))
            elif branch[other] != branch[node]:
                best = min(best, d + dist[other] + 1)
    return best


def lift_protograph(B, Qp: int, seed: int = 0, method: str = "peg", girth_limit: int = 20) -> LdpcCode:
    """Lift base matrix ``B`` with circulants of size ``Qp`` (binary labels).

    ``method="peg"`` places circulants greedily, maximising the local girth of
    the new variable-node block and breaking ties by the smallest shift; it
    ignores ``seed``.  ``method="random"`` draws distinct shifts from ``seed``.
    """
    B = np.asarray(get_protograph(B), dtype=np.int64)
    if B.ndim != 2 or (B < 0).any():
        raise LiftingError("base matrix must be a non-negative integer matrix")
    if Qp < 1:
        raise LiftingError("lifting factor must be >= 1")
    if B.max() > Qp:
        raise LiftingError(f"entry {B.max()} cannot be lifted with Qp={Qp}")
    rp, n_p = B.shape
    shifts = []
    if method == "random":
        rng = derive(seed, TAG_LIFT)
        for i in range(rp):
            for j in range(n_p):
                for s in rng.choice(Qp, size=B[i, j], replace=False):
                    shifts.append((i, j, int(s)))
    elif method == "peg":
        adj_v = [[] for _ in range(n_p * Qp)]
        adj_c = [[] for _ in range(rp * Qp)]
        z = np.arange(Qp)
        order = sorted(range(n_p), key=lambda j: (B[:, j].sum(), j))
        for j in order:
            v0 = j * Qp
            for i in range(rp):
                used = set()
                for _ in range(B[i, j]):
                    best_shift, best_g = None, -1
                    for s in range(Qp):
                        if s in used:
                            continue
                        for zz in z:
                            c = i * Qp + (zz + s) % Qp
                            adj_v[v0 + zz].append(c)
                            adj_c[c].append(v0 + zz)
                        g = _local_girth(adj_v, adj_c, v0, girth_limit)
                        for zz in z:
                            c = i * Qp + (zz + s) % Qp
                            adj_v[v0 + zz].pop()
                            adj_c[c].pop()
                        if g > best_g:
                            best_shift, best_g = s, g
                            if g >= girth_limit:
                                break
                    used.add(best_shift)
                    for zz in z:
                        c = i * Qp + (zz + best_shift) % Qp
                        adj_v[v0 + zz].append(c)
                        adj_c[c].append(v0 + zz)
                    shifts.append((i, j, best_shift))
        shifts.sort()
    else:
        raise ValueError(f"unknown lifting method {method!r}")

    checks, vars_ = [], []
    z = np.arange(Qp)
    for i, j, s in shifts:
        vars_.append(j * Qp + z)
        checks.append(i * Qp + (z + s) % Qp)
    check = np.concatenate(checks) if checks else np.zeros(0, dtype=np.int64)
    var = np.concatenate(vars_) if vars_ else np.zeros(0, dtype=np.int64)
    order = np.lexsort((var, check))
    return LdpcCode(base=B, Qp=Qp, shifts=tuple(shifts), check=check[order], var=var[order],
                    labels=np.ones(len(order), dtype=np.int64), gf=GF(1))


def assign_field_labels(code: LdpcCode, field_bits: int, seed: int = 0) -> LdpcCode:
    """Move ``code`` to GF(2^field_bits) with uniform nonzero edge labels."""
    gf = GF(field_bits)
    if gf.q == 2:
        labels = np.ones(len(code.check), dtype=np.int64)
    else:
        labels = derive(seed, TAG_LABELS).integers(1, gf.q, size=len(code.check))
    return replace(code, labels=labels, gf=gf)


def make_code(protograph="B2", Qp: int = 40, field_bits: int = 4, seed: int = 0, method: str = "peg") -> LdpcCode:
    return assign_field_labels(lift_protograph(protograph, Qp, seed, method), field_bits, seed)


def encode_ldpc(code: LdpcCode, u) -> np.ndarray:
    """Systematic encoding: ``u`` fills ``code.info_positions``."""
    u = np.asarray(u, dtype=np.int64)
    if len(u) != code.K:
        raise ValueError(f"message length {len(u)} != K={code.K}")
    if len(u) and (u.min() < 0 or u.max() >= code.q):
        raise ValueError("message symbol outside the field")
    P, pivots, info = code._systematic
    w = np.zeros(code.N, dtype=np.int64)
    w[info] = u
    w[pivots] = code.gf.matvec(P, u)
    return w


@dataclass
class BpResult:
    posterior: np.ndarray  # (N, q)
    extrinsic: np.ndarray  # (N, q), posterior with the prior divided out
    hard: np.ndarray
    converged: bool
    iterations: int


def _normalize(p, floor=0.0):
    if floor:
        p = np.maximum(p, floor)
    s = p.sum(axis=-1, keepdims=True)
    bad = (s <= 0)[..., 0]
    out = p / np.where(s > 0, s, 1.0)
    out[bad] = 1.0 / p.shape[-1]
    return out


def _exclusive_products(X):
    """Product over axis 1 of all entries except the own one."""
    n = X.shape[1]
    pre = np.ones_like(X)
    suf = np.ones_like(X)
    for k in range(1, n):
        pre[:, k] = pre[:, k - 1] * X[:, k - 1]
        suf[:, n - 1 - k] = suf[:, n - k] * X[:, n - k]
    return pre * suf, pre[:, -1] * X[:, -1]


def decode_bp(code: LdpcCode, priors, max_iter: int = 100) -> BpResult:
    """Sum-product decoding from per-symbol prior distributions.

    Stops as soon as the hard decision satisfies every check (checked before
    the first iteration too).
    """
    priors = _normalize(np.asarray(priors, dtype=float))
    q = code.q
    if priors.shape != (code.N, q):
        raise ValueError(f"priors must have shape {(code.N, q)}")
    check_tab, var_tab, to_scaled, from_scaled = code._layout
    E = len(code.check)
    Hq = hadamard(q).astype(float)

    hard = priors.argmax(axis=1)
    ext = np.ones((code.N, q)) / q
    if code.is_codeword(hard):
        return BpResult(priors.copy(), ext, hard, True, 0)

    v2c = priors[code.var]
    c2v = np.empty((E + 1, q))
    c2v[E] = 1.0
    spec = np.empty((E + 1, q))
    spec[E] = 1.0
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        scaled = np.take_along_axis(v2c, to_scaled, axis=1)
        spec[:E] = scaled @ Hq
        excl, _ = _exclusive_products(spec[check_tab])
        valid = check_tab < E
        conv = excl[valid] @ Hq / q
        edges = check_tab[valid]
        msg = np.empty((E, q))
        msg[edges] = conv
        msg = np.take_along_axis(msg, from_scaled, axis=1)
        c2v[:E] = _normalize(np.maximum(msg, 0.0))

        excl_v, full = _exclusive_products(c2v[var_tab])
        post = _normalize(priors * full)
        hard = post.argmax(axis=1)
        vvalid = var_tab < E
        new_v2c = np.empty((E, q))
        new_v2c[var_tab[vvalid]] = excl_v[vvalid] * np.repeat(priors, vvalid.sum(axis=1), axis=0)
        v2c = _normalize(new_v2c)
        if code.is_codeword(hard):
            converged = True
            break
    ext = _normalize(full)
    return BpResult(post, ext, hard, converged, it)
