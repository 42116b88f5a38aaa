"""Protograph LDPC outer code over GF(16): lifting, encoding, BP decoding.

Run:  python demos/04_outer_code.py
"""
# %%
import numpy as np

from dnabound.outer_ldpc import B1, B2, decode_bp, encode_ldpc, lift_protograph, make_code

# %% The two base matrices.
print("B1 =\n", B1)
print("B2 =\n", B2)

# %% PEG lifting keeps short cycles out; compare with random circulants.
def girth(code):
    adj = [[] for _ in range(code.N + code.n_checks)]
    for c, v in zip(code.check, code.var):
        adj[v].append(code.N + c)
        adj[code.N + c].append(v)
    best = np.inf
    for root in range(0, code.N, 7):
        dist, parent, frontier = {root: 0}, {root: -1}, [root]
        while frontier:
            nxt = []
            for a in frontier:
                for b in adj[a]:
                    if b not in dist:
                        dist[b], parent[b] = dist[a] + 1, a
                        nxt.append(b)
                    elif parent[a] != b:
                        best = min(best, dist[a] + dist[b] + 1)
            frontier = nxt
    return best


print("girth (sampled roots), PEG   :", girth(lift_protograph(B2, 40)))
print("girth (sampled roots), random:", girth(lift_protograph(B2, 40, seed=1, method="random")))

# %% Encode, add symbol noise, decode.
code = make_code("B2", 40, field_bits=4, seed=0)
rng = np.random.default_rng(0)
u = rng.integers(0, 16, code.K)
w = encode_ldpc(code, u)
print(f"[{code.N}, {code.K}] code over GF(16), codeword valid: {code.is_codeword(w)}")

eps = 0.12
noisy = w.copy()
flip = rng.random(code.N) < eps
noisy[flip] = (w[flip] + rng.integers(1, 16, flip.sum())) % 16
pri = np.full((code.N, 16), eps / 15)
pri[np.arange(code.N), noisy] = 1 - eps
res = decode_bp(code, pri)
print(f"{flip.sum()} symbol errors -> converged {res.converged} after {res.iterations} iterations, "
      f"correct {np.array_equal(res.hard, w)}")
