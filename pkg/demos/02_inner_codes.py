"""Inner synchronization codes: convolutional, watermark and time-varying.

Run:  python demos/02_inner_codes.py
"""
# %%
import numpy as np

from dnabound.channel import to_dna
from dnabound.inner import codebook_min_levenshtein, encode, invert, load_codebooks, make_scheme

# %% The bundled codebooks: 16 words of length 4 each.
books = load_codebooks()
for cb in books:
    print(f"codebook {cb.id}: edit distance {codebook_min_levenshtein(cb)}, "
          f"indel distance {codebook_min_levenshtein(cb, 'indel')}",
          " ".join(to_dna(w) for w in cb.words[:6]), "...")

# %% Four schemes, the same outer symbols.
w = np.array([5, 12, 0, 9, 3, 3, 15, 1])
for kind in ("wm", "tvc1", "tvc2"):
    s = make_scheme(kind, seed=7)
    x = encode(s, w)
    print(f"{kind:5s} rate {s.rate(len(w)):.3f}  pattern {s.pattern(len(w)).tolist()}  x = {to_dna(x)}")
    assert np.array_equal(invert(s, x), w)

cc = make_scheme("cc", seed=7)
bits = np.array([1, 0, 1, 1, 0, 0, 1, 0])
x = encode(cc, bits)
print(f"cc    rate {cc.rate(len(bits)):.3f}  (two tail symbols)  x = {to_dna(x)}")
print("cc rate at N = 960:", cc.rate(958))
