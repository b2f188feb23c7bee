"""Building the kernel from classifier confidences.

Each item carries p(i), the classifier's probability of its true label.  The
kernel couples items i and j with weight p(i) p(j) / N and puts the remaining
row mass on the diagonal, so confident items end up with small diagonals.
"""

import numpy as np

from tailsampler import build_stochastic_matrix, spectral_decompose, validate_lemmas

np.set_printoptions(precision=4, suppress=True)

# Two items the classifier is sure about: the kernel is rank one.
S = build_stochastic_matrix([1.0, 1.0])
print("p = (1, 1)\n", S.entries)
print("eigenvalues", spectral_decompose(S).eigenvalues)

# One sure, one unsure.
S = build_stochastic_matrix([1.0, 0.5])
print("\np = (1, 0.5)\n", S.entries)
print("eigenvalues", spectral_decompose(S).eigenvalues)

# A random class of 12 items.  Rows sum to one and the spectrum stays in [0, 1].
rng = np.random.default_rng(0)
p = rng.random(12)
S = build_stochastic_matrix(p)
print("\nrandom class, N = 12")
print("row sums   ", S.entries.sum(axis=1))
print("diagonal   ", np.diag(S.entries))
print("confidence ", p)
print("report     ", validate_lemmas(S).as_dict())
