"""The balanced contrastive loss and what the extra positives do.

The loss averages the sigmoid noise-contrastive loss over the anchor and m
extra same-class anchors.  Its value splits into an instance-level term and a
class-level term; the class-level term is what pulls a class together.
"""

import numpy as np

from tailsampler import BnsBatch, BnsConfig, bns_decomposition, bns_loss, ns_loss, train_toy_embeddings

q = np.array([1.0, 0.0])
batch = BnsBatch(q, q, negatives=np.array([[-1.0, 0.0]]))
print("NS loss, one positive and one opposite negative, tau = 1:", ns_loss(batch, BnsConfig(1.0, 0, 1)))

rng = np.random.default_rng(3)
batch = BnsBatch(rng.standard_normal(8), rng.standard_normal(8), rng.standard_normal((3, 8)), rng.standard_normal((5, 8)))
cfg = BnsConfig(0.3, 3, 5)
inst, cls = bns_decomposition(batch, cfg)
print(f"\nBNS loss {bns_loss(batch, cfg):.6f} = -(instance {inst:.4f} + class {cls:.4f}) / 4")

# Toy run: two noisy 2-D classes, with and without extra positives.
y = np.repeat([0, 1], 20)
X = np.array([[1.0, 0.3], [-0.3, 1.0]])[y] + 0.6 * rng.standard_normal((40, 2))
for m in (0, 3):
    res = train_toy_embeddings(X, y, BnsConfig(0.3, m, 5), steps=200, lr=0.1, seed=0)
    trace = res.intra_dist[::50]
    print(f"\nm = {m}: intra-class cosine distance every 50 steps", np.round(trace, 4))
    print(f"        loss every 50 steps", np.round(res.loss[::50], 4))
