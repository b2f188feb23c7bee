"""Rebalancing a long-tailed manifest with the fixed-size DPP.

Every class contributes min(k, N_c) items.  Inside a class the sampler leans
towards items the classifier finds hard, which random undersampling does not.
"""

import numpy as np

from tailsampler import ClassManifest, ItemRecord, SamplerConfig, Variant, balanced_resample

rng = np.random.default_rng(2)
sizes = [200, 80, 30, 8]
items = []
for c, n in enumerate(sizes):
    conf = rng.beta(5, 2, size=n)  # mostly confident, with a tail of hard items
    items += [ItemRecord(f"c{c}-{j}", c, float(q)) for j, q in enumerate(conf)]
manifest = ClassManifest.from_items(items)

config = SamplerConfig(k=20, seed=0, variant=Variant.PROBABILISTIC)
picked = balanced_resample(manifest, config)

print("class  N_c  kept  mean p (class)  mean p (kept)  mean p (random)")
for c in range(len(sizes)):
    idx = manifest.indices_of(c)
    kept = sorted(picked[c].indices)
    rand = rng.choice(idx, size=min(config.k, idx.size), replace=False)
    P = manifest.probabilities
    print(f"{c:5d} {idx.size:4d} {len(kept):5d}  {P[idx].mean():14.3f}  {P[kept].mean():13.3f}  {P[rand].mean():15.3f}")
