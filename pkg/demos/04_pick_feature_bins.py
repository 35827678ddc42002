"""Wrapper feature selection finding the two informative bins.

Forty samples carry sixteen feature bins; only bins 3 and 7 depend on
the class label, the rest are uniform noise.  The pack search scores a
candidate bin subset by nearest-centroid validation error plus a small
sparsity penalty, so it should land on a tiny subset of the true bins.
"""

import numpy as np

from cpwt.gwo import GwoConfig, select_features

rng = np.random.default_rng(0)
n_per_class, n_bins = 20, 16
labels = np.repeat([0, 1], n_per_class)
features = rng.uniform(0.0, 1.0, size=(labels.size, n_bins))
features[:, 3] = labels + rng.uniform(-0.05, 0.05, size=labels.size)
features[:, 7] = 1.0 - labels + rng.uniform(-0.05, 0.05, size=labels.size)

print(f"{labels.size} samples, {n_bins} bins, informative bins: [3, 7]")

mask = select_features(features, labels, GwoConfig(wolves=20, iters=60, seed=0))
print(f"selected bins: {mask.selected.tolist()}")
print(f"kept {mask.n_selected} of {mask.dim} bins")

# The mask projects any feature matrix down to the kept bins.
projected = mask.apply(features)
print(f"projected features: {projected.shape}")
print(f"class means on kept bins: {np.round(projected[labels == 0].mean(axis=0), 3)}"
      f" vs {np.round(projected[labels == 1].mean(axis=0), 3)}")
