"""
Clustering three Gaussian blobs end to end
==========================================

The full pipeline on a small synthetic problem: a KNN graph, content
auto-encoder pretraining, K-means on the middle layer, and joint training of
both streams with self-supervision.  Takes about half a minute on one core.
"""
# %%
#
import tempfile

from crossfuse.experiment import ExperimentConfig, export_results, train
from crossfuse.synthetic import gaussian_blobs

X, y, centers = gaussian_blobs(300, 16, 3, sigma=0.1, spacing=10.0, seed=0)
print(X.shape, "pairwise center distance 10")

# %%
#
# Hidden widths are narrower than the 500-wide default, which is sized for
# datasets with thousands of features.

config = ExperimentConfig(clusters=3, k=5, dims=[64, 10, 3, 64, 64], epochs=200, seed=0)
report = train(config, X, y)

# %%
#
# The loss breakdown at a few epochs.

for row in report.losses[::50] + report.losses[-1:]:
    print(row["epoch"], {k: round(v, 2) for k, v in row.items() if k != "epoch"})
print(report.metrics)

# %%
#
# Everything a run produces can be written out.

with tempfile.TemporaryDirectory() as out:
    for path in export_results(report, out):
        print(path.name, path.stat().st_size, "bytes")
