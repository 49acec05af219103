"""
Scoring a clustering
====================

Cluster ids are arbitrary, so accuracy and F1 first align clusters to classes
with an optimal one-to-one matching.  NMI and ARI are label-free.
"""
# %%
#
import numpy as np

from crossfuse.metrics import accuracy, contingency, evaluate, hungarian_match

y_true = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2, 2])
y_pred = np.array([2, 2, 1, 0, 0, 0, 1, 1, 1, 2])

# %%
#
# The contingency table counts class/cluster co-occurrences; the matching
# picks the permutation with the largest total on the diagonal.

table, classes, clusters = contingency(y_true, y_pred)
print(table)
print("cluster for each class:", hungarian_match(-table))

# %%
#
print(evaluate(y_true, y_pred))

# %%
#
# Renaming clusters changes nothing.

print(accuracy(y_true, (y_pred + 1) % 3) == accuracy(y_true, y_pred))
