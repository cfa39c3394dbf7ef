"""
Evaluating generated motion: projections, FID, precision/recall
===============================================================

Generated 3D motions are scored against 2D reference data by projecting each
motion into a fresh random-yaw camera, extracting deterministic per-motion
features, and comparing feature distributions: Fréchet distance for overall
fit, k-NN precision/recall for fidelity vs coverage, and pairwise diversity.
Repeating the projection gives confidence intervals.

This demo needs no trained model: it scores ground-truth 3D motions against a
held-out half of their own dataset (the "oracle generator"), then shows how a
mode-collapsed generator is caught by recall.
"""

import numpy as np

from mvas import (
    build_dataset,
    default_skeleton,
    evaluate_projected,
    extract_features_many,
    family_params,
    fid,
    precision_recall,
)

# 360 mixed-family motions; the first half plays "reference 2D data", the
# second half plays "generator output" (as 3D, scored through projections).
built = build_dataset(default_skeleton(), family_params("mixed"), 360, seed=77)
ref2d = built.motions[:180]
gen3d = built.motions3d[180:]

report = evaluate_projected(gen3d, ref2d, built.norm_mean, built.norm_scale,
                            repeats=5, seed=0)
print("ground truth scored against itself (the attainable floor):")
print(f"  fid       {report.fid:8.3f} +- {report.fid_ci:.3f}")
print(f"  precision {report.precision:8.3f} +- {report.precision_ci:.3f}")
print(f"  recall    {report.recall:8.3f} +- {report.recall_ci:.3f}")
print(f"  diversity {report.diversity:8.3f} +- {report.diversity_ci:.3f}")

# A mode-collapsed "generator": the same single motion, over and over.
collapsed = [gen3d[0]] * len(gen3d)
report_c = evaluate_projected(collapsed, ref2d, built.norm_mean,
                              built.norm_scale, repeats=5, seed=0)
print("\na generator that repeats one motion:")
print(f"  fid       {report_c.fid:8.3f}   (much worse)")
print(f"  precision {report_c.precision:8.3f}   (its one motion is realistic)")
print(f"  recall    {report_c.recall:8.3f}   (covers almost nothing)")
print(f"  diversity {report_c.diversity:8.3f}")

# The metrics also work directly on 2D feature sets.
fa = extract_features_many(ref2d, built.norm_mean, built.norm_scale)
fb = extract_features_many(built.motions[180:], built.norm_mean, built.norm_scale)
mu, sd = fa.mean(0), fa.std(0) + 1e-12
p, r = precision_recall((fb - mu) / sd, (fa - mu) / sd)
print(f"\n2D half-vs-half: fid {fid((fb - mu) / sd, (fa - mu) / sd):.3f}, "
      f"precision {p:.3f}, recall {r:.3f}")
print("\nrecall collapse is the fingerprint to watch for: it is how sharing")
print("3D noise across views proves its worth in the ablation table.")
