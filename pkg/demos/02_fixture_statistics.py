"""Recompute the published summary statistics from the shipped per-operation tables.

Three numbers come out of this: expert agreement on bigeye vs yellowfin,
the per-species composition error of the best aggregation method per trip,
and the signed-rank comparison of how many fish each segmentation model
tracked.
"""

from catchcomp.compose import best_method_table, segmentation_comparison, trip_of
from catchcomp.io import fixture_path, load_composition_table, load_expert_matrix
from catchcomp.stats import expert_agreement

agreement = expert_agreement(load_expert_matrix(fixture_path("supp_table_d_experts.csv")))
print(f"expert agreement over {len(agreement.retained)} fish labeled by >= 4 experts")
for label, s in agreement.species.items():
    print(f"  {label.value}: {100 * s.mean:.1f}% ± {100 * s.sd:.1f}%  unanimous: {s.unanimous}")

yolo = load_composition_table(fixture_path("supp_table_c_yolov9_sam2.csv"))
print("\ncomposition MAE (percentage points), best method per trip")
for row in best_method_table(yolo.estimates, yolo.truths):
    print(f"  trip {row.group:>3} {row.species.value:9s} {row.method:12s} "
          f"{row.mae:5.1f} ± {row.sd:4.1f}  p={row.p_value:.3f} {row.marker}")

mask_rcnn = load_composition_table(fixture_path("supp_table_b_maskrcnn.csv"))
print("\nsegmented fraction of fish, Mask R-CNN vs YOLOv9+SAM2")
for row in segmentation_comparison(mask_rcnn.segmented, yolo.segmented):
    print(f"  trip {row.group:>3} n={row.n:2d}  {row.mean_a:5.1f} ± {row.sd_a:4.1f}  vs  "
          f"{row.mean_b:5.1f} ± {row.sd_b:4.1f}  exact p={row.p_value:.2g} {row.marker}")
