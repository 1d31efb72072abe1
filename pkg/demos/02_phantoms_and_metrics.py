"""Generate a longitudinal phantom and score a deliberately imperfect
prediction with the full metric panel.

The phantom pairs a baseline scan with a follow-up that adds new lesions,
so the difference map localises exactly what a change-detection model
should find. The "prediction" here is the smoothed difference map pushed
through a sigmoid, which is close but not perfect, so every metric has
something to say.
"""

import numpy as np
from scipy.special import expit

import seglab as sl


def main():
    cfg = sl.PhantomConfig(noise_sigma=0.1)
    case = sl.gen_phantom(cfg, seed=123)
    mask = case.new_lesion_mask
    print(f"case {case.case_id}: dims {mask.dims}, "
          f"{mask.foreground_count()} foreground voxels "
          f"({100 * mask.foreground_count() / mask.n_voxels:.2f}%)")

    diff = sl.difference_map(case)
    pred = sl.new_prob(mask.dims, mask.spacing,
                       expit(8.0 * (diff.data - 0.4)))
    report = sl.full_report(mask, pred, threshold=0.5, case_id=case.case_id)
    for key, val in report.to_dict().items():
        print(f"  {key:>10}: {val if isinstance(val, str) else round(val, 4)}")

    labels = sl.connected_components(mask, connectivity=26)
    print(f"\n{labels.n_components} ground-truth lesions; weighted crops "
          f"centre on them:")
    for seed in range(3):
        crop = sl.weighted_crop(case, (16, 16, 16), seed=seed)
        frac = crop.new_lesion_mask.data.mean()
        print(f"  crop seed {seed}: foreground fraction {frac:.3f} "
              f"(whole volume: {mask.data.mean():.3f})")


if __name__ == "__main__":
    main()
