"""Look at each stage of one run: atoms, fine models, coarse affinity, final labels."""

import numpy as np

from laav import PipelineConfig, SceneSpec, segment, synth_scene
from laav.data import UNLABELED
from laav.dataio import misclassification_error
from laav.pipeline import stage_labelings

scene = synth_scene(SceneSpec(3, (70, 70, 70), 18, seed=5))
res = segment(scene, PipelineConfig(seed=2))
gt = scene.ground_truth

sizes = sorted((len(a.feature_ids) for a in res.atoms), reverse=True)
print(f"{len(res.atoms)} atoms, largest {sizes[:5]}")

np.set_printoptions(precision=3, suppress=True)
print("coarse affinity between fine models:")
print(res.affinity)

stages = stage_labelings(res)
fine = stages.pop("stage_d_fine").labels
models = np.unique(fine[fine != UNLABELED])
pure = sum(len(np.unique(gt[fine == m])) == 1 for m in models)
print(f"stage_d_fine    {len(models)} fine models, {pure} of them single-motion")
for name, lab in stages.items():
    done = lab.labels != UNLABELED
    err = misclassification_error(lab.labels[done], gt[done], 3)
    print(f"{name:15s} labeled {done.mean():6.1%}  error on labeled {err:.4f}")
