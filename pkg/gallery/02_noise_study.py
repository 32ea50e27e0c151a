"""Accuracy and voting effort as pixel noise grows, atom seeding vs random seeding."""

from laav import PipelineConfig, SceneSpec, synth_scene
from laav.bench import bench_noise, summarise

scene = synth_scene(SceneSpec(2, (90, 90), 15, seed=3))
rows = bench_noise([scene], [0.0, 0.5, 1.0, 2.0], 5, PipelineConfig(seed=0))

print(f"{'arm':8s} {'sigma':>5s} {'accuracy':>9s} {'std':>7s} {'median it':>9s} {'converged':>9s}")
for s in summarise(rows):
    print(
        f"{s.arm:8s} {s.sigma:5.1f} {s.mean_accuracy:9.4f} {s.std_accuracy:7.4f} "
        f"{s.median_iterations:9.0f} {s.convergence_rate:9.2f}"
    )
