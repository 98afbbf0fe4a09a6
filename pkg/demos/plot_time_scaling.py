"""
Recovering a generator's clock
==============================

A video generator that runs its clock 2.43x slow makes every fall look
lazy. Mean time scaling fits that factor on calibration scenes and divides
it out on the rest.
"""

import tempfile
from pathlib import Path

from gravlab.bench import RunConfig, run_single_ball
from gravlab.metrics import Variant
from gravlab.scene import generate_scenes, write_manifest
from gravlab.simulate import DegradationRule, DegradationSpec

work = Path(tempfile.mkdtemp())
manifest = work / "scenes.json"
# 3 s clips so a 4 m drop still lands at 2.43x
write_manifest(generate_scenes(75, "single", 0, duration_s=3.0), manifest)

slow = (DegradationRule(DegradationSpec.time_dilation(2.43)),)
report = run_single_ball(
    RunConfig(manifest, split=(30, 45), degradations=slow,
              scaling_variants={Variant.MEAN_SCALED})
)

# %%
# Raw gravity comes out near 9.81 / 2.43^2. The scaled estimate is back at 9.81.
print("fitted MTS:", round(report.models["mts"], 4))
for variant in ("Raw", "MeanScaled"):
    stats = report.statistics[variant]["all"]
    print(f"{variant:10s} mean {stats['mean']:.3f}  median {stats['median']:.3f}  n={stats['n_samples']}")
