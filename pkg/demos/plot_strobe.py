"""
Strobe composites
=================

Overlay ball positions at equal time steps. On Earth the spacing grows
linearly; a dilated clock squeezes it by s^2. The dashed line marks where
the upper ball should be when the lower one lands.
"""

import tempfile
from pathlib import Path

from gravlab import simulate_scene
from gravlab.scene import BallSpec, CameraSpec, Protocol, SceneSpec, two_ball_offsets
from gravlab.simulate import DegradationSpec
from gravlab.strobe import StrobeSpec, build_composite, write_svg

out = Path(tempfile.mkdtemp())

ball = BallSpec()
cam = CameraSpec(distance_m=7.5, height_m=1.25)
scene = SceneSpec("pair", Protocol.TWO_BALL, (1.0, 2.5), two_ball_offsets(ball), cam, ball)
earth = build_composite(scene, simulate_scene(scene))
write_svg(earth, out / "pair_earth.svg")

# %%
# Same instants, slower clock.
spec = StrobeSpec(interval_s=0.05)
fast = build_composite(scene, simulate_scene(scene), spec)
slow = build_composite(scene, simulate_scene(scene, [DegradationSpec.time_dilation(2.43)]), spec)
print("gap ratio:", fast.gaps_px("ball0")[3] / slow.gaps_px("ball0")[3], "vs", 2.43**2)
write_svg(slow, out / "pair_slow.svg")
print("wrote", sorted(p.name for p in out.iterdir()), "to", out)
