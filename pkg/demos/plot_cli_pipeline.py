"""
The command-line pipeline
=========================

gen-scenes writes a manifest, simulate writes one CSV per (scene, seed),
eval turns them into a JSON report. A scene whose ball hovers past the end
of the clip shows up as an error row instead of stopping the run.
"""

import json
import tempfile
from pathlib import Path

from gravlab.cli import main

work = Path(tempfile.mkdtemp())
manifest, traj, report = work / "m.json", work / "traj", work / "report.json"

main(["gen-scenes", "--count", "8", "--seed", "1", "--manifest", str(manifest)])

degs = work / "degradations.json"
degs.write_text(json.dumps({
    "schema_version": 1,
    "degradations": [{"kind": "Hover", "release_delay_s": 5.0, "scenes": ["single-002"]}],
}))
main(["simulate", "--manifest", str(manifest), "--degradations", str(degs),
      "--out-dir", str(traj), "--seeds", "42", "123"])
main(["eval", "--manifest", str(manifest), "--traj-dir", str(traj), "--out", str(report),
      "--seeds", "42", "123", "--split", "3", "4", "--scaling", "mean"])

# %%
doc = json.loads(report.read_text())
print("Raw mean:", doc["statistics"]["Raw"]["all"]["mean"])
print("errors:", [(r["scene_id"], r["error"]["kind"]) for r in doc["records"] if r["status"] == "error"])
