"""Run the bundled field mission and print how it unfolded.

    python3 demos/field_mission.py [out_dir]

Writes the same artifacts as ``tcsim run --export-svg``.
"""

import json
import sys
from pathlib import Path

from tcsim.cli import run_mission
from tcsim.scenario import bundled, load_scenario

out = Path(sys.argv[1] if len(sys.argv) > 1 else "field_mission_out")
sc = load_scenario(bundled("field_trial"))
code = run_mission(sc, out, export_svg=True)

summary = json.loads((out / "summary.json").read_text())
print("outcome:", summary["outcome"], summary["reason"] or "")
print("states: ", " -> ".join(summary["states"]))
print(f"sim time {summary['sim_time']:.1f} s, UGV drove {summary['ugv_distance']:.2f} m, "
      f"UAV flew {summary['uav_distance']:.2f} m")
print("anchor detected at", summary["anchor_detected"], "after", summary["hook_attempts"], "hook attempt(s)")

# first tick of every event type
seen = set()
for line in (out / "mission_log.jsonl").read_text().splitlines():
    rec = json.loads(line)
    for ev in rec["events"]:
        if ev["type"] not in seen:
            seen.add(ev["type"])
            print(f"  t={rec['time']:6.1f}  {ev['type']}")
print("top view:", out / "top_view.svg")
sys.exit(code)
