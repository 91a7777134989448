"""The single-AGV layout where the target is walled in by other racks.

CA* finds no path because it never moves obstacles; the exact solver
relocates one first. Prints the ILP plan as ascii frames.
"""

from marpf.bench import load_layout, render_plan
from marpf.castar import NoPath, plan_baseline
from marpf.ilp_core import solve_min_horizon

inst = load_layout("blocked_corridor")
try:
    plan_baseline(inst)
    print("baseline: found a path")
except NoPath as exc:
    print(f"baseline: NoPath ({exc})")

rep = solve_min_horizon(inst)
print(f"ilp: makespan {rep.makespan}, status {rep.status.value}\n")
print(render_plan(inst, rep.plan, "ascii"))
