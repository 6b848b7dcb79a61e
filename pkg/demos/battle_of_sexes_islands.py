"""Battle of the Sexes at a low discount factor: three islands.

With little patience, only the stage equilibria survive: the two pure
coordination outcomes worth (1,2) and (2,1) and the mixed equilibrium
worth (2/3,2/3).  The cube set splits into three separated islands, one
around each point.

The second half sweeps the approximation factor and prints a performance
table: tighter targets need more iterations and end at smaller cubes.
"""

from pathlib import Path

import spegrid as sg

OUT = Path("demo_out/bos")
OUT.mkdir(parents=True, exist_ok=True)

game = sg.load_bundled("battle_of_sexes")
bounds = sg.payoff_bounds(game)

report = sg.solve(game, sg.SolverConfig(gamma=0.05, epsilon=0.05,
                                        mode="mixed-clusters"))
print(f"gamma=0.05: {report.status}, {len(report.final)} cubes of side "
      f"{report.final.side:g}")
for target in [(1.0, 2.0), (2.0, 1.0), (2 / 3, 2 / 3)]:
    near = min(max(abs(o - t) for o, t in zip(c.origin, target))
               for c in report.final)
    print(f"  nearest cube origin to {tuple(round(t, 3) for t in target)}: "
          f"within {near:.3f}")
path = OUT / "bos_islands.svg"
path.write_text(sg.render_svg([c.origin for c in report.final],
                              report.final.side, bounds,
                              title="BoS, gamma=0.05"))
print(f"wrote {path}\n")

print("approximation sweep (gamma=0.05, cluster back-end)")
print("epsilon   final side   iterations   seconds")
import time

for epsilon in (0.5, 0.3, 0.2, 0.1, 0.05):
    t0 = time.perf_counter()
    report = sg.solve(game, sg.SolverConfig(gamma=0.05, epsilon=epsilon,
                                            mode="mixed-clusters"))
    dt = time.perf_counter() - t0
    print(f"{epsilon:7.3f}   {report.final.side:10.6f}   "
          f"{len(report.iterations):10d}   {dt:7.2f}")
