"""How the equilibrium payoff set of the repeated Prisoner's Dilemma
depends on the discount factor.

At a low discount factor the future barely matters, so the only thing the
players can sustain is the stage equilibrium (D,D) worth (0,0): the cube
set collapses onto that single point.  As the discount factor grows,
punishment threats gain bite and the set swells towards the whole region
of feasible, individually rational payoff profiles, including the
cooperative point (2,2).

Writes one SVG per run into demo_out/pd/.
"""

from pathlib import Path

import spegrid as sg

OUT = Path("demo_out/pd")
OUT.mkdir(parents=True, exist_ok=True)

game = sg.load_bundled("prisoners_dilemma")
bounds = sg.payoff_bounds(game)
print("Prisoner's Dilemma, payoffs between", bounds.low, "and", bounds.high)

for gamma, epsilon in [(0.05, 0.05), (0.3, 0.1), (0.7, 0.3)]:
    report = sg.solve(game, sg.SolverConfig(
        gamma=gamma, epsilon=epsilon, mode="mixed-correlated",
        frozen_passes=True))
    print(f"\ngamma={gamma}  epsilon={epsilon}  -> {report.status}, "
          f"{len(report.final)} cubes of side {report.final.side:g} after "
          f"{len(report.iterations)} iterations")
    for stats in report.iterations:
        print(f"  pass {stats.iteration:2d}: generation {stats.generation}, "
              f"{stats.cubes_start:5d} cubes, removed {stats.removed:4d}"
              + ("  (split)" if stats.split else ""))
    has_coop = sg.locate((2.0, 2.0), report.final) is not None
    print(f"  cooperative payoff (2,2) in the set: {has_coop}")
    svg = sg.render_svg([c.origin for c in report.final], report.final.side,
                        bounds, title=f"PD, gamma={gamma}")
    path = OUT / f"pd_gamma_{gamma}.svg"
    path.write_text(svg)
    print(f"  wrote {path}")
