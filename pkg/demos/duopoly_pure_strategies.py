"""Pure-strategy solving on the duopoly game (reconstructed from Abreu 1988).

Each firm picks a low, medium or high output level.  The collusive outcome
(L,L) pays (10,10); the stage equilibrium (M,M) pays (7,7); the minmax
payoff is 0.  With enough patience, collusion is sustainable by credible
punishment paths whose value pins the deviator at the (0,0) floor, so both
(10,10) and (0,0) stay in the computed set.

This demo runs the pure back-end at a coarse precision to keep it quick.
"""

from pathlib import Path

import spegrid as sg

OUT = Path("demo_out/duopoly")
OUT.mkdir(parents=True, exist_ok=True)

game = sg.load_bundled("duopoly_abreu")
bounds = sg.payoff_bounds(game)
print("duopoly payoffs between", bounds.low, "and", bounds.high)
print("minmax payoffs:", [sg.minmax(game, i) for i in range(2)])

report = sg.solve(game, sg.SolverConfig(gamma=0.6, epsilon=2.0, mode="pure",
                                        frozen_passes=True))
print(f"\ngamma=0.6 pure: {report.status}, {len(report.final)} cubes of side "
      f"{report.final.side:g} after {len(report.iterations)} iterations")
for point in [(10.0, 10.0), (7.0, 7.0), (0.0, 0.0)]:
    print(f"  {point} in the set:",
          sg.locate(point, report.final) is not None)

path = OUT / "duopoly_pure.svg"
path.write_text(sg.render_svg([c.origin for c in report.final],
                              report.final.side, bounds,
                              title="duopoly, pure, gamma=0.6"))
print(f"wrote {path}")

M = sg.extract_automaton(report.final, report.certificates, (10.0, 10.0), game)
value = sg.automaton_value(M, 0.6)[M.initial]
print(f"\nautomaton at (10,10): {len(M)} states, value "
      f"{tuple(round(float(v), 3) for v in value)}")
for i in range(2):
    gain = sg.best_deviation(M, i, 0.6) - value[i]
    print(f"  player {i + 1} best deviation gain: {gain:.4f}")
