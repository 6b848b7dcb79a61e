"""Rock, Paper, Scissors: the set collapses to one point at any patience.

The game is symmetric zero-sum, so no payoff profile other than (0,0) can
be an equilibrium outcome of the repeated game, however patient the
players are.  The refinement keeps shaving cubes until only a small
neighbourhood of the origin survives, supported by the stationary uniform
mixture.
"""

from pathlib import Path

import spegrid as sg

OUT = Path("demo_out/rpc")
OUT.mkdir(parents=True, exist_ok=True)

game = sg.load_bundled("rock_paper_scissors")
bounds = sg.payoff_bounds(game)

report = sg.solve(game, sg.SolverConfig(gamma=0.7, epsilon=0.2,
                                        mode="mixed-correlated"))
print(f"gamma=0.7: {report.status}, {len(report.final)} cubes of side "
      f"{report.final.side:g} after {len(report.iterations)} iterations")
worst = max(max(abs(o), abs(o + report.final.side))
            for c in report.final for o in c.origin)
print(f"every surviving cube lies within {worst:.4f} of (0,0)")

cube = sg.locate((0.0, 0.0), report.final)
ix = tuple(round((o - b) / report.final.side)
           for o, b in zip(cube.origin, report.final.base))
cert = report.certificates[ix]
print("certificate at the origin cube: support sizes",
      [len(s) for s in cert.solution.pattern.supports],
      "with probabilities",
      [[round(float(p), 3) for p in probs]
       for probs in cert.solution.alpha.probs])

path = OUT / "rpc.svg"
path.write_text(sg.render_svg([c.origin for c in report.final],
                              report.final.side, bounds,
                              title="RPS, gamma=0.7"))
print(f"wrote {path}")
