"""Outer refinement loop and the per-cube support tests.

The loop keeps a union of hypercubes that over-approximates the set of
subgame-perfect equilibrium payoff profiles.  Each pass tests every cube:
a cube survives when some (mixed) action profile and continuation payoffs
inside the current union make every unilateral deviation approximately
unprofitable.  A pass that removes nothing either terminates (every cube
meets the stopping criterion) or splits all cubes in half.

Three back-ends implement the cube test:

* pure             - pure action profiles, continuation inside one cluster,
* mixed-clusters   - mixed profiles, per-action continuations inside one
                     hyperrectangular cluster of the union,
* mixed-correlated - mixed profiles with a public correlation device, so
                     continuations may lie anywhere in the convex hull of
                     the union.

The mixed back-ends emulate the associated mixed-integer programs exactly
by support enumeration (see the feasibility module).  Singleton patterns
and obviously hopeless patterns are decided in closed form before touching
the LP; the closed forms are algebraically equivalent to the LP and are
cross-checked against it in the test suite.

The default loop recomputes the punishment floor and the union context
before every cube test, matching the reference pseudocode exactly.  The
opt-in ``frozen_passes`` variant freezes both per pass and applies removals
at the pass end; it can only delay removals by one pass (never removes
more) and makes large runs much cheaper.  Between passes the previous
certificate of a cube is replayed against the current context before any
fresh search runs; a valid stored witness proves feasibility, so this is a
pure optimisation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .feasibility import (FEAS_TOL, UNDECIDED, LinearSystem, SupportPattern,
                          SupportSolution, alpha_var,
                          enumerate_support_patterns, solve_support_program,
                          w_var, wp_var)
from .game import MixedProfile, StageGame, payoff_bounds
from .geometry import (Cluster, CubeSet, HalfPlane, Hypercube, get_clusters,
                       get_halfplanes, hull_vertices, initial_cube,
                       min_origin, split_all)

MODES = ("pure", "mixed-clusters", "mixed-correlated")
COMPLETIONS = ("bound", "exact")


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters: discount factor, target precision, back-end, and the
    stopping rule.  ``max_generations`` is a hard guard on split depth."""

    gamma: float
    epsilon: float
    mode: str = "mixed-correlated"
    completion: str = "bound"
    max_generations: int = 30
    frozen_passes: bool = False

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.completion not in COMPLETIONS:
            raise ValueError(f"completion must be one of {COMPLETIONS}")

    @property
    def bound_threshold(self) -> float:
        """Side length below which every cube is complete (worst case)."""
        return self.epsilon * (1.0 - self.gamma) / 2.0


@dataclass(frozen=True)
class SupportCertificate:
    """A feasible witness for one cube, with the context it was checked in.

    Pure certificates hold the action profile and the continuation payoff
    point; mixed and correlated certificates carry a full SupportSolution.
    ``conditional_payoffs`` and ``br_values`` cache the stage payoffs the
    replay checks need, and ``halfplanes`` is a shared reference to the
    hull the certificate was verified against (correlated only).
    """

    cube_index: tuple[int, ...]
    cube_origin: tuple[float, ...]
    side: float
    kind: str                                    # pure | mixed | correlated
    w_floor: tuple[float, ...]
    profile: Optional[tuple[int, ...]] = None
    continuation: Optional[tuple[float, ...]] = None
    solution: Optional[SupportSolution] = None
    cluster: Optional[Cluster] = None
    halfplanes: Optional[tuple[HalfPlane, ...]] = None
    conditional_payoffs: Optional[tuple[tuple[float, ...], ...]] = None
    br_values: Optional[tuple[float, ...]] = None

    def mixed_profile(self, game: StageGame) -> MixedProfile:
        if self.solution is not None:
            return self.solution.alpha
        return MixedProfile.point_mass(game, self.profile)

    def supports(self, game: StageGame) -> tuple[tuple[int, ...], ...]:
        if self.solution is not None:
            return tuple(self.solution.alpha.support(i)
                         for i in range(game.player_count))
        return tuple((a,) for a in self.profile)

    def continuation_point(self, profile) -> tuple[float, ...]:
        """Continuation payoff profile after an in-support outcome."""
        if self.kind == "pure":
            return self.continuation
        return tuple(self.solution.continuation(i, a)
                     for i, a in enumerate(profile))


@dataclass
class IterationStats:
    iteration: int
    generation: int
    side: float
    cubes_start: int
    removed: int
    split: bool
    wall_time: float


@dataclass
class SolveSnapshot:
    """Light view of the cube set at the end of one pass."""

    iteration: int
    generation: int
    side: float
    base: tuple[float, ...]
    indices: tuple[tuple[int, ...], ...]

    def origins(self) -> list[tuple[float, ...]]:
        return [tuple(b + k * self.side for b, k in zip(self.base, ix))
                for ix in self.indices]


@dataclass
class SolveReport:
    """Outcome of a run: per-pass trace, the final cube set, and one
    certificate per surviving cube.  An empty final set is a reported
    result (status ``empty``), not an exception."""

    status: str                       # converged | empty | generation_guard
    final: CubeSet
    certificates: dict
    iterations: list[IterationStats] = field(default_factory=list)
    config: Optional[SolverConfig] = None

    @property
    def empty(self) -> bool:
        return len(self.final) == 0

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def trace_key(self):
        """Deterministic part of the report, for run-equality checks."""
        return (self.status,
                tuple((s.iteration, s.generation, s.side, s.cubes_start,
                       s.removed, s.split) for s in self.iterations),
                tuple(self.final.indices()))


# -- shared context of one cube test ------------------------------------------

@dataclass
class _Context:
    version: int
    w_floor: tuple[float, ...]
    clusters: Optional[list[Cluster]] = None
    halfplanes: Optional[tuple[HalfPlane, ...]] = None
    hull_lo: Optional[tuple[float, ...]] = None
    hull_hi: Optional[tuple[float, ...]] = None


def _build_context(C: CubeSet, mode: str) -> _Context:
    ctx = _Context(version=C.version, w_floor=C.min_origin())
    if mode in ("pure", "mixed-clusters"):
        ctx.clusters = get_clusters(C)
    else:
        ctx.halfplanes = tuple(get_halfplanes(C))
        verts = hull_vertices(C)
        ctx.hull_lo = (min(v[0] for v in verts), min(v[1] for v in verts))
        ctx.hull_hi = (max(v[0] for v in verts), max(v[1] for v in verts))
    return ctx


# -- constraint systems ---------------------------------------------------------

def pure_support_system(cube: Hypercube, cluster: Cluster, w_floor,
                        game: StageGame, gamma: float,
                        profile) -> LinearSystem:
    """Linear system deciding whether `profile` supports `cube` with a
    continuation inside `cluster`: the utility recursion pins w' to the
    cube, the continuation stays in the cluster, and no player gains by
    deviating to a best response followed by the punishment floor."""
    n = game.player_count
    sys = LinearSystem()
    for i in range(n):
        sys.add_variable(w_var(i, 0), low=cluster.origin[i],
                         high=cluster.origin[i] + cluster.lengths[i])
        sys.add_variable(wp_var(i, 0), low=cube.origin[i],
                         high=cube.origin[i] + cube.side)
    for i in range(n):
        r_i = game.payoff_to(profile, i)
        br = _pure_best_deviation(game, profile, i)
        sys.add_constraint({wp_var(i, 0): 1.0, w_var(i, 0): -gamma},
                           "=", (1.0 - gamma) * r_i)
        sys.add_constraint({w_var(i, 0): gamma}, ">=",
                           (1.0 - gamma) * (br - r_i) + gamma * w_floor[i])
    return sys


def _pure_best_deviation(game: StageGame, profile, player: int) -> float:
    best = -np.inf
    for a in range(game.action_count(player)):
        p = tuple(a if j == player else profile[j]
                  for j in range(game.player_count))
        best = max(best, game.payoff_to(p, player))
    return best


def _conditional_payoff_table(game: StageGame, alpha: MixedProfile):
    """r_i(a_i | alpha) for every player and own action (two players)."""
    table = []
    for i in range(2):
        opp = 1 - i
        row = []
        for a in range(game.action_count(i)):
            val = 0.0
            for b, pb in enumerate(alpha.probs[opp]):
                if pb > 0.0:
                    prof = (a, b) if i == 0 else (b, a)
                    val += float(pb) * game.payoff_to(prof, i)
            row.append(val)
        table.append(tuple(row))
    return tuple(table)


def mixed_cluster_system(cube: Hypercube, cluster: Cluster, w_floor,
                         game: StageGame, gamma: float,
                         pattern: SupportPattern) -> LinearSystem:
    """The support LP for one cluster and one support pattern."""
    sys = LinearSystem()
    side = cube.side
    for i in range(2):
        supp = set(pattern.supports[i])
        for a in range(game.action_count(i)):
            if a in supp:
                sys.add_variable(alpha_var(i, a), low=0.0, high=1.0)
                sys.add_variable(w_var(i, a), low=cluster.origin[i],
                                 high=cluster.origin[i] + cluster.lengths[i])
                sys.add_variable(wp_var(i, a), low=cube.origin[i],
                                 high=cube.origin[i] + side)
            else:
                sys.add_variable(w_var(i, a), low=w_floor[i],
                                 high=w_floor[i] + side)
                sys.add_variable(wp_var(i, a), high=cube.origin[i])
        sys.add_constraint({alpha_var(i, a): 1.0 for a in pattern.supports[i]},
                           "=", 1.0)
    _add_recursion_rows(sys, game, gamma, pattern)
    return sys


def correlated_support_system(cube: Hypercube, halfplanes, w_floor, bounds,
                              game: StageGame, gamma: float,
                              pattern: SupportPattern) -> LinearSystem:
    """Support LP for the public-correlation back-end: no cluster, instead
    every in-support continuation pair must satisfy the half-planes of the
    convex hull of the current union."""
    sys = LinearSystem()
    side = cube.side
    for i in range(2):
        supp = set(pattern.supports[i])
        for a in range(game.action_count(i)):
            if a in supp:
                sys.add_variable(alpha_var(i, a), low=0.0, high=1.0)
                sys.add_variable(w_var(i, a), low=bounds.low, high=bounds.high)
                sys.add_variable(wp_var(i, a), low=cube.origin[i],
                                 high=cube.origin[i] + side)
            else:
                sys.add_variable(w_var(i, a), low=w_floor[i],
                                 high=w_floor[i] + side)
                sys.add_variable(wp_var(i, a), high=cube.origin[i])
        sys.add_constraint({alpha_var(i, a): 1.0 for a in pattern.supports[i]},
                           "=", 1.0)
    _add_recursion_rows(sys, game, gamma, pattern)
    for a1 in pattern.supports[0]:
        for a2 in pattern.supports[1]:
            for pl in halfplanes:
                sys.add_constraint({w_var(0, a1): pl.phi, w_var(1, a2): pl.psi},
                                   "<=", pl.lam)
    return sys


def _add_recursion_rows(sys: LinearSystem, game: StageGame, gamma: float,
                        pattern: SupportPattern) -> None:
    # w'_i(a) = (1-g) * sum_b alpha_opp(b) r_i(a, b) + g * w_i(a), all actions
    for i in range(2):
        opp = 1 - i
        for a in range(game.action_count(i)):
            coeffs = {wp_var(i, a): 1.0, w_var(i, a): -gamma}
            for b in pattern.supports[opp]:
                prof = (a, b) if i == 0 else (b, a)
                coeffs[alpha_var(opp, b)] = \
                    coeffs.get(alpha_var(opp, b), 0.0) \
                    - (1.0 - gamma) * game.payoff_to(prof, i)
            sys.add_constraint(coeffs, "=", 0.0)


# -- closed-form deciders --------------------------------------------------------

def _pure_witness(cube_origin, side, cluster, w_floor, game, gamma, profile,
                  r_vals, br_vals):
    """Interval solution of the pure support system; None if infeasible."""
    w = []
    for i in range(game.player_count):
        lo = cluster.origin[i]
        hi = cluster.origin[i] + cluster.lengths[i]
        if gamma > 0.0:
            lo = max(lo,
                     (cube_origin[i] - (1.0 - gamma) * r_vals[i]) / gamma,
                     w_floor[i] + (1.0 - gamma) * (br_vals[i] - r_vals[i]) / gamma)
            hi = min(hi, (cube_origin[i] + side - (1.0 - gamma) * r_vals[i]) / gamma)
        else:
            if not cube_origin[i] - FEAS_TOL <= r_vals[i] <= cube_origin[i] + side + FEAS_TOL:
                return None
            if r_vals[i] < br_vals[i] - FEAS_TOL:
                return None
        if lo > hi + FEAS_TOL:
            return None
        w.append(min(lo, hi))
    return tuple(w)


def _out_of_support_ok(cube_origin, w_floor, gamma, cond, supports):
    for i in range(2):
        in_supp = set(supports[i])
        for a in range(len(cond[i])):
            if a in in_supp:
                continue
            if (1.0 - gamma) * cond[i][a] + gamma * w_floor[i] \
                    > cube_origin[i] + FEAS_TOL:
                return False
    return True


def _point_mass_solution(game, gamma, pattern, w_floor, w_in, cond):
    """Assemble the SupportSolution for a feasible singleton pattern."""
    profile = tuple(s[0] for s in pattern.supports)
    conts, utils = [], []
    for i in range(2):
        crow, urow = [], []
        for a in range(game.action_count(i)):
            wv = w_in[i] if a == profile[i] else w_floor[i]
            crow.append(wv)
            urow.append((1.0 - gamma) * cond[i][a] + gamma * wv)
        conts.append(tuple(crow))
        utils.append(tuple(urow))
    return SupportSolution(MixedProfile.point_mass(game, profile),
                           tuple(conts), tuple(utils), pattern)


def _singleton_cluster_solution(cube_origin, side, cluster, w_floor, game,
                                gamma, pattern):
    profile = tuple(s[0] for s in pattern.supports)
    cond = _conditional_payoff_table(game, MixedProfile.point_mass(game, profile))
    if not _out_of_support_ok(cube_origin, w_floor, gamma, cond, pattern.supports):
        return None
    w_in = []
    for i in range(2):
        r_i = cond[i][profile[i]]
        c_lo = cluster.origin[i]
        c_hi = cluster.origin[i] + cluster.lengths[i]
        if gamma > 0.0:
            lo = max(cube_origin[i], (1.0 - gamma) * r_i + gamma * c_lo)
            hi = min(cube_origin[i] + side, (1.0 - gamma) * r_i + gamma * c_hi)
            if lo > hi + FEAS_TOL:
                return None
            wp = min(lo, hi)
            w = (wp - (1.0 - gamma) * r_i) / gamma
            w = min(max(w, c_lo), c_hi)
        else:
            if not cube_origin[i] - FEAS_TOL <= r_i <= cube_origin[i] + side + FEAS_TOL:
                return None
            w = c_lo
        w_in.append(w)
    return _point_mass_solution(game, gamma, pattern, w_floor, w_in, cond)


def _clip_box(lo, hi, planes, tol=FEAS_TOL):
    """Intersection polygon of the box [lo, hi] with the half-planes
    (Sutherland-Hodgman clipping; tolerant of degenerate boxes)."""
    poly = [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]
    for pl in planes:
        if not poly:
            return []
        vals = [pl.phi * x + pl.psi * y - pl.lam for x, y in poly]
        out = []
        k = len(poly)
        for idx in range(k):
            cur, nxt = poly[idx], poly[(idx + 1) % k]
            vc, vn = vals[idx], vals[(idx + 1) % k]
            if vc <= tol:
                out.append(cur)
            if (vc <= tol) != (vn <= tol):
                denom = vc - vn
                if abs(denom) > 1e-15:
                    t = vc / denom
                    out.append((cur[0] + t * (nxt[0] - cur[0]),
                                cur[1] + t * (nxt[1] - cur[1])))
        poly = out
    return poly


def _singleton_correlated_solution(cube_origin, side, halfplanes, w_floor,
                                   bounds, game, gamma, pattern):
    profile = tuple(s[0] for s in pattern.supports)
    cond = _conditional_payoff_table(game, MixedProfile.point_mass(game, profile))
    if not _out_of_support_ok(cube_origin, w_floor, gamma, cond, pattern.supports):
        return None
    lo, hi = [], []
    for i in range(2):
        r_i = cond[i][profile[i]]
        if gamma > 0.0:
            wlo = max(bounds.low, (cube_origin[i] - (1.0 - gamma) * r_i) / gamma)
            whi = min(bounds.high,
                      (cube_origin[i] + side - (1.0 - gamma) * r_i) / gamma)
        else:
            if not cube_origin[i] - FEAS_TOL <= r_i <= cube_origin[i] + side + FEAS_TOL:
                return None
            wlo, whi = bounds.low, bounds.high
        if wlo > whi + FEAS_TOL:
            return None
        lo.append(wlo)
        hi.append(max(whi, wlo))
    poly = _clip_box(tuple(lo), tuple(hi), halfplanes)
    if not poly:
        return None
    w_in = min(poly)
    return _point_mass_solution(game, gamma, pattern, w_floor, list(w_in), cond)


def _screen_pattern(cube_origin, side, pattern, game, gamma, w_floor,
                    win_lo, win_hi):
    """Cheap necessary conditions for a pattern; False only when the pattern
    is certainly infeasible regardless of the mixture probabilities."""
    for i in range(2):
        opp = 1 - i
        supp_opp = pattern.supports[opp]
        in_supp = set(pattern.supports[i])
        for a in range(game.action_count(i)):
            vals = []
            for b in supp_opp:
                prof = (a, b) if i == 0 else (b, a)
                vals.append(game.payoff_to(prof, i))
            if a in in_supp:
                lo = (1.0 - gamma) * min(vals) + gamma * win_lo[i]
                hi = (1.0 - gamma) * max(vals) + gamma * win_hi[i]
                if hi < cube_origin[i] - FEAS_TOL \
                        or lo > cube_origin[i] + side + FEAS_TOL:
                    return False
            else:
                if (1.0 - gamma) * min(vals) + gamma * w_floor[i] \
                        > cube_origin[i] + FEAS_TOL:
                    return False
    return True


# -- cube tests -------------------------------------------------------------------

def cube_supported_pure(cube: Hypercube, C: CubeSet, w_floor, game: StageGame,
                        gamma: float,
                        clusters: Optional[Sequence[Cluster]] = None
                        ) -> Optional[SupportCertificate]:
    """First (cluster, pure profile) witness supporting the cube, or None.

    Clusters are scanned in construction order and profiles in lexicographic
    order, so the result is deterministic.
    """
    if clusters is None:
        clusters = get_clusters(C)
    n = game.player_count
    tables = []
    for profile in game.profiles():
        r_vals = tuple(game.payoff_to(profile, i) for i in range(n))
        br_vals = tuple(_pure_best_deviation(game, profile, i) for i in range(n))
        tables.append((profile, r_vals, br_vals))
    for cluster in clusters:
        for profile, r_vals, br_vals in tables:
            w = _pure_witness(cube.origin, cube.side, cluster, w_floor, game,
                              gamma, profile, r_vals, br_vals)
            if w is not None:
                return SupportCertificate(
                    cube_index=_index_of(C, cube), cube_origin=cube.origin,
                    side=cube.side, kind="pure", w_floor=tuple(w_floor),
                    profile=profile, continuation=w, cluster=cluster,
                    conditional_payoffs=(r_vals,), br_values=br_vals)
    return None


def _index_of(C: CubeSet, cube: Hypercube) -> tuple[int, ...]:
    return tuple(round((o - b) / C.side) for o, b in zip(cube.origin, C.base))


def cube_supported_mixed(cube: Hypercube, C: CubeSet, w_floor,
                         game: StageGame, gamma: float,
                         clusters: Optional[Sequence[Cluster]] = None,
                         patterns: Optional[Sequence[SupportPattern]] = None
                         ) -> Optional[SupportCertificate]:
    """Mixed-strategy cube test over hyperrectangular clusters (2 players).

    Per cluster, the support program runs with the cluster's constraint
    builder; the minimum-support enumeration order means pure certificates
    are found before any genuinely mixed one.
    """
    if game.player_count != 2:
        raise ValueError("mixed cube tests require exactly two players")
    if clusters is None:
        clusters = get_clusters(C)
    if patterns is None:
        patterns = enumerate_support_patterns(
            [game.action_count(i) for i in range(2)])
    for cluster in clusters:
        win_lo = cluster.origin
        win_hi = tuple(o + l for o, l in zip(cluster.origin, cluster.lengths))

        def shortcut(pattern, _cl=cluster, _lo=win_lo, _hi=win_hi):
            if pattern.is_pure():
                return _singleton_cluster_solution(
                    cube.origin, cube.side, _cl, w_floor, game, gamma, pattern)
            if not _screen_pattern(cube.origin, cube.side, pattern, game,
                                   gamma, w_floor, _lo, _hi):
                return None
            return UNDECIDED

        def builder(pattern, _cl=cluster):
            return mixed_cluster_system(cube, _cl, w_floor, game, gamma, pattern)

        sol = solve_support_program(builder, game, patterns=patterns,
                                    shortcut=shortcut)
        if sol is not None:
            return SupportCertificate(
                cube_index=_index_of(C, cube), cube_origin=cube.origin,
                side=cube.side, kind="mixed", w_floor=tuple(w_floor),
                solution=sol, cluster=cluster,
                conditional_payoffs=_conditional_payoff_table(game, sol.alpha))
    return None


def cube_supported_correlated(cube: Hypercube, C: CubeSet, game: StageGame,
                              gamma: float,
                              halfplanes: Optional[Sequence[HalfPlane]] = None,
                              w_floor=None, hull_box=None,
                              patterns: Optional[Sequence[SupportPattern]] = None
                              ) -> Optional[SupportCertificate]:
    """Cube test with public correlation: continuations anywhere in the
    convex hull of the union.  No cluster loop; the hull replaces clusters."""
    if game.player_count != 2:
        raise ValueError("the correlated cube test requires exactly two players")
    if halfplanes is None:
        halfplanes = tuple(get_halfplanes(C))
    if w_floor is None:
        w_floor = min_origin(C)
    bounds = payoff_bounds(game)
    if hull_box is None:
        verts = hull_vertices(C)
        hull_box = ((min(v[0] for v in verts), min(v[1] for v in verts)),
                    (max(v[0] for v in verts), max(v[1] for v in verts)))
    win_lo = tuple(max(lo, bounds.low) for lo in hull_box[0])
    win_hi = tuple(min(hi, bounds.high) for hi in hull_box[1])
    if patterns is None:
        patterns = enumerate_support_patterns(
            [game.action_count(i) for i in range(2)])

    def shortcut(pattern):
        if pattern.is_pure():
            return _singleton_correlated_solution(
                cube.origin, cube.side, halfplanes, w_floor, bounds, game,
                gamma, pattern)
        if not _screen_pattern(cube.origin, cube.side, pattern, game, gamma,
                               w_floor, win_lo, win_hi):
            return None
        return UNDECIDED

    def builder(pattern):
        return correlated_support_system(cube, halfplanes, w_floor, bounds,
                                         game, gamma, pattern)

    sol = solve_support_program(builder, game, patterns=patterns,
                                shortcut=shortcut)
    if sol is None:
        return None
    return SupportCertificate(
        cube_index=_index_of(C, cube), cube_origin=cube.origin,
        side=cube.side, kind="correlated", w_floor=tuple(w_floor),
        solution=sol, halfplanes=tuple(halfplanes),
        conditional_payoffs=_conditional_payoff_table(game, sol.alpha))


# -- certificate replay --------------------------------------------------------------

def certificate_residual(cert: SupportCertificate, game: StageGame,
                         gamma: float, cube_origin=None, side=None,
                         w_floor=None, clusters=None, halfplanes=None) -> float:
    """Largest constraint violation of a certificate against a context.

    Defaults to the certificate's recorded context.  Out-of-support
    continuations are re-anchored at the punishment floor (always allowed),
    so only the floor-dependent inequality is checked for them.
    """
    cube_origin = cert.cube_origin if cube_origin is None else cube_origin
    side = cert.side if side is None else side
    w_floor = cert.w_floor if w_floor is None else w_floor
    worst = 0.0
    if cert.kind == "pure":
        w = cert.continuation
        r_vals = cert.conditional_payoffs[0]
        pool = clusters if clusters is not None else [cert.cluster]
        best = np.inf
        for s in pool:
            viol = max(max(s.origin[i] - w[i], w[i] - s.origin[i] - s.lengths[i])
                       for i in range(len(w)))
            best = min(best, viol)
        worst = max(worst, best)
        for i in range(len(w)):
            wp = (1.0 - gamma) * r_vals[i] + gamma * w[i]
            worst = max(worst, cube_origin[i] - wp, wp - cube_origin[i] - side)
            worst = max(worst, (1.0 - gamma) * (cert.br_values[i] - r_vals[i])
                        + gamma * (w_floor[i] - w[i]))
        return worst

    sol = cert.solution
    cond = cert.conditional_payoffs
    supports = sol.pattern.supports
    if cert.kind == "mixed":
        pool = clusters if clusters is not None else [cert.cluster]
        best = np.inf
        for s in pool:
            viol = 0.0
            for i in range(2):
                for a in supports[i]:
                    wv = sol.continuation(i, a)
                    viol = max(viol, s.origin[i] - wv,
                               wv - s.origin[i] - s.lengths[i])
            best = min(best, viol)
        worst = max(worst, best)
    else:
        planes = halfplanes if halfplanes is not None else cert.halfplanes
        for a1 in supports[0]:
            w1 = sol.continuation(0, a1)
            for a2 in supports[1]:
                w2 = sol.continuation(1, a2)
                for pl in planes:
                    worst = max(worst, pl.phi * w1 + pl.psi * w2 - pl.lam)
    for i in range(2):
        in_supp = set(supports[i])
        for a in range(game.action_count(i)):
            if a in in_supp:
                wp = (1.0 - gamma) * cond[i][a] + gamma * sol.continuation(i, a)
                worst = max(worst, cube_origin[i] - wp,
                            wp - cube_origin[i] - side)
            else:
                dev = (1.0 - gamma) * cond[i][a] + gamma * w_floor[i]
                worst = max(worst, dev - cube_origin[i])
    return worst


def verify_certificate(cert: SupportCertificate, game: StageGame, gamma: float,
                       C: Optional[CubeSet] = None) -> bool:
    """Replay a certificate at the 1e-7 feasibility tolerance.

    With no cube set the recorded context is used; with `C` the certificate
    is checked against the current union (floor, clusters or hull).
    """
    if C is None:
        return certificate_residual(cert, game, gamma) <= FEAS_TOL
    clusters = halfplanes = None
    if cert.kind in ("pure", "mixed"):
        clusters = get_clusters(C)
    else:
        halfplanes = get_halfplanes(C)
    return certificate_residual(
        cert, game, gamma, cube_origin=C.origin_of(cert.cube_index),
        side=C.side, w_floor=C.min_origin(), clusters=clusters,
        halfplanes=halfplanes) <= FEAS_TOL


def _refresh_certificate(cert: SupportCertificate, ctx: _Context, gamma: float,
                         game: StageGame) -> SupportCertificate:
    """Record the current context on a replayed certificate, re-anchoring
    out-of-support continuations at the current floor."""
    if cert.w_floor == ctx.w_floor:
        if cert.kind == "correlated" and cert.halfplanes is not ctx.halfplanes:
            return replace(cert, halfplanes=ctx.halfplanes)
        return cert
    if cert.kind == "pure":
        return replace(cert, w_floor=ctx.w_floor)
    sol = cert.solution
    cond = cert.conditional_payoffs
    conts, utils = [], []
    for i in range(2):
        supp = set(sol.pattern.supports[i])
        crow = list(sol.continuations[i])
        urow = list(sol.utilities[i])
        for a in range(game.action_count(i)):
            if a not in supp:
                crow[a] = ctx.w_floor[i]
                urow[a] = (1.0 - gamma) * cond[i][a] + gamma * ctx.w_floor[i]
        conts.append(tuple(crow))
        utils.append(tuple(urow))
    new_sol = SupportSolution(sol.alpha, tuple(conts), tuple(utils), sol.pattern)
    extra = {"halfplanes": ctx.halfplanes} if cert.kind == "correlated" else {}
    return replace(cert, w_floor=ctx.w_floor, solution=new_sol, **extra)


def _replay_ok(cert: SupportCertificate, ctx: _Context, cube_origin, side,
               game: StageGame, gamma: float) -> bool:
    return certificate_residual(
        cert, game, gamma, cube_origin=cube_origin, side=side,
        w_floor=ctx.w_floor, clusters=ctx.clusters,
        halfplanes=ctx.halfplanes) <= FEAS_TOL


# -- stopping criterion ----------------------------------------------------------------

def cube_completed(cube: Hypercube, C: CubeSet, config: SolverConfig,
                   game: Optional[StageGame] = None,
                   certificates: Optional[dict] = None) -> bool:
    """Stopping test for one cube.

    Mode ``bound``: the side length is at or below epsilon*(1-gamma)/2,
    which is sufficient by the error and deviation-gain bounds.  Mode
    ``exact``: extract the automaton that starts in this cube and check the
    two conditions directly (payoff gap and best unilateral deviation gain
    both at most epsilon).
    """
    if config.completion == "bound":
        return C.side <= config.bound_threshold + 1e-12
    if game is None or certificates is None:
        raise ValueError("exact completion needs the game and certificates")
    from .automaton import automaton_value, best_deviation, extract_automaton

    M = extract_automaton(C, certificates, cube.center, game)
    u = automaton_value(M, config.gamma)[M.initial]
    for i in range(game.player_count):
        if cube.origin[i] - u[i] > config.epsilon + 1e-9:
            return False
        if best_deviation(M, i, config.gamma) - u[i] > config.epsilon + 1e-9:
            return False
    return True


def _all_completed(C: CubeSet, config: SolverConfig, game: StageGame,
                   certificates: dict) -> bool:
    # Termination can only fire on a pass with no withdrawals, and on such a
    # pass the set never changes mid-pass, so evaluating the completion
    # flags at the end of the pass is exactly equivalent to the per-cube
    # check inside the loop.
    if config.completion == "bound":
        return C.side <= config.bound_threshold + 1e-12
    from .automaton import automaton_value, build_full_automaton, deviation_values

    M = build_full_automaton(C, certificates, game)
    u = automaton_value(M, config.gamma)
    origins = np.array([st.cube.origin for st in M.states])
    for i in range(game.player_count):
        if np.any(origins[:, i] - u[:, i] > config.epsilon + 1e-9):
            return False
        dev = deviation_values(M, i, config.gamma)
        if np.any(dev - u[:, i] > config.epsilon + 1e-9):
            return False
    return True


# -- the refinement loop -----------------------------------------------------------------

def solve(game: StageGame, config: SolverConfig,
          snapshot_callback: Optional[Callable[[SolveSnapshot], None]] = None
          ) -> SolveReport:
    """Run the refinement loop until every cube is complete.

    Follows the reference pseudocode literally: sequential pass over cubes
    in deterministic (lexicographic) order, punishment floor recomputed
    before every cube test, in-place removal of unsupported cubes, and a
    full split when a pass removes nothing while some cube is incomplete.
    Termination requires a pass with no removal and all cubes complete; an
    empty set and a blown generation guard are reported as distinct
    statuses.
    """
    if config.mode != "pure" and game.player_count != 2:
        raise ValueError(f"mode {config.mode} requires exactly two players")
    bounds = payoff_bounds(game)
    C = initial_cube(bounds, game.player_count)
    patterns = None
    if config.mode != "pure":
        patterns = enumerate_support_patterns(
            [game.action_count(i) for i in range(game.player_count)])
    certificates: dict = {}
    trace: list[IterationStats] = []
    iteration = 0
    ctx_cache: dict = {"version": None, "ctx": None}

    def current_context() -> _Context:
        if ctx_cache["version"] != C.version:
            ctx_cache["ctx"] = _build_context(C, config.mode)
            ctx_cache["version"] = C.version
        return ctx_cache["ctx"]

    def search(cube: Hypercube, ctx: _Context) -> Optional[SupportCertificate]:
        if config.mode == "pure":
            return cube_supported_pure(cube, C, ctx.w_floor, game,
                                       config.gamma, clusters=ctx.clusters)
        if config.mode == "mixed-clusters":
            return cube_supported_mixed(cube, C, ctx.w_floor, game,
                                        config.gamma, clusters=ctx.clusters,
                                        patterns=patterns)
        return cube_supported_correlated(
            cube, C, game, config.gamma, halfplanes=ctx.halfplanes,
            w_floor=ctx.w_floor, hull_box=(ctx.hull_lo, ctx.hull_hi),
            patterns=patterns)

    def finish(status: str) -> SolveReport:
        return SolveReport(status=status, final=C, certificates=certificates,
                           iterations=trace, config=config)

    while True:
        iteration += 1
        started = time.perf_counter()
        order = list(C.indices())
        cubes_start = len(order)
        removed = 0
        pending_removals = []
        frozen_ctx = current_context() if config.frozen_passes else None
        for idx in order:
            ctx = frozen_ctx if config.frozen_passes else current_context()
            cube = C.cube_at(idx)
            cert = certificates.get(idx)
            if cert is not None and _replay_ok(cert, ctx, cube.origin,
                                               C.side, game, config.gamma):
                certificates[idx] = _refresh_certificate(cert, ctx,
                                                         config.gamma, game)
                continue
            cert = search(cube, ctx)
            if cert is not None:
                certificates[idx] = cert
                continue
            certificates.pop(idx, None)
            removed += 1
            if config.frozen_passes:
                pending_removals.append(idx)
            else:
                C.remove(idx)
                if len(C) == 0:
                    trace.append(IterationStats(
                        iteration, C.generation, C.side, cubes_start, removed,
                        False, time.perf_counter() - started))
                    _emit(snapshot_callback, iteration, C)
                    return finish("empty")
        for idx in pending_removals:
            C.remove(idx)
        if config.frozen_passes and len(C) == 0:
            trace.append(IterationStats(
                iteration, C.generation, C.side, cubes_start, removed, False,
                time.perf_counter() - started))
            _emit(snapshot_callback, iteration, C)
            return finish("empty")

        split = False
        done = False
        status = None
        if removed == 0:
            if _all_completed(C, config, game, certificates):
                done = True
                status = "converged"
            elif C.generation + 1 > config.max_generations:
                done = True
                status = "generation_guard"
            else:
                split = True
        trace.append(IterationStats(iteration, C.generation, C.side,
                                    cubes_start, removed, split,
                                    time.perf_counter() - started))
        _emit(snapshot_callback, iteration, C)
        if done:
            return finish(status)
        if split:
            C = split_all(C)
            certificates = _inherit_certificates(certificates, C, game,
                                                 config.gamma)


def _emit(callback, iteration: int, C: CubeSet) -> None:
    if callback is not None:
        callback(SolveSnapshot(iteration=iteration, generation=C.generation,
                               side=C.side, base=C.base,
                               indices=tuple(C.indices())))


def _utility_values(cert: SupportCertificate, dim: int,
                    gamma: float) -> list[float]:
    """The in-cube utility values of a certificate along one dimension."""
    if cert.kind == "pure":
        r = cert.conditional_payoffs[0][dim]
        return [(1.0 - gamma) * r + gamma * cert.continuation[dim]]
    sol = cert.solution
    return [sol.utility(dim, a) for a in sol.pattern.supports[dim]]


def _inherit_certificates(certificates: dict, C: CubeSet, game: StageGame,
                          gamma: float) -> dict:
    """After a split, hand each certificate down to the child cube that
    contains all its in-cube utilities.  Inherited certificates are replayed
    against the new context before being trusted, so this only saves the
    fresh searches that would reproduce them."""
    inherited = {}
    for idx, cert in certificates.items():
        child = []
        ok = True
        for i in range(len(idx)):
            values = _utility_values(cert, i, gamma)
            mid = cert.cube_origin[i] + cert.side / 2.0
            if all(v <= mid for v in values):
                child.append(2 * idx[i])
            elif all(v >= mid for v in values):
                child.append(2 * idx[i] + 1)
            else:
                ok = False
                break
        if not ok:
            continue
        child = tuple(child)
        if child in C:
            inherited[child] = replace(
                cert, cube_index=child, cube_origin=C.origin_of(child),
                side=C.side)
    return inherited
