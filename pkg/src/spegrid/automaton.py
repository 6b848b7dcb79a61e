"""Finite-automaton strategy profiles: extraction, evaluation, simulation.

Hypercubes of a converged set become automaton states.  Each state plays
the mixed action profile of its cube's certificate; in-support outcomes
transition to the cube containing the promised continuation (or, with
public correlation, to a lottery over hull-vertex cubes that averages to
it), and a unilateral out-of-support deviation by player i transitions to
player i's punishment state.  Deviations inside the support of a mixed
action are not observable, so they follow the equilibrium transition.

Automata are immutable after extraction; evaluation, deviation values and
simulation are read-only and may run concurrently.  The simulator owns its
random stream: one seeded generator serves both mixed-action sampling and
the public signal.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .game import MixedProfile, StageGame
from .geometry import CubeSet, Hypercube, get_halfplanes, hull_vertices, locate

# A transition is either a state index or a lottery of (weight, state index).
Transition = Union[int, tuple]

_LOCATE_TOL = 1e-6   # continuations carry LP tolerance; widen point location


@dataclass(frozen=True)
class AutomatonState:
    cube: Hypercube
    mixed: MixedProfile
    transitions: dict


@dataclass(frozen=True)
class PunishmentProfile:
    """Per-player punishment state and the payoff floor it enforces."""

    states: tuple[int, ...]
    floors: tuple[float, ...]


@dataclass(frozen=True)
class Automaton:
    """States, initial state, decision profile and transition function."""

    game: StageGame
    states: tuple[AutomatonState, ...]
    initial: int
    punishments: PunishmentProfile

    def __len__(self) -> int:
        return len(self.states)

    def supports(self, state: int) -> tuple[tuple[int, ...], ...]:
        st = self.states[state]
        return tuple(st.mixed.support(i)
                     for i in range(self.game.player_count))

    def to_text(self) -> str:
        """Structured text serialization of the automaton."""
        game = self.game
        lines = [f"states: {len(self.states)}", f"initial: {self.initial}"]
        for i, q in enumerate(self.punishments.states):
            lines.append(f"punishment_state {i + 1}: {q} "
                         f"floor {self.punishments.floors[i]!r}")
        for q, st in enumerate(self.states):
            origin = " ".join(repr(x) for x in st.cube.origin)
            lines.append(f"state {q} cube_origin {origin} side {st.cube.side!r}")
            for i in range(game.player_count):
                probs = " ".join(
                    f"{game.actions[i][a]}:{float(st.mixed.probs[i][a])!r}"
                    for a in st.mixed.support(i))
                lines.append(f"  play {i + 1}: {probs}")
            for profile in sorted(st.transitions):
                labels = ",".join(game.label_profile(profile))
                tr = st.transitions[profile]
                if isinstance(tr, int):
                    lines.append(f"  on {labels} -> {tr}")
                else:
                    lot = " ".join(f"{w!r}:{t}" for w, t in tr)
                    lines.append(f"  on {labels} -> lottery {lot}")
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        """Graph description (DOT) for visualization."""
        game = self.game
        out = ["digraph automaton {", "  rankdir=LR;"]
        for q, st in enumerate(self.states):
            parts = []
            for i in range(game.player_count):
                supp = st.mixed.support(i)
                if len(supp) == 1:
                    parts.append(game.actions[i][supp[0]])
                else:
                    parts.append("{" + ",".join(game.actions[i][a]
                                                for a in supp) + "}")
            shape = "doublecircle" if q == self.initial else "circle"
            out.append(f'  q{q} [label="{"/".join(parts)}", shape={shape}];')
        for q, st in enumerate(self.states):
            grouped: dict = {}
            for profile in sorted(st.transitions):
                tr = st.transitions[profile]
                label = ",".join(game.label_profile(profile))
                if isinstance(tr, int):
                    grouped.setdefault(tr, []).append(label)
                else:
                    for w, t in tr:
                        grouped.setdefault(t, []).append(f"{label} ({w:.3f})")
            for target, labels in sorted(grouped.items()):
                text = "\\n".join(labels)
                out.append(f'  q{q} -> q{target} [label="{text}"];')
        out.append("}")
        return "\n".join(out) + "\n"


def _punishment_cubes(C: CubeSet) -> tuple[list[tuple[int, ...]], list[float]]:
    indices = C.indices()
    n = C.dimension
    cubes, floors = [], []
    for i in range(n):
        best = min(ix[i] for ix in indices)
        cubes.append(min(ix for ix in indices if ix[i] == best))
        floors.append(C.base[i] + best * C.side)
    return cubes, floors


class _HullContext:
    # built lazily; only correlated certificates ever need it
    def __init__(self, C: CubeSet):
        self.C = C
        self._verts = None
        self._planes = None

    @property
    def verts(self):
        if self._verts is None:
            self._verts = hull_vertices(self.C)
        return self._verts

    @property
    def planes(self):
        if self._planes is None:
            self._planes = get_halfplanes(self.C)
        return self._planes


def _build_states(C: CubeSet, certificates: dict, game: StageGame,
                  seeds: Sequence[tuple[int, ...]],
                  everything: bool) -> tuple[list, dict]:
    """Worklist construction of states and transitions.

    Returns the state list (cube index, certificate, transitions) in
    discovery order plus the index map.  With ``everything`` set, all cubes
    become states regardless of reachability.
    """
    punish_cubes, _ = _punishment_cubes(C)
    hull = _HullContext(C)
    state_of: dict = {}
    order: list[tuple[int, ...]] = []

    def intern(ix) -> int:
        if ix not in state_of:
            state_of[ix] = len(order)
            order.append(ix)
        return state_of[ix]

    for ix in seeds:
        intern(ix)
    for ix in punish_cubes:
        intern(ix)
    if everything:
        for ix in C.indices():
            intern(ix)

    built: list = []
    cursor = 0
    while cursor < len(order):
        ix = order[cursor]
        cursor += 1
        cert = certificates.get(ix)
        if cert is None:
            raise ValueError(f"cube {ix} has no support certificate")
        supports = cert.supports(game)
        punish_states = [intern(pc) for pc in punish_cubes]
        transitions: dict = {}
        for profile in itertools.product(
                *(range(game.action_count(i))
                  for i in range(game.player_count))):
            deviators = [i for i, a in enumerate(profile)
                         if a not in supports[i]]
            if not deviators:
                point = cert.continuation_point(profile)
                target = locate(point, C, tol=_LOCATE_TOL)
                if target is not None:
                    tix = tuple(round((o - b) / C.side)
                                for o, b in zip(target.origin, C.base))
                    transitions[profile] = intern(tix)
                else:
                    lottery = decompose_into_vertices(point, C,
                                                      _hull=hull)
                    entries = []
                    for weight, vertex in lottery:
                        vc = locate(vertex, C, tol=1e-9)
                        if vc is None:
                            raise RuntimeError(
                                f"hull vertex {vertex} is outside the union")
                        vix = tuple(round((o - b) / C.side)
                                    for o, b in zip(vc.origin, C.base))
                        entries.append((weight, intern(vix)))
                    transitions[profile] = tuple(entries)
            else:
                # unilateral deviations are punished; simultaneous ones are
                # off-equilibrium and never reached, routed to the lowest
                # deviator's punishment state for totality
                transitions[profile] = punish_states[deviators[0]]
        built.append((ix, cert, transitions))
    return built, state_of


def _assemble(C: CubeSet, certificates: dict, game: StageGame,
              seeds, everything: bool, initial_index) -> Automaton:
    built, state_of = _build_states(C, certificates, game, seeds, everything)
    punish_cubes, floors = _punishment_cubes(C)
    states = tuple(
        AutomatonState(cube=C.cube_at(ix), mixed=cert.mixed_profile(game),
                       transitions=transitions)
        for ix, cert, transitions in built)
    return Automaton(
        game=game, states=states, initial=state_of[initial_index],
        punishments=PunishmentProfile(
            states=tuple(state_of[pc] for pc in punish_cubes),
            floors=tuple(floors)))


def extract_automaton(C: CubeSet, certificates: dict, v, game: StageGame,
                      mode: Optional[str] = None) -> Automaton:
    """Construct the automaton that approximately induces payoff profile v.

    v must lie in the union; every reachable cube must hold a certificate.
    The stored certificates are reused rather than re-derived so extraction
    is deterministic.  ``mode`` is accepted for symmetry with the solver but
    is inferred from the certificates.
    """
    start = locate(v, C, tol=1e-9)
    if start is None:
        raise ValueError(f"target payoff profile {tuple(v)} lies outside the union")
    six = tuple(round((o - b) / C.side) for o, b in zip(start.origin, C.base))
    return _assemble(C, certificates, game, seeds=[six], everything=False,
                     initial_index=six)


def build_full_automaton(C: CubeSet, certificates: dict,
                         game: StageGame) -> Automaton:
    """One automaton whose states are all cubes of the set; used to check
    every cube's payoff and deviation bounds in a single sweep."""
    first = C.indices()[0]
    return _assemble(C, certificates, game, seeds=[first], everything=True,
                     initial_index=first)


# -- evaluation ---------------------------------------------------------------

def _on_path_profiles(M: Automaton, state: int):
    st = M.states[state]
    supports = M.supports(state)
    for profile in itertools.product(*supports):
        p = 1.0
        for i, a in enumerate(profile):
            p *= float(st.mixed.probs[i][a])
        if p > 0.0:
            yield profile, p


def _transition_entries(M: Automaton):
    srcs, dsts, wts = [], [], []
    n = M.game.player_count
    R = np.zeros((len(M.states), n))
    for q in range(len(M.states)):
        st = M.states[q]
        for profile, p in _on_path_profiles(M, q):
            R[q] += p * M.game.payoff(profile)
            tr = st.transitions[profile]
            if isinstance(tr, int):
                srcs.append(q)
                dsts.append(tr)
                wts.append(p)
            else:
                for weight, t in tr:
                    srcs.append(q)
                    dsts.append(t)
                    wts.append(p * weight)
    return (np.array(srcs, dtype=np.int64), np.array(dsts, dtype=np.int64),
            np.array(wts), R)


def automaton_value(M: Automaton, gamma: float) -> np.ndarray:
    """Per-state discounted average payoff profiles, residual below 1e-9.

    Solves u(q) = (1-g) E[r] + g E[u(next)] over all states; lotteries are
    resolved in expectation.  Unique since gamma < 1.
    """
    srcs, dsts, wts, R = _transition_entries(M)
    Q, n = R.shape
    if gamma == 0.0:
        return R
    if Q <= 1500:
        P = np.zeros((Q, Q))
        np.add.at(P, (srcs, dsts), wts)
        return np.linalg.solve(np.eye(Q) - gamma * P, (1.0 - gamma) * R)
    u = R.copy()
    for _ in range(1000000):
        pu = np.empty_like(u)
        for c in range(n):
            pu[:, c] = np.bincount(srcs, weights=wts * u[dsts, c], minlength=Q)
        new = (1.0 - gamma) * R + gamma * pu
        step = np.max(np.abs(new - u))
        u = new
        if step <= 1e-9:
            return u
    raise RuntimeError("value evaluation did not converge")


def deviation_values(M: Automaton, player: int, gamma: float) -> np.ndarray:
    """Per-state value of the best unilateral deviation by `player`.

    Value iteration with the opponents' play fixed by the automaton.  The
    deviator maximises over all own pure actions; out-of-support actions
    transition to the deviator's punishment state, in-support ones follow
    the equilibrium transitions.  Iterates until the sup-norm change is at
    most 1e-9 * (1 - gamma).
    """
    game = M.game
    Q = len(M.states)
    A = game.action_count(player)
    imm = np.zeros((Q, A))
    srcs, dsts, wts = [], [], []
    others = [j for j in range(game.player_count) if j != player]
    for q in range(Q):
        st = M.states[q]
        opp_support = [st.mixed.support(j) for j in others]
        for a in range(A):
            row = q * A + a
            for combo in itertools.product(*opp_support):
                p = 1.0
                for j, b in zip(others, combo):
                    p *= float(st.mixed.probs[j][b])
                if p <= 0.0:
                    continue
                profile = [0] * game.player_count
                profile[player] = a
                for j, b in zip(others, combo):
                    profile[j] = b
                profile = tuple(profile)
                imm[q, a] += p * game.payoff_to(profile, player)
                tr = st.transitions[profile]
                if isinstance(tr, int):
                    srcs.append(row)
                    dsts.append(tr)
                    wts.append(p)
                else:
                    for weight, t in tr:
                        srcs.append(row)
                        dsts.append(t)
                        wts.append(p * weight)
    srcs = np.array(srcs, dtype=np.int64)
    dsts = np.array(dsts, dtype=np.int64)
    wts = np.array(wts)
    if gamma == 0.0:
        return imm.max(axis=1)
    V = np.zeros(Q)
    tol = 1e-9 * (1.0 - gamma)
    for _ in range(1000000):
        tv = np.bincount(srcs, weights=wts * V[dsts], minlength=Q * A)
        newV = ((1.0 - gamma) * imm + gamma * tv.reshape(Q, A)).max(axis=1)
        step = np.max(np.abs(newV - V))
        V = newV
        if step <= tol:
            return V
    raise RuntimeError("deviation value iteration did not converge")


def best_deviation(M: Automaton, player: int, gamma: float) -> float:
    """Value of the deviator's best strategy starting at the initial state."""
    return float(deviation_values(M, player, gamma)[M.initial])


# -- public correlation -----------------------------------------------------------

def decompose_into_vertices(point, C: CubeSet, _hull=None):
    """Write a point of the convex hull of the union as a lottery over at
    most three hull vertices (each of which is a cube vertex, hence lies
    inside a cube of the set).

    Fan triangulation anchored at the lexicographically smallest hull
    vertex; weights are non-negative, sum to one, and reconstruct the point
    to within 1e-9.  Raises ValueError for points outside the hull.
    """
    hull = _hull if _hull is not None else _HullContext(C)
    x, y = float(point[0]), float(point[1])
    for pl in hull.planes:
        if not pl.holds(x, y, tol=1e-9):
            raise ValueError(f"point {tuple(point)} lies outside the convex hull")
    verts = hull.verts
    for v in verts:
        if abs(v[0] - x) <= 1e-9 and abs(v[1] - y) <= 1e-9:
            return [(1.0, v)]
    if len(verts) == 1:
        return [(1.0, verts[0])]
    if len(verts) == 2:
        (x0, y0), (x1, y1) = verts
        span = max(abs(x1 - x0), abs(y1 - y0))
        t = (x - x0) / (x1 - x0) if abs(x1 - x0) >= abs(y1 - y0) \
            else (y - y0) / (y1 - y0)
        t = min(max(t, 0.0), 1.0)
        return [(1.0 - t, verts[0]), (t, verts[1])]
    anchor = verts[0]
    best = None
    for k in range(1, len(verts) - 1):
        v1, v2 = verts[k], verts[k + 1]
        det = (v1[0] - anchor[0]) * (v2[1] - anchor[1]) \
            - (v2[0] - anchor[0]) * (v1[1] - anchor[1])
        if abs(det) < 1e-15:
            continue
        b = ((x - anchor[0]) * (v2[1] - anchor[1])
             - (v2[0] - anchor[0]) * (y - anchor[1])) / det
        c = ((v1[0] - anchor[0]) * (y - anchor[1])
             - (x - anchor[0]) * (v1[1] - anchor[1])) / det
        a = 1.0 - b - c
        low = min(a, b, c)
        if best is None or low > best[0]:
            best = (low, a, b, c, anchor, v1, v2)
        if low >= -1e-9:
            break
    if best is None or best[0] < -1e-7:
        raise ValueError(f"no hull triangle contains {tuple(point)}")
    _, a, b, c, v0, v1, v2 = best
    pairs = [(max(a, 0.0), v0), (max(b, 0.0), v1), (max(c, 0.0), v2)]
    pairs = [(w, v) for w, v in pairs if w > 1e-12]
    total = sum(w for w, _ in pairs)
    return [(w / total, v) for w, v in pairs]


# -- simulation ---------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationResult:
    """Empirical estimate of the automaton's payoff profile."""

    mean: np.ndarray
    stderr: np.ndarray
    episodes: int


def simulate(M: Automaton, gamma: float, seed: int,
             episodes: int) -> SimulationResult:
    """Monte Carlo estimate of the automaton's discounted average payoff.

    Each episode plays from the initial state and continues with
    probability gamma after every stage (the continuation reading of the
    discount factor), so the per-episode undiscounted payoff sum, scaled by
    (1 - gamma), is an unbiased estimator of the automaton's value.  One
    seeded generator drives action sampling and the public signal; the draw
    order per stage is fixed (actions by player, then the lottery signal,
    then the continuation coin), so a seed fully determines the run.
    """
    rng = np.random.default_rng(seed)
    game = M.game
    n = game.player_count
    cums = [[np.cumsum(st.mixed.probs[i]) for i in range(n)]
            for st in M.states]
    sums = np.zeros((episodes, n))
    for ep in range(episodes):
        q = M.initial
        total = np.zeros(n)
        while True:
            profile = tuple(
                int(np.searchsorted(cums[q][i], rng.random(), side="right"))
                for i in range(n))
            total += game.payoff(profile)
            tr = M.states[q].transitions[profile]
            if isinstance(tr, int):
                q = tr
            else:
                omega = 1.0 - rng.random()  # public signal in (0, 1]
                acc = 0.0
                q = tr[-1][1]
                for weight, t in tr:
                    acc += weight
                    if omega <= acc + 1e-15:
                        q = t
                        break
            if rng.random() >= gamma:
                break
        sums[ep] = total
    scaled = (1.0 - gamma) * sums
    mean = scaled.mean(axis=0)
    stderr = scaled.std(axis=0, ddof=1) / np.sqrt(episodes) \
        if episodes > 1 else np.zeros(n)
    return SimulationResult(mean=mean, stderr=stderr, episodes=episodes)
