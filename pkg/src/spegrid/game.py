"""Stage games and the primitive quantities everything else is built on.

A stage game is a finite normal-form game: per-player action labels and a
payoff tensor mapping every pure action profile to a payoff vector.  This
module provides mixed action profiles, expected payoffs, best responses,
minmax values, payoff bounds, and discounted averaging of payoff streams.

All values are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

# Probability mass below this is treated as zero (support membership).
PROB_TOL = 1e-9
# Absolute tolerance for payoff comparisons (best-response ties etc).
VALUE_TOL = 1e-9


@dataclass(frozen=True)
class StageGame:
    """A finite normal-form game.

    ``actions[i]`` holds player i's action labels; ``payoffs`` has shape
    ``(|A_0|, ..., |A_{n-1}|, n)`` so ``payoffs[a][i]`` is player i's payoff
    at pure profile ``a``.
    """

    actions: tuple[tuple[str, ...], ...]
    payoffs: np.ndarray

    def __post_init__(self):
        actions = tuple(tuple(str(a) for a in acts) for acts in self.actions)
        object.__setattr__(self, "actions", actions)
        if not actions or any(len(acts) == 0 for acts in actions):
            raise ValueError("every player needs a non-empty action set")
        tensor = np.array(self.payoffs, dtype=float)
        expected = tuple(len(acts) for acts in actions) + (len(actions),)
        if tensor.shape != expected:
            raise ValueError(
                f"payoff tensor shape {tensor.shape} does not match actions "
                f"(expected {expected})"
            )
        if not np.all(np.isfinite(tensor)):
            raise ValueError("payoffs must be finite")
        tensor.setflags(write=False)
        object.__setattr__(self, "payoffs", tensor)

    @property
    def player_count(self) -> int:
        return len(self.actions)

    def action_count(self, player: int) -> int:
        return len(self.actions[player])

    def profiles(self):
        """All pure action profiles as index tuples, lexicographic order."""
        return itertools.product(*(range(len(a)) for a in self.actions))

    def payoff(self, profile) -> np.ndarray:
        """Payoff vector at a pure profile of action indices."""
        return self.payoffs[tuple(profile)]

    def payoff_to(self, profile, player: int) -> float:
        return float(self.payoffs[tuple(profile) + (player,)])

    def label_profile(self, profile) -> tuple[str, ...]:
        return tuple(self.actions[i][a] for i, a in enumerate(profile))


@dataclass(frozen=True)
class MixedProfile:
    """One probability vector per player over that player's actions."""

    probs: tuple[np.ndarray, ...]

    def __post_init__(self):
        vecs = []
        for i, p in enumerate(self.probs):
            v = np.array(p, dtype=float)
            if v.ndim != 1 or v.size == 0:
                raise ValueError(f"player {i}: probability vector expected")
            if np.any(v < -PROB_TOL):
                raise ValueError(f"player {i}: negative probability")
            if abs(v.sum() - 1.0) > 1e-9:
                raise ValueError(f"player {i}: probabilities sum to {v.sum()}")
            v = np.clip(v, 0.0, None)
            v.setflags(write=False)
            vecs.append(v)
        object.__setattr__(self, "probs", tuple(vecs))

    @classmethod
    def point_mass(cls, game: StageGame, profile) -> "MixedProfile":
        vecs = []
        for i, a in enumerate(profile):
            v = np.zeros(game.action_count(i))
            v[a] = 1.0
            vecs.append(v)
        return cls(tuple(vecs))

    @classmethod
    def uniform(cls, game: StageGame) -> "MixedProfile":
        return cls(tuple(np.full(m, 1.0 / m) for m in
                         (game.action_count(i) for i in range(game.player_count))))

    @property
    def player_count(self) -> int:
        return len(self.probs)

    def support(self, player: int) -> tuple[int, ...]:
        """Actions with probability above PROB_TOL."""
        return tuple(int(a) for a in np.nonzero(self.probs[player] > PROB_TOL)[0])

    def outcome_probability(self, profile) -> float:
        p = 1.0
        for i, a in enumerate(profile):
            p *= float(self.probs[i][a])
        return p


@dataclass(frozen=True)
class PayoffBounds:
    """Smallest and largest entry of a payoff tensor, over all players."""

    low: float
    high: float

    def __post_init__(self):
        if self.low > self.high:
            raise ValueError("low > high")

    @property
    def spread(self) -> float:
        return self.high - self.low


def payoff_bounds(game: StageGame) -> PayoffBounds:
    """Min and max payoff across all profiles and players."""
    return PayoffBounds(float(game.payoffs.min()), float(game.payoffs.max()))


def expected_payoff(game: StageGame, mix: MixedProfile, player: int,
                    fixed_action: int | None = None) -> float:
    """Expected payoff of `player` under `mix`.

    With ``fixed_action`` given, the expectation runs over the opponents'
    mixtures only, with `player` pinned to that pure action; the player's
    own component of `mix` is ignored.
    """
    if not 0 <= player < game.player_count:
        raise IndexError(f"player {player} out of range")
    table = game.payoffs[..., player]
    for j in reversed(range(game.player_count)):
        if j == player and fixed_action is not None:
            if not 0 <= fixed_action < game.action_count(player):
                raise IndexError(f"action {fixed_action} out of range")
            table = np.take(table, fixed_action, axis=j)
        else:
            table = np.tensordot(table, mix.probs[j], axes=([j], [0]))
    return float(table)


def best_response(game: StageGame, player: int,
                  opponent_mix: MixedProfile) -> tuple[int, float]:
    """Best pure response of `player` against the opponents' mixtures.

    `opponent_mix` is a full MixedProfile; the player's own component is
    ignored.  Ties break to the smallest action index.
    """
    best_action, best_value = 0, -np.inf
    for a in range(game.action_count(player)):
        v = expected_payoff(game, opponent_mix, player, fixed_action=a)
        if v > best_value + VALUE_TOL:
            best_action, best_value = a, v
    return best_action, best_value


def minmax(game: StageGame, player: int) -> float:
    """The worst payoff the opponents can force on a best-responding player.

    For two players the opponent minimises over mixed actions (solved as a
    small LP, exact).  For more players, the variant over opponents' pure
    profiles is used, which is what the pure-strategy solver needs.
    """
    n = game.player_count
    if n == 2:
        from .feasibility import LinearSystem, solve_feasibility

        opp = 1 - player
        k = game.action_count(opp)
        sys = LinearSystem()
        for b in range(k):
            sys.add_variable(f"q{b}", low=0.0, high=1.0)
        sys.add_variable("v")
        sys.add_constraint({f"q{b}": 1.0 for b in range(k)}, "=", 1.0)
        for a in range(game.action_count(player)):
            coeffs = {"v": -1.0}
            for b in range(k):
                profile = (a, b) if player == 0 else (b, a)
                coeffs[f"q{b}"] = game.payoff_to(profile, player)
            sys.add_constraint(coeffs, "<=", 0.0)
        sys.set_objective({"v": 1.0})
        sol = solve_feasibility(sys)
        if sol is None:  # simplex cannot fail on a simplex-constrained LP
            raise RuntimeError("minmax LP unexpectedly infeasible")
        return float(sol["v"])
    # pure-action variant: min over opponents' pure profiles
    worst = np.inf
    others = [j for j in range(n) if j != player]
    for combo in itertools.product(*(range(game.action_count(j)) for j in others)):
        fixed = dict(zip(others, combo))
        best = -np.inf
        for a in range(game.action_count(player)):
            profile = tuple(fixed[j] if j != player else a for j in range(n))
            best = max(best, game.payoff_to(profile, player))
        worst = min(worst, best)
    return float(worst)


def discounted_average(prefix, cycle, gamma: float) -> float:
    """Discounted average value of the stream prefix followed by cycle repeated
    forever: (1 - g) * sum_t g^t v_t, in closed form via the geometric series.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"discount factor {gamma} outside [0, 1)")
    prefix = [float(v) for v in prefix]
    cycle = [float(v) for v in cycle]
    if not cycle:
        raise ValueError("cycle must be non-empty")
    if gamma == 0.0:
        return prefix[0] if prefix else cycle[0]
    head = sum(v * gamma ** t for t, v in enumerate(prefix))
    one_pass = sum(v * gamma ** t for t, v in enumerate(cycle))
    tail = gamma ** len(prefix) * one_pass / (1.0 - gamma ** len(cycle))
    return (1.0 - gamma) * (head + tail)
