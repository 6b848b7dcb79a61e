"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the library's own code paths wherever
they are used to check those paths: the rational simplex re-decides
feasibility in exact arithmetic, the stage-equilibrium oracle enumerates
supports and solves indifference systems with plain linear algebra, the
minmax oracle sweeps a fine grid of opponent mixtures, and the hull oracle
is a brute-force quadratic scan.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest

import spegrid as sg


@pytest.fixture(scope="session")
def pd():
    return sg.load_bundled("prisoners_dilemma")


@pytest.fixture(scope="session")
def bos():
    return sg.load_bundled("battle_of_sexes")


@pytest.fixture(scope="session")
def rpc():
    return sg.load_bundled("rock_paper_scissors")


@pytest.fixture(scope="session")
def pennies():
    return sg.load_bundled("matching_pennies")


def random_game(rng, shape=(2, 2), lo=-3.0, hi=3.0) -> sg.StageGame:
    actions = tuple(tuple(f"a{k}" for k in range(m)) for m in shape)
    tensor = rng.uniform(lo, hi, size=shape + (len(shape),))
    return sg.StageGame(actions, tensor)


# -- minmax oracle: fine grid over opponent mixtures -------------------------

def grid_minmax(game: sg.StageGame, player: int, steps: int = 4000) -> float:
    opp = 1 - player
    k = game.action_count(opp)
    best = np.inf
    payoff = game.payoffs[..., player]
    if player == 1:
        payoff = payoff.T
    if k == 2:
        for q in np.linspace(0.0, 1.0, steps + 1):
            mix = np.array([q, 1.0 - q])
            best = min(best, (payoff @ mix).max())
    else:
        for combo in itertools.product(np.linspace(0, 1, 41), repeat=k - 1):
            if sum(combo) > 1.0 + 1e-12:
                continue
            mix = np.array(list(combo) + [1.0 - sum(combo)])
            best = min(best, (payoff @ mix).max())
    return float(best)


# -- stage equilibrium oracle: support enumeration with linear algebra -------

def stage_equilibria(game: sg.StageGame, tol: float = 1e-8):
    """All stage Nash equilibria of a 2-player game as (alpha, payoff)
    pairs, found by support enumeration: for each support pair, solve the
    indifference system and verify non-negativity and no profitable
    outside deviation."""
    m, k = game.action_count(0), game.action_count(1)
    A = game.payoffs[..., 0]
    B = game.payoffs[..., 1]
    results = []
    for s1 in _subsets(m):
        for s2 in _subsets(k):
            sol = _support_solution(A, B, s1, s2, tol)
            if sol is not None:
                p, q = sol
                value = (float(p @ A @ q), float(p @ B @ q))
                if not any(np.allclose(p, r[0]) and np.allclose(q, r[1])
                           for r, _ in results):
                    results.append(((p, q), value))
    return results


def _subsets(m):
    for size in range(1, m + 1):
        yield from itertools.combinations(range(m), size)


def _support_solution(A, B, s1, s2, tol):
    m, k = A.shape
    # q makes player 1 indifferent on s1; p makes player 2 indifferent on s2
    q = _indifferent_mix(A[list(s1)][:, list(s2)], len(s2))
    p = _indifferent_mix(B[list(s1)][:, list(s2)].T, len(s1))
    if q is None or p is None:
        return None
    qf = np.zeros(k)
    qf[list(s2)] = q
    pf = np.zeros(m)
    pf[list(s1)] = p
    if np.any(qf < -tol) or np.any(pf < -tol):
        return None
    qf, pf = np.clip(qf, 0, None), np.clip(pf, 0, None)
    qf, pf = qf / qf.sum(), pf / pf.sum()
    u1 = A @ qf
    u2 = B.T @ pf
    v1 = max(u1[list(s1)])
    v2 = max(u2[list(s2)])
    if np.any(u1 > v1 + tol) or np.any(u2 > v2 + tol):
        return None
    if max(abs(u1[list(s1)] - v1)) > tol or max(abs(u2[list(s2)] - v2)) > tol:
        return None
    return pf, qf


def _indifferent_mix(M, size):
    # mix x over columns with all row payoffs equal and sum(x) = 1
    rows = M.shape[0]
    lhs = np.zeros((rows - 1 + 1, size))
    rhs = np.zeros(rows - 1 + 1)
    for r in range(rows - 1):
        lhs[r] = M[r] - M[r + 1]
    lhs[-1] = 1.0
    rhs[-1] = 1.0
    try:
        x, res, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    except np.linalg.LinAlgError:
        return None
    if np.max(np.abs(lhs @ x - rhs)) > 1e-9:
        return None
    return x


# -- exact rational feasibility oracle ----------------------------------------

def rational_feasible(system: sg.LinearSystem) -> bool:
    """Phase-1 simplex in exact Fraction arithmetic with Bland's rule.

    Independent re-implementation used to cross-check the float engine's
    feasible/infeasible verdicts.
    """
    names = [v.name for v in system.variables]
    cols = {}
    ncols = 0
    upper_rows = []
    for v in system.variables:
        lo = None if v.low == -np.inf else Fraction(v.low)
        hi = None if v.high == np.inf else Fraction(v.high)
        if lo is not None:
            cols[v.name] = ("low", ncols, lo)
            if hi is not None:
                upper_rows.append((ncols, hi - lo))
            ncols += 1
        elif hi is not None:
            cols[v.name] = ("high", ncols, hi)
            ncols += 1
        else:
            cols[v.name] = ("free", ncols, ncols + 1)
            ncols += 2

    rows = []
    for c in system.constraints:
        row = [Fraction(0)] * ncols
        shift = Fraction(0)
        for name, coef in c.coeffs.items():
            f = Fraction(coef)
            kind = cols[name]
            if kind[0] == "low":
                row[kind[1]] += f
                shift += f * kind[2]
            elif kind[0] == "high":
                row[kind[1]] -= f
                shift += f * kind[2]
            else:
                row[kind[1]] += f
                row[kind[2]] -= f
        rows.append((row, c.rel, Fraction(c.rhs) - shift))
    for col, bound in upper_rows:
        row = [Fraction(0)] * ncols
        row[col] = Fraction(1)
        rows.append((row, "<=", bound))

    normalized = []
    for row, rel, b in rows:
        if b < 0:
            row = [-x for x in row]
            b = -b
            rel = {"<=": ">=", ">=": "<=", "=": "="}[rel]
        normalized.append((row, rel, b))
    rows = normalized

    tableau = []
    basis = []
    art = []
    nslack = sum(1 for _, rel, _ in rows if rel != "=")
    total = ncols + nslack + sum(1 for _, rel, _ in rows if rel != "<=")
    s_at = ncols
    a_at = ncols + nslack
    for row, rel, b in rows:
        line = list(row) + [Fraction(0)] * (total - ncols) + [b]
        if rel == "<=":
            line[s_at] = Fraction(1)
            basis.append(s_at)
            s_at += 1
        elif rel == ">=":
            line[s_at] = Fraction(-1)
            s_at += 1
            line[a_at] = Fraction(1)
            basis.append(a_at)
            art.append(a_at)
            a_at += 1
        else:
            line[a_at] = Fraction(1)
            basis.append(a_at)
            art.append(a_at)
            a_at += 1
        tableau.append(line)

    cost = [Fraction(0)] * (total + 1)
    for c in art:
        cost[c] = Fraction(1)
    for i, bk in enumerate(basis):
        if bk in art:
            cost = [cv - tv for cv, tv in zip(cost, tableau[i])]

    while True:
        enter = next((j for j in range(total) if cost[j] < 0), None)
        if enter is None:
            break
        ratios = [(tableau[i][-1] / tableau[i][enter], basis[i], i)
                  for i in range(len(tableau)) if tableau[i][enter] > 0]
        if not ratios:
            break  # unbounded phase 1 cannot happen; defensive
        _, _, r = min(ratios)
        piv = tableau[r][enter]
        tableau[r] = [x / piv for x in tableau[r]]
        for i in range(len(tableau)):
            if i != r and tableau[i][enter] != 0:
                f = tableau[i][enter]
                tableau[i] = [x - f * y for x, y in zip(tableau[i], tableau[r])]
        if cost[enter] != 0:
            f = cost[enter]
            cost = [x - f * y for x, y in zip(cost, tableau[r])]
        basis[r] = enter
    return -cost[-1] == 0


# -- brute force convex hull ---------------------------------------------------

def hull_oracle(points):
    """O(n^3) convex hull: a point is a vertex iff it is not inside the hull
    of the others; returns vertices sorted lexicographically."""
    pts = sorted(set(points))
    verts = []
    for p in pts:
        inside = False
        for a, b, c in itertools.combinations(pts, 3):
            if p in (a, b, c):
                continue
            if _in_triangle(p, a, b, c):
                inside = True
                break
        if not inside:
            verts.append(p)
    # drop collinear edge points
    out = []
    for p in verts:
        collinear = False
        for a, b in itertools.combinations(verts, 2):
            if p in (a, b):
                continue
            cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            if abs(cross) < 1e-12 and min(a[0], b[0]) - 1e-12 <= p[0] <= max(a[0], b[0]) + 1e-12 \
                    and min(a[1], b[1]) - 1e-12 <= p[1] <= max(a[1], b[1]) + 1e-12:
                collinear = True
                break
        if not collinear:
            out.append(p)
    return sorted(out)


def _in_triangle(p, a, b, c):
    def side(p1, p2, p3):
        return (p1[0] - p3[0]) * (p2[1] - p3[1]) - (p2[0] - p3[0]) * (p1[1] - p3[1])

    d1, d2, d3 = side(p, a, b), side(p, b, c), side(p, c, a)
    neg = (d1 < -1e-12) or (d2 < -1e-12) or (d3 < -1e-12)
    pos = (d1 > 1e-12) or (d2 > 1e-12) or (d3 > 1e-12)
    return not (neg and pos)
