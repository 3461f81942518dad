"""Finite Bayesian games: types, priors, utilities, and correlated policies.

Types and actions are finite ordered label lists; all evaluation is exact
summation over the finite supports. Chance moves of source games are expected
to be folded into the utility table by the game builders.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

PROB_TOL = 1e-12  # mass sums must close to 1 within this
DEFAULT_TOL = 1e-9  # payoff comparisons


class GameError(ValueError):
    """Malformed game data."""


class ZeroMarginalTypeError(ValueError):
    """A conditional payoff was requested for a type with zero prior mass."""


class PolicyTotalityError(KeyError):
    """A policy table is missing an entry on its declared domain."""


class PolicyScopeError(ValueError):
    """A policy with the wrong conditioning scope was supplied."""


# --------------------------------------------------------------------------
# scopes


@dataclass(frozen=True)
class Scope:
    kind: str  # "full" | "minus" | "reported"
    player: int | None = None

    def __post_init__(self):
        if self.kind not in ("full", "minus", "reported"):
            raise PolicyScopeError(f"unknown scope kind {self.kind!r}")
        if self.kind != "full" and self.player is None:
            raise PolicyScopeError(f"scope {self.kind!r} needs a player index")


FULL_PROFILE = Scope("full")


def minus_player(j: int) -> Scope:
    return Scope("minus", j)


def reported_type(j: int) -> Scope:
    return Scope("reported", j)


# --------------------------------------------------------------------------
# core containers


@dataclass(frozen=True)
class BayesianGame:
    """Finite Bayesian game with a total utility table.

    prior has shape (|T_1|, ..., |T_n|); utility has that shape followed by
    (|A_1|, ..., |A_n|, n). Both arrays are made read-only on construction.
    """

    types: tuple[tuple[str, ...], ...]
    actions: tuple[tuple[str, ...], ...]
    prior: np.ndarray
    utility: np.ndarray
    name: str = "game"
    u_max: float = field(init=False)

    def __post_init__(self):
        n = len(self.types)
        if len(self.actions) != n:
            raise GameError("types and actions must list the same player count")
        if n == 0:
            raise GameError("need at least one player")
        tdims = tuple(len(t) for t in self.types)
        adims = tuple(len(a) for a in self.actions)
        if any(d == 0 for d in tdims + adims):
            raise GameError("every player needs at least one type and action")
        prior = np.asarray(self.prior, dtype=float)
        utility = np.asarray(self.utility, dtype=float)
        if prior.shape != tdims:
            raise GameError(f"prior shape {prior.shape} != {tdims}")
        if utility.shape != tdims + adims + (n,):
            raise GameError(
                f"utility shape {utility.shape} != {tdims + adims + (n,)}"
            )
        if np.any(prior < -PROB_TOL):
            raise GameError("prior has negative mass")
        if abs(float(prior.sum()) - 1.0) > PROB_TOL:
            raise GameError(f"prior sums to {prior.sum()!r}, not 1")
        if not np.all(np.isfinite(utility)):
            raise GameError("utility table has non-finite entries")
        prior = prior.clip(min=0.0)
        prior.setflags(write=False)
        utility.setflags(write=False)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "utility", utility)
        object.__setattr__(self, "u_max", float(np.abs(utility).max()))

    # -- shape helpers ------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.types)

    @property
    def type_dims(self) -> tuple[int, ...]:
        return tuple(len(t) for t in self.types)

    @property
    def action_dims(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.actions)

    def joint_types(self) -> Iterable[tuple[int, ...]]:
        return itertools.product(*(range(d) for d in self.type_dims))

    def joint_actions(self) -> Iterable[tuple[int, ...]]:
        """Joint actions in canonical lexicographic order."""
        return itertools.product(*(range(d) for d in self.action_dims))

    def num_joint_types(self) -> int:
        return int(np.prod(self.type_dims))

    def num_joint_actions(self) -> int:
        return int(np.prod(self.action_dims))

    # -- probability helpers -------------------------------------------------

    def marginal_prior(self, j: int) -> np.ndarray:
        axes = tuple(i for i in range(self.n) if i != j)
        return self.prior.sum(axis=axes) if axes else self.prior

    def conditional_prior(self, j: int, t_j: int) -> np.ndarray:
        """q(t_{-j} | t_j) as an array over the other players' type axes."""
        marg = float(self.marginal_prior(j)[t_j])
        if marg <= 0.0:
            raise ZeroMarginalTypeError(
                f"type {t_j} of player {j} has zero prior probability"
            )
        sl = tuple(t_j if i == j else slice(None) for i in range(self.n))
        return self.prior[sl] / marg

    def utility_at(self, t: tuple[int, ...], a: tuple[int, ...]) -> np.ndarray:
        return self.utility[tuple(t) + tuple(a)]

    def flat_utility(self) -> np.ndarray:
        """View shaped (num joint types, num joint actions, n)."""
        return self.utility.reshape(
            self.num_joint_types(), self.num_joint_actions(), self.n
        )

    def type_labels(self, t: tuple[int, ...]) -> tuple[str, ...]:
        return tuple(self.types[i][ti] for i, ti in enumerate(t))

    def action_labels(self, a: tuple[int, ...]) -> tuple[str, ...]:
        return tuple(self.actions[i][ai] for i, ai in enumerate(a))


@dataclass(frozen=True)
class CorrelatedPolicy:
    """Distribution over joint actions per conditioning key.

    scope "full": keys are joint type tuples; "minus": keys are t_{-j} tuples
    and distributions range over joint actions of the players other than j;
    "reported": keys are (s_j, t_{-j}) pairs with full joint actions.
    """

    scope: Scope
    table: Mapping[tuple, dict[tuple[int, ...], float]]

    def validate(self, game: BayesianGame, tol: float = PROB_TOL) -> None:
        for key in self._domain(game):
            if key not in self.table:
                raise PolicyTotalityError(f"policy missing entry for {key}")
            dist = self.table[key]
            total = 0.0
            for a, p in dist.items():
                if p < -tol:
                    raise GameError(f"negative mass {p} at {key} -> {a}")
                self._check_action(game, a)
                total += p
            if abs(total - 1.0) > tol:
                raise GameError(f"masses at {key} sum to {total!r}, not 1")

    def _domain(self, game: BayesianGame) -> Iterable[tuple]:
        if self.scope.kind == "full":
            return game.joint_types()
        j = self.scope.player
        others = [range(d) for i, d in enumerate(game.type_dims) if i != j]
        if self.scope.kind == "minus":
            return itertools.product(*others)
        return (
            (s_j, t_minus)
            for s_j in range(game.type_dims[j])
            for t_minus in itertools.product(*others)
        )

    def _check_action(self, game: BayesianGame, a: tuple[int, ...]) -> None:
        if self.scope.kind in ("full", "reported"):
            dims = game.action_dims
        else:
            j = self.scope.player
            dims = tuple(d for i, d in enumerate(game.action_dims) if i != j)
        if len(a) != len(dims) or any(not 0 <= ai < d for ai, d in zip(a, dims)):
            raise GameError(f"invalid joint action {a}")

    def dist_at(self, key: tuple) -> dict[tuple[int, ...], float]:
        try:
            return self.table[key]
        except KeyError as exc:
            raise PolicyTotalityError(f"policy missing entry for {key}") from exc


@dataclass(frozen=True)
class PayoffVector:
    """Per player j and type t_j, the ex interim payoff x_j(t_j)."""

    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        vals = tuple(np.asarray(v, dtype=float) for v in self.values)
        for v in vals:
            if v.ndim != 1 or not np.all(np.isfinite(v)):
                raise GameError("payoff vector entries must be finite 1-d arrays")
            v.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def get(self, j: int, t_j: int) -> float:
        return float(self.values[j][t_j])

    def check_shape(self, game: BayesianGame) -> None:
        if len(self.values) != game.n or any(
            len(v) != d for v, d in zip(self.values, game.type_dims)
        ):
            raise GameError("payoff vector does not match the game's type space")

    def with_entry(self, j: int, t_j: int, value: float) -> "PayoffVector":
        vals = [v.copy() for v in self.values]
        vals[j][t_j] = value
        return PayoffVector(tuple(vals))


@dataclass(frozen=True)
class DeterministicProfile:
    """Realized target action profile: one joint action per joint type."""

    assignment: Mapping[tuple[int, ...], tuple[int, ...]]

    def action_for(self, t: tuple[int, ...]) -> tuple[int, ...]:
        return self.assignment[tuple(t)]

    def validate(self, game: BayesianGame) -> None:
        for t in game.joint_types():
            a = self.assignment.get(t)
            if a is None:
                raise PolicyTotalityError(f"profile missing type {t}")
            if any(not 0 <= ai < d for ai, d in zip(a, game.action_dims)):
                raise GameError(f"invalid action {a} at {t}")


# --------------------------------------------------------------------------
# operations


def ex_post_payoffs(game: BayesianGame, t: tuple[int, ...], a: tuple[int, ...]) -> np.ndarray:
    """Utility vector u(t, a); raises IndexError on invalid indices."""
    t = tuple(int(x) for x in t)
    a = tuple(int(x) for x in a)
    if len(t) != game.n or len(a) != game.n:
        raise GameError("type/action profile length mismatch")
    for x, d in zip(t, game.type_dims):
        if not 0 <= x < d:
            raise IndexError(f"type index {x} out of range")
    for x, d in zip(a, game.action_dims):
        if not 0 <= x < d:
            raise IndexError(f"action index {x} out of range")
    return game.utility_at(t, a)


def policy_payoff(game: BayesianGame, dist: Mapping[tuple[int, ...], float],
                  t: tuple[int, ...]) -> np.ndarray:
    """Expected utility vector at type profile t under one action distribution."""
    out = np.zeros(game.n)
    for a, p in dist.items():
        if p != 0.0:
            out += p * game.utility_at(t, a)
    return out


def ex_interim_payoff(game: BayesianGame, policy: CorrelatedPolicy, j: int, t_j: int) -> float:
    """x_j(t_j) = sum over t_{-j} of q(t_{-j}|t_j) * E_mu u_j(t, a)."""
    if policy.scope.kind != "full":
        raise PolicyScopeError("ex interim payoff needs a full-profile policy")
    cond = game.conditional_prior(j, t_j)  # raises on zero marginal
    other_dims = [range(d) for i, d in enumerate(game.type_dims) if i != j]
    total = 0.0
    for t_minus in itertools.product(*other_dims):
        w = float(cond[t_minus])
        t = t_minus[:j] + (t_j,) + t_minus[j:]
        dist = policy.dist_at(t)
        if w == 0.0:
            continue
        acc = 0.0
        for a, p in dist.items():
            if p != 0.0:
                acc += p * float(game.utility[t + a + (j,)])
        total += w * acc
    return total


def induced_payoff_vector(game: BayesianGame, policy: CorrelatedPolicy) -> PayoffVector:
    """Ex interim payoffs for every player and positive-marginal type.

    Zero-marginal types get payoff 0 by convention; solver checks exclude
    their constraints anyway.
    """
    values = []
    for j in range(game.n):
        marg = game.marginal_prior(j)
        row = np.zeros(game.type_dims[j])
        for t_j in range(game.type_dims[j]):
            if marg[t_j] > 0.0:
                row[t_j] = ex_interim_payoff(game, policy, j, t_j)
        values.append(row)
    return PayoffVector(tuple(values))


def desugar_policy(policy: CorrelatedPolicy, game: BayesianGame, signal, trial: int) -> DeterministicProfile:
    """Realize a full-profile policy at the trial's correlation value.

    Inverse-CDF sampling with joint actions in canonical lexicographic order,
    so the realization is a pure function of (seed, trial).
    """
    if policy.scope.kind != "full":
        raise PolicyScopeError("only full-profile policies can be desugared")
    c = signal.draw_c(trial)
    return realize_at(policy, game, c)


def realize_at(policy: CorrelatedPolicy, game: BayesianGame, c: float) -> DeterministicProfile:
    assignment = {}
    for t in game.joint_types():
        assignment[t] = _inverse_cdf(policy.dist_at(t), c)
    return DeterministicProfile(assignment)


def _inverse_cdf(dist: Mapping[tuple[int, ...], float], c: float) -> tuple[int, ...]:
    cum = 0.0
    chosen = None
    for a in sorted(dist):
        p = dist[a]
        if p <= 0.0:
            continue
        cum += p
        chosen = a
        if c < cum:
            return a
    if chosen is None:
        raise GameError("distribution has no positive mass")
    return chosen  # c fell into the rounding gap at the top of the CDF


def inverse_cdf_breakpoints(dist: Mapping[tuple[int, ...], float]) -> list[tuple[float, tuple[int, ...]]]:
    """(cumulative upper bound, action) pairs in canonical order; the last
    bound is forced to 1 so joint-realization measures tile [0, 1)."""
    out = []
    cum = 0.0
    for a in sorted(dist):
        p = dist[a]
        if p <= 0.0:
            continue
        cum += p
        out.append((cum, a))
    if not out:
        raise GameError("distribution has no positive mass")
    out[-1] = (1.0, out[-1][1])
    return out


# --------------------------------------------------------------------------
# JSON game format


def _tkey(labels: Iterable[str]) -> str:
    return "|".join(labels)


def game_to_json(game: BayesianGame) -> dict:
    prior = {}
    for t in game.joint_types():
        prior[_tkey(game.type_labels(t))] = float(game.prior[t])
    utility = {}
    for t in game.joint_types():
        for a in game.joint_actions():
            key = f"{_tkey(game.type_labels(t))}::{_tkey(game.action_labels(a))}"
            utility[key] = [float(v) for v in game.utility_at(t, a)]
    return {
        "players": game.n,
        "types": [list(t) for t in game.types],
        "actions": [list(a) for a in game.actions],
        "prior": prior,
        "utility": utility,
        "name": game.name,
    }


def game_from_json(doc: dict) -> BayesianGame:
    """Parse the documented game format; rejects non-total utility tables."""
    try:
        n = int(doc["players"])
        types = tuple(tuple(map(str, ts)) for ts in doc["types"])
        actions = tuple(tuple(map(str, As)) for As in doc["actions"])
        prior_doc = doc["prior"]
        utility_doc = doc["utility"]
    except KeyError as exc:
        raise GameError(f"game document missing key {exc}") from exc
    if len(types) != n or len(actions) != n:
        raise GameError("'types'/'actions' length disagrees with 'players'")

    tindex = [{lab: k for k, lab in enumerate(ts)} for ts in types]
    aindex = [{lab: k for k, lab in enumerate(As)} for As in actions]
    tdims = tuple(len(t) for t in types)
    adims = tuple(len(a) for a in actions)

    prior = np.zeros(tdims)
    for key, mass in prior_doc.items():
        labs = key.split("|")
        if len(labs) != n:
            raise GameError(f"bad prior key {key!r}")
        try:
            idx = tuple(tindex[i][lab] for i, lab in enumerate(labs))
        except KeyError as exc:
            raise GameError(f"unknown type label in prior key {key!r}") from exc
        prior[idx] = float(mass)

    utility = np.full(tdims + adims + (n,), np.nan)
    for key, vec in utility_doc.items():
        try:
            tpart, apart = key.split("::")
        except ValueError as exc:
            raise GameError(f"bad utility key {key!r}") from exc
        tlabs, alabs = tpart.split("|"), apart.split("|")
        if len(tlabs) != n or len(alabs) != n or len(vec) != n:
            raise GameError(f"bad utility entry {key!r}")
        try:
            tidx = tuple(tindex[i][lab] for i, lab in enumerate(tlabs))
            aidx = tuple(aindex[i][lab] for i, lab in enumerate(alabs))
        except KeyError as exc:
            raise GameError(f"unknown label in utility key {key!r}") from exc
        utility[tidx + aidx] = [float(v) for v in vec]
    if np.any(np.isnan(utility)):
        raise GameError("utility table is not total over (types x actions)")

    return BayesianGame(
        types=types,
        actions=actions,
        prior=prior,
        utility=utility,
        name=str(doc.get("name", "game")),
    )


def load_game(path: str) -> BayesianGame:
    with open(path) as fh:
        return game_from_json(json.load(fh))


# --------------------------------------------------------------------------
# policy helpers used across modules


def point_policy(game: BayesianGame, chooser) -> CorrelatedPolicy:
    """Full-profile policy putting mass one on chooser(t) for each t."""
    table = {t: {tuple(chooser(t)): 1.0} for t in game.joint_types()}
    return CorrelatedPolicy(FULL_PROFILE, table)


def constant_policy(game: BayesianGame, a: tuple[int, ...]) -> CorrelatedPolicy:
    return point_policy(game, lambda _t: a)


def policy_matrix(game: BayesianGame, policy: CorrelatedPolicy) -> np.ndarray:
    """Dense (joint types x joint actions) matrix of a full-profile policy."""
    if policy.scope.kind != "full":
        raise PolicyScopeError("dense matrix only defined for full policies")
    adims = game.action_dims
    out = np.zeros((game.num_joint_types(), game.num_joint_actions()))
    for ti, t in enumerate(game.joint_types()):
        for a, p in policy.dist_at(t).items():
            out[ti, int(np.ravel_multi_index(a, adims))] = p
    return out


def matrix_to_policy(game: BayesianGame, mat: np.ndarray, clip: float = 1e-13) -> CorrelatedPolicy:
    """Inverse of policy_matrix; drops masses below clip and renormalizes."""
    adims = game.action_dims
    table = {}
    for ti, t in enumerate(game.joint_types()):
        row = mat[ti]
        dist = {}
        for flat in np.nonzero(row > clip)[0]:
            dist[tuple(int(x) for x in np.unravel_index(flat, adims))] = float(row[flat])
        total = sum(dist.values())
        if total <= 0:
            raise GameError(f"empty policy row for type {t}")
        table[t] = {a: p / total for a, p in dist.items()}
    return CorrelatedPolicy(FULL_PROFILE, table)
