"""Strategic information revelation: disclosure spaces, unraveling equilibria,
post-unraveling games, and the devices-without-disclosure pipeline.

The solver does an exhaustive search over pure disclosure strategies, ordered
most-disclosing-first so that ties between disclosing and not disclosing
resolve to disclosing. Beliefs are Bayes-consistent on path; off-path
non-singleton messages get the skeptical posterior concentrated on the worst
type for the sender (ranked by each type's fully-revealed payoff). The action
stage after each message profile is solved for a pure Bayesian equilibrium in
canonical enumeration order.

Implemented for two-player games, which covers every supported scenario; the
n-player generalization would need per-receiver message vectors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .games import BayesianGame, GameError, PayoffVector
from .solvers import SolverReport, check_feasible, check_feasible_IC, check_INTIR, check_IC


@dataclass(frozen=True)
class DisclosureSpace:
    """Per player and type, the verifiable statements available: every
    disclosable set contains the true type, and both the exact type and the
    uninformative full set are always available."""

    sets: Mapping[tuple[int, int], tuple[frozenset[int], ...]]

    def validate(self, game: BayesianGame) -> None:
        for i in range(game.n):
            full = frozenset(range(game.type_dims[i]))
            for t_i in range(game.type_dims[i]):
                options = self.sets.get((i, t_i))
                if options is None:
                    raise GameError(f"disclosure space missing ({i}, {t_i})")
                for opt in options:
                    if t_i not in opt:
                        raise GameError(
                            f"set {set(opt)} for player {i} type {t_i} omits the true type"
                        )
                    if not opt <= full:
                        raise GameError(f"set {set(opt)} out of range for player {i}")
                if frozenset([t_i]) not in options or full not in options:
                    raise GameError(
                        f"player {i} type {t_i} must be able to disclose exactly "
                        "or not at all"
                    )

    def options(self, i: int, t_i: int) -> tuple[frozenset[int], ...]:
        return self.sets[(i, t_i)]


def all_or_nothing_space(game: BayesianGame) -> DisclosureSpace:
    sets = {}
    for i in range(game.n):
        full = frozenset(range(game.type_dims[i]))
        for t_i in range(game.type_dims[i]):
            sets[(i, t_i)] = (frozenset([t_i]), full)
    return DisclosureSpace(sets)


def space_from_json(game: BayesianGame, doc) -> DisclosureSpace:
    """Parse the `disclosure_spaces` document: list of {player, sets: {type
    label: list of lists of type labels}}."""
    sets = dict(all_or_nothing_space(game).sets)
    for entry in doc:
        i = int(entry["player"])
        index = {lab: k for k, lab in enumerate(game.types[i])}
        for lab, subsets in entry["sets"].items():
            t_i = index[lab]
            options = [frozenset(index[x] for x in sub) for sub in subsets]
            full = frozenset(range(game.type_dims[i]))
            merged = set(options) | {frozenset([t_i]), full}
            sets[(i, t_i)] = tuple(sorted(merged, key=lambda s: (len(s), sorted(s))))
    return DisclosureSpace(sets)


@dataclass(frozen=True)
class DisclosureProfile:
    """Realized messages: matrix[i][j] = what player i showed player j."""

    messages: tuple[tuple[frozenset[int] | None, ...], ...]

    def validate(self, game: BayesianGame, space: DisclosureSpace, t) -> None:
        for i in range(game.n):
            for j in range(game.n):
                if i == j:
                    continue
                msg = self.messages[i][j]
                if msg not in space.options(i, t[i]):
                    raise GameError(f"message {msg} not available to player {i}")


@dataclass
class UnravelingOutcome:
    found: bool
    classification: str | None = None  # "full" | "partial" | "none"
    strategy: dict = field(default_factory=dict)  # (i, t_i) -> frozenset message
    beliefs: dict = field(default_factory=dict)  # (receiver, sender message key) -> posterior
    payoffs: dict = field(default_factory=dict)  # (i, t_i) -> equilibrium payoff
    withheld: dict = field(default_factory=dict)  # i -> frozenset of withholding types
    detail: dict = field(default_factory=dict)

    def to_json(self, game: BayesianGame | None = None) -> dict:
        lab = (lambda i, t: game.types[i][t]) if game else (lambda i, t: str(t))
        return {
            "found": self.found,
            "classification": self.classification,
            "strategy": {
                f"{i}:{lab(i, t)}": sorted(lab(i, x) for x in msg)
                for (i, t), msg in self.strategy.items()
            },
            "payoffs": {f"{i}:{lab(i, t)}": v for (i, t), v in self.payoffs.items()},
            "withheld": {
                str(i): sorted(lab(i, x) for x in w) for i, w in self.withheld.items()
            },
        }


# --------------------------------------------------------------------------
# continuation games (action stage after a message pair)


class _Continuation:
    """Pure Bayesian equilibrium of the action stage given posterior supports.

    support_a/support_b are the type sets the opponents consider possible;
    strategies are maps from supported types to actions, found in canonical
    enumeration order (lowest action indices first, enumerating the player
    with the smaller pure-strategy space)."""

    def __init__(self, game: BayesianGame, supports: tuple[frozenset[int], frozenset[int]],
                 tol: float = 1e-12, max_candidates: int = 500_000):
        self.game = game
        self.supports = (sorted(supports[0]), sorted(supports[1]))
        self.tol = tol
        self.strategies: tuple[dict, dict] | None = None
        self._solve(max_candidates)

    def _posterior(self, receiver: int) -> np.ndarray:
        """q(t_sender | t_receiver, sender support), rows = receiver type."""
        game = self.game
        sender = 1 - receiver
        prior = game.prior if receiver == 1 else game.prior.T  # (sender, receiver)
        mask = np.zeros(game.type_dims[sender])
        mask[self.supports[sender]] = 1.0
        joint = prior * mask[:, None]
        col = joint.sum(axis=0, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            post = np.where(col > 0, joint / col, 0.0)
        return post  # (sender types, receiver types)

    def _solve(self, max_candidates: int) -> None:
        game = self.game
        sa, sb = self.supports
        na, nb = game.action_dims
        size_a = na ** len(sa)
        size_b = nb ** len(sb)
        first = 0 if size_a <= size_b else 1
        if min(size_a, size_b) > max_candidates:
            raise GameError("action stage too large for exhaustive search")
        u = game.utility  # (T1, T2, A1, A2, 2)
        post_to_0 = self._posterior(0)  # beliefs of player 0 about player 1
        post_to_1 = self._posterior(1)

        enum_types = self.supports[first]
        resp_types = self.supports[1 - first]
        enum_actions = range(game.action_dims[first])
        for combo in itertools.product(enum_actions, repeat=len(enum_types)):
            sigma_e = dict(zip(enum_types, combo))
            sigma_r = self._best_response(1 - first, sigma_e, first,
                                          post_to_1 if first == 0 else post_to_0)
            if self._is_best_response(first, sigma_e, 1 - first, sigma_r,
                                      post_to_0 if first == 0 else post_to_1):
                if first == 0:
                    self.strategies = (sigma_e, sigma_r)
                else:
                    self.strategies = (sigma_r, sigma_e)
                return

    def _expected(self, player: int, t_p: int, other_sigma: dict, posterior) -> np.ndarray:
        """Payoff vector over player's actions given the other's strategy."""
        game = self.game
        out = np.zeros(game.action_dims[player])
        for t_o, a_o in other_sigma.items():
            w = float(posterior[t_o, t_p])
            if w == 0.0:
                continue
            if player == 0:
                out += w * game.utility[t_p, t_o, :, a_o, 0]
            else:
                out += w * game.utility[t_o, t_p, a_o, :, 1]
        return out

    def _uniform_score(self, player: int, t_p: int, posterior) -> np.ndarray:
        """Belief-weighted payoff against a uniform mixture over the other's
        actions; used to break payoff ties toward undominated plans (a plan
        that only matches on the realized action but caves off path loses)."""
        game = self.game
        if player == 0:
            mean = game.utility[t_p, :, :, :, 0].mean(axis=2)  # (T1, A0)
        else:
            mean = game.utility[:, t_p, :, :, 1].mean(axis=1)  # (T0, A1)
        return posterior[:, t_p] @ mean

    def _best_response(self, player, other_sigma, other, posterior) -> dict:
        out = {}
        for t_p in self.supports[player]:
            vals = self._expected(player, t_p, other_sigma, posterior)
            best = vals.max()
            cands = np.nonzero(vals >= best - 1e-12)[0]
            if len(cands) > 1:
                sec = self._uniform_score(player, t_p, posterior)[cands]
                cands = cands[np.nonzero(sec >= sec.max() - 1e-12)[0]]
            out[t_p] = int(cands[0])
        return out

    def _is_best_response(self, player, sigma, other, other_sigma, posterior) -> bool:
        for t_p, a_p in sigma.items():
            vals = self._expected(player, t_p, other_sigma, posterior)
            if vals[a_p] < vals.max() - self.tol:
                return False
        return True

    def deviator_value(self, player: int, t_p: int, posterior_weights: np.ndarray) -> float:
        """Best-response value for an (possibly off-support) type of `player`
        whose belief over the other's supported types is posterior_weights."""
        other_sigma = self.strategies[1 - player]
        game = self.game
        vals = np.zeros(game.action_dims[player])
        for t_o, a_o in other_sigma.items():
            w = float(posterior_weights[t_o])
            if w == 0.0:
                continue
            if player == 0:
                vals += w * game.utility[t_p, t_o, :, a_o, 0]
            else:
                vals += w * game.utility[t_o, t_p, a_o, :, 1]
        return float(vals.max())


# --------------------------------------------------------------------------
# unraveling equilibrium search


def solve_disclosure_game(
    game: BayesianGame,
    space: DisclosureSpace | None = None,
    tol: float = 1e-9,
    all_subsets: bool = False,
    max_profiles: int = 65_536,
) -> UnravelingOutcome:
    """Search pure disclosure strategies (most disclosure first) for a
    perfect-Bayesian-style equilibrium and classify its unraveling.

    With all_subsets=False only the per-receiver all-or-nothing messages
    {t_i} vs T_i are searched; richer spaces sit behind the flag.
    """
    if game.n != 2:
        raise NotImplementedError("disclosure solver supports two-player games")
    if space is None:
        space = all_or_nothing_space(game)
    space.validate(game)

    full = [frozenset(range(d)) for d in game.type_dims]
    options: dict[tuple[int, int], list[frozenset[int]]] = {}
    for i in range(2):
        for t_i in range(game.type_dims[i]):
            if all_subsets:
                opts = list(space.options(i, t_i))
            else:
                opts = [frozenset([t_i]), full[i]]
            # most informative first: smaller sets first, then lexicographic
            opts.sort(key=lambda s: (len(s), sorted(s)))
            options[(i, t_i)] = opts

    slots = [(i, t_i) for i in range(2) for t_i in range(game.type_dims[i])]
    n_profiles = int(np.prod([len(options[s]) for s in slots]))
    if n_profiles > max_profiles:
        raise GameError(f"{n_profiles} disclosure profiles exceed the search cap")

    marg = [game.marginal_prior(i) for i in range(2)]
    continuations: dict[tuple[frozenset, frozenset], _Continuation] = {}

    def continuation(sup0: frozenset, sup1: frozenset) -> _Continuation:
        key = (sup0, sup1)
        if key not in continuations:
            continuations[key] = _Continuation(game, (sup0, sup1))
        return continuations[key]

    def supports_for(strategy: dict, i: int, msg: frozenset) -> frozenset:
        """Posterior support the receiver assigns to sender i showing msg."""
        senders = frozenset(
            t_i for t_i in range(game.type_dims[i])
            if strategy[(i, t_i)] == msg and marg[i][t_i] > 0.0
        )
        if senders:
            return senders
        if len(msg) == 1:
            return msg  # verifiability pins the posterior
        return frozenset([_skeptical_type(game, i, msg, continuation)])

    for combo in itertools.product(*(options[s] for s in slots)):
        strategy = dict(zip(slots, combo))
        result = _check_equilibrium(game, space, strategy, options, supports_for,
                                    continuation, marg, tol, all_subsets)
        if result is not None:
            return result
    return UnravelingOutcome(found=False, detail={"reason": "no pure equilibrium"})


def _skeptical_type(game, i, msg, continuation) -> int:
    """Worst consistent type for the sender: minimal fully-revealed payoff."""
    other = 1 - i
    full_other = frozenset(range(game.type_dims[other]))
    best, best_val = None, None
    for t_i in sorted(msg):
        sup = (frozenset([t_i]), full_other) if i == 0 else (full_other, frozenset([t_i]))
        cont = continuation(*sup)
        if cont.strategies is None:
            continue
        weights = _belief_over_other(game, i, t_i)
        v = cont.deviator_value(i, t_i, weights)
        if best_val is None or v < best_val - 1e-12:
            best, best_val = t_i, v
    return best if best is not None else min(msg)


def _belief_over_other(game: BayesianGame, i: int, t_i: int) -> np.ndarray:
    """q(t_other | t_i) as a flat vector over the other player's types."""
    cond = game.conditional_prior(i, t_i)
    return np.asarray(cond).reshape(-1)


def _check_equilibrium(game, space, strategy, options, supports_for, continuation,
                       marg, tol, all_subsets):
    # value of (player i, type t_i) sending message `msg`, everything else fixed
    def value(i, t_i, msg) -> float | None:
        other = 1 - i
        belief = _belief_over_other(game, i, t_i)
        sup_own = supports_for(strategy, i, msg)
        groups: dict[tuple, np.ndarray] = {}
        for t_o in range(game.type_dims[other]):
            w = float(belief[t_o])
            if w == 0.0:
                continue
            msg_o = strategy[(other, t_o)]
            sup_o = supports_for(strategy, other, msg_o)
            sups = (sup_own, sup_o) if i == 0 else (sup_o, sup_own)
            key = (sups, msg_o)
            if key not in groups:
                groups[key] = np.zeros(game.type_dims[other])
            groups[key][t_o] = w
        total = 0.0
        for (sups, _msg_o), weights in groups.items():
            cont = continuation(*sups)
            if cont.strategies is None:
                return None
            # best response of (i, t_i) against the stage strategies, given
            # the opponent types consistent with the observed message
            total += cont.deviator_value(i, t_i, weights)
        return total

    payoffs = {}
    for i in range(2):
        for t_i in range(game.type_dims[i]):
            if marg[i][t_i] <= 0.0:
                continue
            v = value(i, t_i, strategy[(i, t_i)])
            if v is None:
                return None
            payoffs[(i, t_i)] = v
            for alt in options[(i, t_i)]:
                if alt == strategy[(i, t_i)]:
                    continue
                v_alt = value(i, t_i, alt)
                if v_alt is None:
                    return None
                if v_alt > v + tol:
                    return None  # profitable disclosure deviation

    # classification per the unraveling definition
    full = [frozenset(range(d)) for d in game.type_dims]
    exact = all(
        strategy[(i, t_i)] == frozenset([t_i])
        for i in range(2)
        for t_i in range(game.type_dims[i])
        if marg[i][t_i] > 0.0
    )
    some_strict = any(
        strategy[(i, t_i)] < full[i]
        for i in range(2)
        for t_i in range(game.type_dims[i])
        if marg[i][t_i] > 0.0
    )
    classification = "full" if exact else ("partial" if some_strict else "none")

    withheld = {
        i: frozenset(
            t_i for t_i in range(game.type_dims[i])
            if marg[i][t_i] > 0.0 and strategy[(i, t_i)] == full[i]
        )
        for i in range(2)
    }
    beliefs = {}
    for i in range(2):
        seen = {strategy[(i, t_i)] for t_i in range(game.type_dims[i]) if marg[i][t_i] > 0}
        for msg in seen:
            sup = supports_for(strategy, i, msg)
            post = np.zeros(game.type_dims[i])
            for t_i in sup:
                post[t_i] = marg[i][t_i]
            if post.sum() > 0:
                post /= post.sum()
            beliefs[(1 - i, i, tuple(sorted(msg)))] = post
    return UnravelingOutcome(
        found=True,
        classification=classification,
        strategy=strategy,
        beliefs=beliefs,
        payoffs=payoffs,
        withheld=withheld,
    )


# --------------------------------------------------------------------------
# post-unraveling games


def _subgame(game: BayesianGame, keep: list[list[int]], name: str) -> BayesianGame:
    """Restrict the type space to keep[i] per player and renormalize."""
    types = tuple(tuple(game.types[i][k] for k in keep[i]) for i in range(game.n))
    ix = np.ix_(*keep)
    prior = game.prior[ix]
    total = float(prior.sum())
    if total <= 0.0:
        raise GameError("surviving type set has zero prior mass")
    prior = prior / total
    utility = game.utility[ix]
    return BayesianGame(types, game.actions, prior, utility, name=name)


def post_unraveling_game(game: BayesianGame, outcome: UnravelingOutcome) -> BayesianGame:
    """Game conditioned on every player withholding (the surviving ambiguity).

    With full unraveling some player has no withholding types; use
    post_unraveling_branches for the per-profile complete-information games.
    """
    if not outcome.found:
        raise GameError("no equilibrium outcome to condition on")
    keep = []
    for i in range(game.n):
        w = sorted(outcome.withheld.get(i, frozenset()))
        if not w:
            raise GameError(
                f"player {i} fully unravels; use post_unraveling_branches"
            )
        keep.append(w)
    if all(len(k) == game.type_dims[i] for i, k in enumerate(keep)):
        return game  # nobody disclosed anything
    return _subgame(game, keep, game.name + "+unraveled")


def post_unraveling_branches(game: BayesianGame, outcome: UnravelingOutcome):
    """All informational branches after the disclosure stage.

    Per player, a branch coordinate is either one disclosed type (singleton)
    or the whole withholding set; yields (weight, subgame, keep) triples
    covering the type space, with the prior renormalized on each branch.
    """
    if not outcome.found:
        raise GameError("no equilibrium outcome to condition on")
    per_player = []
    for i in range(game.n):
        marg = game.marginal_prior(i)
        w = outcome.withheld.get(i, frozenset())
        coords: list[list[int]] = [[t] for t in range(game.type_dims[i])
                                   if marg[t] > 0.0 and t not in w]
        if w:
            coords.append(sorted(w))
        per_player.append(coords)
    for combo in itertools.product(*per_player):
        keep = [list(c) for c in combo]
        weight = float(game.prior[np.ix_(*keep)].sum())
        if weight <= 0.0:
            continue
        yield weight, _subgame(game, keep, game.name + "+branch"), keep


def prop2_pipeline(
    game: BayesianGame,
    space: DisclosureSpace | None,
    x: PayoffVector,
    tol: float = 1e-9,
    all_subsets: bool = False,
) -> SolverReport:
    """Achievability without disclosure-capable devices: after unraveling,
    the payoff must be feasible, INTIR, and incentive compatible with respect
    to every post-unraveling branch and its updated prior.

    The IC leg asks for one correlated policy that both induces x and is IC
    (a joint LP), not merely whether one particular witness is IC.
    """
    x.check_shape(game)
    outcome = solve_disclosure_game(game, space, tol=tol, all_subsets=all_subsets)
    if not outcome.found:
        return SolverReport(
            "prop2", False, tol,
            details={"regime": "devices-without-disclosure",
                     "error": "no pure disclosure equilibrium"},
        )
    branches = []
    verdicts = []
    for weight, sub, keep in post_unraveling_branches(game, outcome):
        sub_x = PayoffVector(
            tuple(np.asarray([x.get(i, t) for t in keep[i]]) for i in range(game.n))
        )
        feas = check_feasible(sub, sub_x, tol=tol)
        intir = check_INTIR(sub, sub_x, tol=tol)
        ic_ok, ic_detail = True, "vacuous"
        if any(len(k) > 1 for k in keep):
            joint = check_feasible_IC(sub, sub_x, tol=tol)
            ic_ok = joint.verdict
            ic_detail = "joint feasible+IC LP"
            if feas.verdict and feas.witness is not None:
                witness_ic = check_IC(sub, feas.witness, sub_x, tol=max(tol, 1e-7))
                ic_detail = {
                    "joint": joint.verdict,
                    "feasibility_witness_ic": witness_ic.verdict,
                }
        ok = feas.verdict and intir.verdict and ic_ok
        verdicts.append(ok)
        branches.append({
            "keep": keep,
            "weight": weight,
            "feasible": feas.verdict,
            "INTIR": intir.verdict,
            "IC": ic_ok,
            "ic_detail": ic_detail,
        })
    return SolverReport(
        "prop2",
        all(verdicts),
        tol,
        details={
            "regime": "devices-without-disclosure",
            "classification": outcome.classification,
            "branches": branches,
        },
    )
