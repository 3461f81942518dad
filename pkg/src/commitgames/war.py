"""Two-country war bargaining under one-sided incomplete information.

Country 1 offers a split of disputed territory; country 2 (whose strength and,
optionally, a hidden weak point are private) accepts or fights. The sequential
game (offer -> accept/reject -> war lottery -> sneak-attack choice) is
flattened into a one-shot Bayesian game: country 1 picks (offer, attack
target), country 2 picks a threshold acceptance plan, and the war lottery is
folded into expected utilities. Threshold plans lose no equilibria because the
acceptance payoff is strictly increasing in the offered share while the war
payoff does not depend on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .games import FULL_PROFILE, BayesianGame, CorrelatedPolicy, PayoffVector

_EPS = 1e-12


@dataclass(frozen=True)
class WarParams:
    p_weak: float = 0.2
    p_strong: float = 0.6
    cost_war_1: float = 0.1
    cost_war_2: float = 0.1
    sneak_gain: float = 0.2          # country 1's gain from hitting the weak point
    wrong_attack_cost: float = 0.3   # must exceed sneak_gain
    attacked_cost: float = 0.15      # country 2's loss when its weak point is hit
    q_strong: float = 0.3
    grid: int = 101
    weak_point: bool = True

    def __post_init__(self):
        if not (0 < self.p_weak < self.p_strong < 1):
            raise ValueError("need 0 < p_weak < p_strong < 1")
        if min(self.cost_war_1, self.cost_war_2, self.attacked_cost) <= 0:
            raise ValueError("war and attack costs must be positive")
        if self.wrong_attack_cost <= self.sneak_gain:
            raise ValueError("wrong_attack_cost must exceed sneak_gain")
        if not (0 < self.q_strong < 1):
            raise ValueError("q_strong must be in (0, 1)")
        if self.grid < 3:
            raise ValueError("offer grid too coarse")

    @property
    def regime_threshold(self) -> float:
        """Prior on strong below which country 1 makes the low offer that only
        a weak country 2 accepts (and a strong one fights)."""
        spread = self.p_strong - self.p_weak
        return spread / (spread + self.cost_war_1 + self.cost_war_2)

    def win_prob(self, strong: bool) -> float:
        return self.p_strong if strong else self.p_weak


@dataclass(frozen=True)
class WarMeta:
    """Strategy bookkeeping for the flattened game."""

    params: WarParams
    offers: np.ndarray            # share offered to country 2, ascending
    attack_labels: tuple[str, ...]  # "none" first, then weak-point locations
    plan_count: int               # len(offers) threshold plans + "never"

    def offer_index(self, value: float) -> int:
        k = int(np.argmin(np.abs(self.offers - value)))
        if abs(self.offers[k] - value) > 1e-9:
            raise KeyError(f"offer {value} not on the grid")
        return k

    def a1_index(self, offer_value: float, attack: str = "none") -> int:
        off = self.offer_index(offer_value)
        return off * len(self.attack_labels) + self.attack_labels.index(attack)

    def accept_all_plan(self) -> int:
        return 0

    def never_plan(self) -> int:
        return self.plan_count - 1

    def plan_accepts(self, plan: int, offered: float) -> bool:
        if plan == self.never_plan():
            return False
        return offered >= self.offers[plan] - _EPS


def _offer_grid(params: WarParams) -> np.ndarray:
    grid = list(np.linspace(0.0, 1.0, params.grid))
    landmarks = [
        params.p_weak - params.cost_war_2,
        params.p_strong - params.cost_war_2,
        params.p_weak,
        params.p_strong,
        0.0,
        1.0,
    ]
    for v in landmarks:
        if 0.0 <= v <= 1.0 and not any(abs(v - g) < 1e-12 for g in grid):
            grid.append(v)
    return np.array(sorted(grid))


def build_war_game(params: WarParams = WarParams()) -> tuple[BayesianGame, WarMeta]:
    offers = _offer_grid(params)
    n_off = len(offers)
    if params.weak_point:
        t2_labels = ("weak|v1", "weak|v2", "strong|v1", "strong|v2")
        strong = np.array([False, False, True, True])
        vloc = np.array([0, 1, 0, 1])
        prior2 = np.array(
            [
                (1 - params.q_strong) / 2,
                (1 - params.q_strong) / 2,
                params.q_strong / 2,
                params.q_strong / 2,
            ]
        )
        attack_labels = ("none", "v1", "v2")
    else:
        t2_labels = ("weak", "strong")
        strong = np.array([False, True])
        vloc = np.array([-1, -1])
        prior2 = np.array([1 - params.q_strong, params.q_strong])
        attack_labels = ("none",)

    n_att = len(attack_labels)
    n_t2 = len(t2_labels)
    plan_count = n_off + 1  # thresholds + never

    p_win = np.where(strong, params.p_strong, params.p_weak)  # (n_t2,)
    accept = offers[:, None] >= offers[None, :] - _EPS  # (offer, plan threshold)
    accept = np.concatenate([accept, np.zeros((n_off, 1), bool)], axis=1)

    # base payoffs before the sneak attack, shape (t2, offer, plan)
    acc = accept[None, :, :]
    u1 = np.where(acc, 1.0 - offers[None, :, None], (1.0 - p_win - params.cost_war_1)[:, None, None])
    u2 = np.where(acc, offers[None, :, None], (p_win - params.cost_war_2)[:, None, None])

    # expand offers with attack choices: a1 = offer * n_att + attack
    u1 = np.repeat(u1, n_att, axis=1).reshape(n_t2, n_off, n_att, plan_count)
    u2 = np.repeat(u2, n_att, axis=1).reshape(n_t2, n_off, n_att, plan_count)
    for att in range(1, n_att):
        hit = vloc == (att - 1)  # (n_t2,)
        u1[:, :, att, :] += np.where(hit, params.sneak_gain, -params.wrong_attack_cost)[:, None, None]
        u2[:, :, att, :] -= np.where(hit, params.attacked_cost, 0.0)[:, None, None]

    utility = np.stack(
        [u1.reshape(n_t2, n_off * n_att, plan_count), u2.reshape(n_t2, n_off * n_att, plan_count)],
        axis=-1,
    )[None, ...]  # add player-1 type axis

    a1_labels = tuple(
        f"offer{offers[o]:.6g}+{attack_labels[att]}" for o in range(n_off) for att in range(n_att)
    )
    plan_labels = tuple(f"acc>={offers[k]:.6g}" for k in range(n_off)) + ("never",)

    game = BayesianGame(
        types=(("c1",), t2_labels),
        actions=(a1_labels, plan_labels),
        prior=prior2[None, :],
        utility=utility,
        name="war" if params.weak_point else "war-no-weak-point",
    )
    meta = WarMeta(params, offers, attack_labels, plan_count)
    return game, meta


# --------------------------------------------------------------------------
# target profile and payoffs for the commitment analysis


def target_policy(game: BayesianGame, meta: WarMeta) -> CorrelatedPolicy:
    """Peace profile: country 1 offers the full war value p(theta) with no
    attack, country 2 accepts; ex post payoffs (1 - p(theta), p(theta))."""
    params = meta.params
    table = {}
    for t in game.joint_types():
        label = game.types[1][t[1]]
        p = params.p_strong if label.startswith("strong") else params.p_weak
        a = (meta.a1_index(p, "none"), meta.accept_all_plan())
        table[t] = {a: 1.0}
    return CorrelatedPolicy(FULL_PROFILE, table)


def target_payoff_vector(game: BayesianGame, meta: WarMeta) -> PayoffVector:
    params = meta.params
    p2 = np.array(
        [
            params.p_strong if lab.startswith("strong") else params.p_weak
            for lab in game.types[1]
        ]
    )
    x1 = float(np.sum(game.prior[0] * (1.0 - p2)))
    return PayoffVector((np.array([x1]), p2))


# --------------------------------------------------------------------------
# perfect Bayesian equilibrium of the base game (no disclosure)


@dataclass(frozen=True)
class WarEquilibrium:
    regime: str                     # "screening" (low offer) or "pooling"
    offer_to_2: float
    strong_rejects: bool
    weak_accepts: bool
    strong_war_payoff: float
    weak_payoff: float
    player1_payoff: float
    disclosure_payoff_strong: float  # strong's payoff if it disclosed up front
    disclosure_gap_strong: float     # war payoff minus disclosure payoff
    conditional_target: tuple[float, float]  # peace split for the strong type
    regime_threshold: float
    offer_curve: np.ndarray = field(repr=False)  # (offer, player-1 value) rows


def war_pbe(params: WarParams = WarParams()) -> WarEquilibrium:
    """Backward induction on the offer grid.

    Below the prior threshold country 1 makes the low offer p_weak - c_2 that
    only a weak country 2 accepts, so a strong country 2 fights; above it,
    country 1 pools on the high offer. The sneak attack never fires without
    disclosure because its prior expectation is negative."""
    offers = _offer_grid(params)
    war_value = {True: params.p_strong - params.cost_war_2,
                 False: params.p_weak - params.cost_war_2}
    attack_ev = 0.0
    if params.weak_point:
        attack_ev = max(0.0, 0.5 * params.sneak_gain - 0.5 * params.wrong_attack_cost)

    values = np.zeros(len(offers))
    for k, o in enumerate(offers):
        v = 0.0
        for is_strong, q in ((True, params.q_strong), (False, 1 - params.q_strong)):
            if o >= war_value[is_strong] - _EPS:  # ties resolve to accepting
                v += q * (1.0 - o)
            else:
                v += q * (1.0 - params.win_prob(is_strong) - params.cost_war_1)
        values[k] = v + attack_ev
    best = int(np.argmax(values))  # argmax takes the first (lowest) offer on ties
    offer = float(offers[best])

    strong_rejects = offer < war_value[True] - _EPS
    weak_accepts = offer >= war_value[False] - _EPS
    strong_payoff = war_value[True] if strong_rejects else offer
    weak_payoff = offer if weak_accepts else war_value[False]

    # Unconditional disclosure by the strong type: country 1 then extracts the
    # full war value and, knowing the weak point, attacks it in every branch.
    disclosure_payoff = war_value[True]
    if params.weak_point:
        disclosure_payoff -= params.attacked_cost
    regime = "screening" if params.q_strong < params.regime_threshold else "pooling"

    return WarEquilibrium(
        regime=regime,
        offer_to_2=offer,
        strong_rejects=strong_rejects,
        weak_accepts=weak_accepts,
        strong_war_payoff=war_value[True],
        weak_payoff=weak_payoff,
        player1_payoff=float(values[best]),
        disclosure_payoff_strong=disclosure_payoff,
        disclosure_gap_strong=strong_payoff - disclosure_payoff,
        conditional_target=(1.0 - params.p_strong, params.p_strong),
        regime_threshold=params.regime_threshold,
        offer_curve=np.column_stack([offers, values]),
    )
