"""Programs for the executable commitment games.

The centerpiece is the grounded fair reciprocator: a program that disclosures
its type and plays the target action exactly when its counterparts are seen to
do the same, grounding the mutual recursion by unconditional cooperation with
probability eps_ground per depth level (correlated through the shared
depth-indexed uniforms, so a whole level grounds together). The deviator
library and the Monte Carlo harnesses estimate how exploitable the profile is
against the closed-form slack u_bar * ((1 - eps)^-2 - 1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .games import BayesianGame, CorrelatedPolicy, _inverse_cdf
from .engine import (
    NO_OUTPUT,
    DepthExceeded,
    Program,
    run_base_calls,
    run_with_deep_stack,
)
from .signals import RandomizationSignal
from .solvers import expected_vs_policy

_MISS = object()
_U64 = (1 << 64) - 1


def _mix64(*vals: int) -> int:
    """SplitMix64-style mixer; deterministic across runs and processes."""
    x = 0x243F6A8885A308D3
    for v in vals:
        x = (x + (v & _U64) + 0x9E3779B97F4A7C15) & _U64
        x ^= x >> 30
        x = (x * 0xBF58476D1CE4E5B9) & _U64
        x ^= x >> 27
        x = (x * 0x94D049BB133111EB) & _U64
        x ^= x >> 31
    return x


def delta_slack(u_bar: float, eps_ground: float) -> float:
    """Exploitability slack of the grounded profile."""
    return u_bar * ((1.0 - eps_ground) ** -2 - 1.0)


@dataclass(frozen=True)
class BotConfig:
    """Per-player configuration of the grounded fair reciprocator."""

    game: BayesianGame
    player: int
    eps_ground: float
    target: CorrelatedPolicy
    punishments: Mapping[int, CorrelatedPolicy]
    default: Mapping[tuple[int, ...], float]
    salt: str = ""

    def __post_init__(self):
        if not (0.0 < self.eps_ground < 1.0):
            raise ValueError("eps_ground must lie strictly inside (0, 1)")
        for j in range(self.game.n):
            if j not in self.punishments:
                raise ValueError(f"punishment family missing player {j}")


def grounded_fair_bot(config: BotConfig) -> Program:
    """Build the conditional-cooperation program for one player.

    Action branch: with the next level not grounding, query every
    counterpart's disclosure program; on full disclosure either ground
    (U_here < eps -> play the target component) or play the target component
    iff every counterpart's action call matches it, punishing otherwise. If
    the next level grounds, query *truncated* counterpart disclosures and
    cooperate iff they all disclose.

    Disclosure branch: ground (all-ones) when U_here < eps; otherwise
    disclose to everyone when all counterparts disclose and cooperate, else
    disclose exactly to those who disclosed here and are punishing (or will
    ground next level).
    """
    game = config.game
    n = game.n
    i = config.player
    eps = config.eps_ground
    target = config.target
    punishments = dict(config.punishments)
    default = dict(config.default)
    others = tuple(k for k in range(n) if k != i)
    full = (1 << n) - 1
    all_of = tuple(full ^ (1 << k) for k in range(n))  # all-ones mask per sender
    pos_in = {j: tuple(p for p in range(n) if p != j) for j in range(n)}

    def mu_actions(ctx) -> tuple[int, ...]:
        ev = ctx._ev
        if ctx.known != ev.full_mask:  # information gate: full disclosure required
            ctx.full_profile()  # raises InformationViolation
        mu = ev.scratch.get("mu", _MISS)
        if mu is _MISS:
            mu = _inverse_cdf(target.dist_at(ev.t), ctx.c)
            ev.scratch["mu"] = mu
        return mu

    def default_actions(ctx) -> tuple[int, ...]:
        scratch = ctx.scratch
        d = scratch.get("default", _MISS)
        if d is _MISS:
            d = _inverse_cdf(default, ctx.c)
            scratch["default"] = d
        return d

    def tau_joint(ctx, j: int):
        """Realized punishment against j over the other players, or None if
        this context lacks some punisher's type."""
        scratch = ctx.scratch
        key = ("tau", j)
        joint = scratch.get(key, _MISS)
        if joint is not _MISS:
            # realization is type-true; still require this context to know them
            if ctx.profile_minus_if_known(j) is None:
                return None
            return joint
        t_minus = ctx.profile_minus_if_known(j)
        if t_minus is None:
            return None
        joint = _inverse_cdf(punishments[j].dist_at(t_minus), ctx.c)
        scratch[key] = joint
        return joint

    def punish_component(ctx, j: int, k: int) -> int:
        """Component of the punishment-against-j profile played by k."""
        if k == j:
            return default_actions(ctx)[k]
        joint = tau_joint(ctx, j)
        if joint is None:
            return default_actions(ctx)[k]
        return joint[pos_in[j].index(k)]

    def deviator_from(ys, acts, ctx) -> int:
        """Lowest-index counterpart failing the disclosure/action checks."""
        for idx, k in enumerate(others):
            y = ys[idx]
            if y is NO_OUTPUT or y != all_of[k]:
                return k
        if acts is not None:
            mu = mu_actions(ctx)
            for idx, k in enumerate(others):
                if acts[idx] != mu[k]:
                    return k
        return others[0] if others else i

    def body(ctx):
        if ctx.output_action:
            if ctx.u_next() >= eps:
                ys = [ctx.call_disclosure(k) for k in others]
                acts = None
                if all(y == all_of[k] for y, k in zip(ys, others)):
                    if ctx.u_here() < eps:  # ground: cooperate unconditionally
                        return mu_actions(ctx)[i]
                    acts = [ctx.call_action(k) for k in others]
                    mu = mu_actions(ctx)
                    if all(a == mu[k] for a, k in zip(acts, others)):
                        return mu[i]
                j = deviator_from(ys, acts, ctx)
                return punish_component(ctx, j, i)
            # next level grounds: check truncated disclosures only
            ys = [ctx.call_truncated_disclosure(k) for k in others]
            if all(y == all_of[k] for y, k in zip(ys, others)):
                return mu_actions(ctx)[i]  # full type known
            j = deviator_from(ys, None, ctx)
            return punish_component(ctx, j, i)

        # disclosure branch
        if ctx.u_here() < eps:  # ground: disclose unconditionally
            return all_of[i]
        ys, acts = [], []
        for k in others:
            ys.append(ctx.call_disclosure(k))
            acts.append(ctx.call_action(k))
        full_disclosure = all(y == all_of[k] for y, k in zip(ys, others))
        if full_disclosure:
            mu = mu_actions(ctx)
            if all(a == mu[k] for a, k in zip(acts, others)):
                return all_of[i]
        bits = 0
        next_grounds = ctx.u_next() < eps
        j = deviator_from(ys, acts if full_disclosure else None, ctx)
        for idx, k in enumerate(others):
            y = ys[idx]
            if y is not NO_OUTPUT and (y >> i) & 1:
                if next_grounds or acts[idx] == punish_component(ctx, j, k):
                    bits |= 1 << k
        return bits

    def body_two_player(ctx, k=others[0] if others else i,
                        ALL_K=all_of[others[0]] if others else 0, ALL_I=all_of[i]):
        # same control flow as body(), without per-call list allocation
        if ctx.output_action:
            if ctx.u_next() >= eps:
                y = ctx.call_disclosure(k)
                if y == ALL_K:  # NoOutput never equals an int mask
                    if ctx.u_here() < eps:
                        return mu_actions(ctx)[i]
                    a_k = ctx.call_action(k)
                    mu = mu_actions(ctx)
                    if a_k == mu[k]:
                        return mu[i]
                return punish_component(ctx, k, i)
            y = ctx.call_truncated_disclosure(k)
            if y == ALL_K:
                return mu_actions(ctx)[i]
            return punish_component(ctx, k, i)
        if ctx.u_here() < eps:
            return ALL_I
        y = ctx.call_disclosure(k)
        a_k = ctx.call_action(k)
        if y == ALL_K:
            mu = mu_actions(ctx)
            if a_k == mu[k]:
                return ALL_I
        if y is not NO_OUTPUT and (y >> i) & 1:
            if ctx.u_next() < eps or a_k == punish_component(ctx, k, k):
                return ALL_I  # the only other player's bit
        return 0

    name = f"gfbot[{i}]" + (f"#{config.salt}" if config.salt else "")
    return Program(name, i, body_two_player if n == 2 else body, pure=True)


# --------------------------------------------------------------------------
# deviators


def never_disclose(game: BayesianGame, j: int, action_map: Mapping[int, int]) -> Program:
    """Zero disclosure vector; a fixed (per own type) action on the action flag."""
    amap = dict(action_map)
    return Program(
        f"never-disclose[{j}]",
        j,
        lambda ctx: amap[ctx.own_type] if ctx.output_action else 0,
        pure=True,
    )


def disclose_then_defect(game: BayesianGame, j: int, action_map: Mapping[int, int]) -> Program:
    full = (1 << game.n) - 1
    mask = full ^ (1 << j)
    amap = dict(action_map)
    return Program(
        f"disclose-then-defect[{j}]",
        j,
        lambda ctx: amap[ctx.own_type] if ctx.output_action else mask,
        pure=True,
    )


def constant_action(game: BayesianGame, j: int, action: int) -> Program:
    """Discloses to everyone and plays one fixed action."""
    full = (1 << game.n) - 1
    mask = full ^ (1 << j)
    return Program(
        f"constant[{j}]={action}",
        j,
        lambda ctx: action if ctx.output_action else mask,
        pure=True,
    )


def randomized_noise(game: BayesianGame, j: int, seed: int) -> Program:
    """Pure noise keyed by (seed, c, U-window): random disclosure bits and a
    random action; makes no child calls, so it always terminates."""
    n_act = game.action_dims[j]
    full = (1 << game.n) - 1
    mask_all = full ^ (1 << j)

    def body(ctx):
        h = _mix64(seed, int(ctx.c * 2**53), int(ctx.u_here() * 2**53),
                   int(ctx.u_next() * 2**53), int(ctx.output_action))
        if ctx.output_action:
            return h % n_act
        return (h >> 8) & mask_all

    return Program(f"noise[{j}]#{seed}", j, body, pure=True)


def best_response_to_punishment(game: BayesianGame, j: int,
                                tau: CorrelatedPolicy) -> dict[int, int]:
    values = expected_vs_policy(game, j, tau)
    return {t_j: int(np.argmax(values[t_j])) for t_j in range(game.type_dims[j])}


def best_response_to_target(game: BayesianGame, j: int,
                            target: CorrelatedPolicy) -> dict[int, int]:
    """argmax_a E_{t_-j ~ q(.|t_j)} u_j(t, (a, target_{-j}(t))), the greedy
    one-shot defection against cooperating counterparts."""
    out = {}
    marg = game.marginal_prior(j)
    other_axes = [range(d) for i, d in enumerate(game.type_dims) if i != j]
    for t_j in range(game.type_dims[j]):
        if marg[t_j] <= 0.0:
            out[t_j] = 0
            continue
        cond = game.conditional_prior(j, t_j)
        vals = np.zeros(game.action_dims[j])
        for tm in itertools.product(*other_axes):
            w = float(cond[tm]) if game.n > 1 else 1.0
            if w == 0.0:
                continue
            t = tm[:j] + (t_j,) + tm[j:]
            for a_full, p in target.dist_at(t).items():
                if p == 0.0:
                    continue
                for a_j in range(game.action_dims[j]):
                    a = a_full[:j] + (a_j,) + a_full[j + 1 :]
                    vals[a_j] += w * p * float(game.utility[t + a + (j,)])
        out[t_j] = int(np.argmax(vals))
    return out


# --------------------------------------------------------------------------
# scenarios (picklable program-profile descriptions)


@dataclass(frozen=True)
class EngineScenario:
    """Everything needed to rebuild a program profile in a worker process."""

    game: BayesianGame
    eps_ground: float
    target: CorrelatedPolicy
    punishments: dict[int, CorrelatedPolicy]
    default: dict[tuple[int, ...], float]
    deviator: tuple[str, dict] | None = None
    deviator_player: int = -1
    depth_cap: int = 10_000

    def bot_config(self, player: int, salt: str = "") -> BotConfig:
        return BotConfig(
            self.game, player, self.eps_ground, self.target,
            self.punishments, self.default, salt,
        )

    def with_deviator(self, kind: str, player: int, **params) -> "EngineScenario":
        return replace(self, deviator=(kind, params), deviator_player=player)


def make_deviator(scenario: EngineScenario, kind: str, j: int, params: dict) -> Program:
    game = scenario.game
    if kind == "never_disclose":
        amap = params.get("action_map") or best_response_to_punishment(
            game, j, scenario.punishments[j]
        )
        return never_disclose(game, j, amap)
    if kind == "disclose_then_defect":
        amap = params.get("action_map") or best_response_to_target(
            game, j, scenario.target
        )
        return disclose_then_defect(game, j, amap)
    if kind == "constant":
        return constant_action(game, j, int(params.get("action", 0)))
    if kind == "fresh_identity":
        return grounded_fair_bot(scenario.bot_config(j, salt=params.get("salt", "fresh")))
    if kind == "noise":
        return randomized_noise(game, j, int(params.get("seed", 0)))
    raise ValueError(f"unknown deviator kind {kind!r}")


def deviator_library(scenario: EngineScenario, j: int,
                     constant: int | None = None, noise_seed: int = 0) -> dict[str, Program]:
    """The documented deviators, each of which terminates given terminating
    children (none of them makes unbounded child calls)."""
    game = scenario.game
    lib = {
        "never_disclose": make_deviator(scenario, "never_disclose", j, {}),
        "disclose_then_defect": make_deviator(scenario, "disclose_then_defect", j, {}),
        "constant_action": make_deviator(
            scenario, "constant", j, {"action": 0 if constant is None else constant}
        ),
        "fresh_identity": make_deviator(scenario, "fresh_identity", j, {}),
        "randomized_noise": make_deviator(scenario, "noise", j, {"seed": noise_seed}),
    }
    return lib


def build_programs(scenario: EngineScenario) -> list[Program]:
    programs = [
        grounded_fair_bot(scenario.bot_config(i)) for i in range(scenario.game.n)
    ]
    if scenario.deviator is not None:
        kind, params = scenario.deviator
        j = scenario.deviator_player
        programs[j] = make_deviator(scenario, kind, j, params)
    return programs


# --------------------------------------------------------------------------
# Monte Carlo harnesses


@dataclass
class SweepResult:
    trials: int
    target_matches: int
    depths: np.ndarray
    calls: np.ndarray
    excluded: int  # depth-cap hits

    @property
    def all_matched(self) -> bool:
        return self.target_matches == self.trials and self.excluded == 0


@dataclass
class ExploitabilityReport:
    deviator: str
    player: int
    trials: int
    eps_ground: float
    u_bar: float
    mean_gain: float
    se: float
    delta_bound: float
    punished_fraction: float
    excluded: int
    per_type: dict = field(default_factory=dict)  # t_j -> (mean, se, count)
    gains: np.ndarray | None = None
    punished: np.ndarray | None = None
    depths: np.ndarray | None = None
    types: np.ndarray | None = None

    @property
    def ci95(self) -> float:
        return 1.96 * self.se

    def within_delta(self, sigmas: float = 3.0) -> bool:
        if self.mean_gain - sigmas * self.se > self.delta_bound:
            return False
        return all(
            m - sigmas * s <= self.delta_bound for m, s, _c in self.per_type.values()
        )

    def to_json(self) -> dict:
        return {
            "deviator": self.deviator,
            "player": self.player,
            "trials": self.trials,
            "eps_ground": self.eps_ground,
            "u_bar": self.u_bar,
            "mean_gain": self.mean_gain,
            "se": self.se,
            "ci95_half_width": self.ci95,
            "delta_bound": self.delta_bound,
            "punished_fraction": self.punished_fraction,
            "excluded_depth_cap": self.excluded,
            "within_delta": self.within_delta(),
            "per_type": {
                str(t): {"mean_gain": m, "se": s, "count": c}
                for t, (m, s, c) in self.per_type.items()
            },
        }


def _joint_type_sampler(game: BayesianGame):
    flat = game.prior.reshape(-1)
    cum = np.cumsum(flat)
    cum[-1] = 1.0
    dims = game.type_dims

    def sample(u: float) -> tuple[int, ...]:
        k = int(np.searchsorted(cum, u, side="right"))
        return tuple(int(v) for v in np.unravel_index(min(k, len(flat) - 1), dims))

    return sample


def _conditional_sampler(game: BayesianGame, j: int, t_j: int):
    cond = game.conditional_prior(j, t_j).reshape(-1)
    cum = np.cumsum(cond)
    cum[-1] = 1.0
    dims = tuple(d for i, d in enumerate(game.type_dims) if i != j)

    def sample(u: float) -> tuple[int, ...]:
        k = int(np.searchsorted(cum, u, side="right"))
        tm = np.unravel_index(min(k, len(cond) - 1), dims) if dims else ()
        tm = tuple(int(v) for v in tm)
        return tm[:j] + (t_j,) + tm[j:]

    return sample


def _exploit_block(args):
    scenario, seed, lo, hi = args
    game = scenario.game
    j = scenario.deviator_player
    signal = RandomizationSignal(seed)
    programs = build_programs(scenario)
    marg = game.marginal_prior(j)
    strata = [t_j for t_j in range(game.type_dims[j]) if marg[t_j] > 0.0]
    samplers = {t_j: _conditional_sampler(game, j, t_j) for t_j in strata}
    others = [p for p in range(game.n) if p != j]

    count = hi - lo
    gains = np.zeros(count)
    punished = np.zeros(count, dtype=bool)
    depths = np.zeros(count, dtype=np.int64)
    types = np.zeros(count, dtype=np.int64)
    ok = np.ones(count, dtype=bool)

    def loop():
        for idx in range(count):
            trial = lo + idx
            t_j = strata[trial % len(strata)]
            types[idx] = t_j
            u = float(signal.scratch_uniforms(trial, 1)[0])
            t = samplers[t_j](u)
            c = signal.draw_c(trial)
            mu = _inverse_cdf(scenario.target.dist_at(t), c)
            try:
                _disc, actions, stats = run_base_calls(
                    game, programs, t, signal, trial, scenario.depth_cap
                )
            except DepthExceeded as exc:
                ok[idx] = False
                depths[idx] = exc.stats.max_depth
                continue
            depths[idx] = stats.max_depth
            gains[idx] = float(
                game.utility[t + actions + (j,)] - game.utility[t + mu + (j,)]
            )
            punished[idx] = any(actions[p] != mu[p] for p in others)

    run_with_deep_stack(loop, scenario.depth_cap)
    return gains, punished, depths, types, ok


def estimate_exploitability(
    scenario: EngineScenario,
    trials: int,
    seed: int = 0,
    jobs: int = 1,
) -> ExploitabilityReport:
    """Monte Carlo deviation-gain estimate for the scenario's deviator.

    Per trial, the deviator's type is stratified over its positive-marginal
    types and the opponents' types are drawn from q(.|t_j); the gain is the
    deviator's payoff minus the payoff of the all-reciprocator profile, which
    provably realizes the target profile (verified separately by the
    cooperation sweep) and is therefore evaluated in closed form.
    Depth-cap hits are excluded and counted.
    """
    if scenario.deviator is None or scenario.deviator_player < 0:
        raise ValueError("scenario carries no deviator")
    blocks = _split_blocks(trials, jobs)
    args = [(scenario, seed, lo, hi) for lo, hi in blocks]
    results = _run_blocks(_exploit_block, args, jobs)
    gains = np.concatenate([r[0] for r in results])
    punished = np.concatenate([r[1] for r in results])
    depths = np.concatenate([r[2] for r in results])
    types = np.concatenate([r[3] for r in results])
    ok = np.concatenate([r[4] for r in results])

    game = scenario.game
    j = scenario.deviator_player
    kept = ok
    excluded = int((~ok).sum())
    g = gains[kept]
    mean = float(g.mean()) if len(g) else 0.0
    se = float(g.std(ddof=1) / np.sqrt(len(g))) if len(g) > 1 else 0.0
    per_type = {}
    for t_j in np.unique(types[kept]):
        sel = kept & (types == t_j)
        gt = gains[sel]
        per_type[int(t_j)] = (
            float(gt.mean()),
            float(gt.std(ddof=1) / np.sqrt(len(gt))) if len(gt) > 1 else 0.0,
            int(len(gt)),
        )
    kind = scenario.deviator[0]
    return ExploitabilityReport(
        deviator=kind,
        player=j,
        trials=trials,
        eps_ground=scenario.eps_ground,
        u_bar=game.u_max,
        mean_gain=mean,
        se=se,
        delta_bound=delta_slack(game.u_max, scenario.eps_ground),
        punished_fraction=float(punished[kept].mean()) if kept.any() else 0.0,
        excluded=excluded,
        per_type=per_type,
        gains=gains,
        punished=punished,
        depths=depths,
        types=types,
    )


def _cooperation_block(args):
    scenario, seed, lo, hi = args
    game = scenario.game
    signal = RandomizationSignal(seed)
    programs = build_programs(scenario)
    sampler = _joint_type_sampler(game)
    count = hi - lo
    matches = np.zeros(count, dtype=bool)
    depths = np.zeros(count, dtype=np.int64)
    calls = np.zeros(count, dtype=np.int64)
    ok = np.ones(count, dtype=bool)

    def loop():
        for idx in range(count):
            trial = lo + idx
            t = sampler(float(signal.scratch_uniforms(trial, 1)[0]))
            c = signal.draw_c(trial)
            mu = _inverse_cdf(scenario.target.dist_at(t), c)
            try:
                _disc, actions, stats = run_base_calls(
                    game, programs, t, signal, trial, scenario.depth_cap
                )
            except DepthExceeded as exc:
                ok[idx] = False
                depths[idx] = exc.stats.max_depth
                continue
            matches[idx] = actions == mu
            depths[idx] = stats.max_depth
            calls[idx] = stats.total_calls

    run_with_deep_stack(loop, scenario.depth_cap)
    return matches, depths, calls, ok


def cooperation_sweep(scenario: EngineScenario, trials: int, seed: int = 0,
                      jobs: int = 1) -> SweepResult:
    """Run the all-reciprocator profile and count trials whose base actions
    equal the realized target profile."""
    blocks = _split_blocks(trials, jobs)
    args = [(scenario, seed, lo, hi) for lo, hi in blocks]
    results = _run_blocks(_cooperation_block, args, jobs)
    matches = np.concatenate([r[0] for r in results])
    depths = np.concatenate([r[1] for r in results])
    calls = np.concatenate([r[2] for r in results])
    ok = np.concatenate([r[3] for r in results])
    return SweepResult(trials, int(matches.sum()), depths, calls, int((~ok).sum()))


@dataclass
class TerminationReport:
    trials: int
    eps_ground: float
    depths: np.ndarray
    ks: np.ndarray
    empirical_tail: np.ndarray  # P(depth > 2K)
    bound: np.ndarray  # (1 - eps^2)^K
    se: np.ndarray

    def within_bound(self, sigmas: float = 3.0) -> bool:
        return bool(np.all(self.empirical_tail <= self.bound + sigmas * self.se))

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "eps_ground": self.eps_ground,
            "max_depth": int(self.depths.max()),
            "mean_depth": float(self.depths.mean()),
            "within_bound": self.within_bound(),
        }


def termination_profile(scenario: EngineScenario, trials: int, seed: int = 0,
                        k_max: int = 200, jobs: int = 1) -> TerminationReport:
    """Depth histogram of the all-reciprocator profile against the closed-form
    tail: the stack collapses once two consecutive levels ground together, so
    P(max depth > 2K) <= (1 - eps^2)^K."""
    sweep = cooperation_sweep(scenario, trials, seed, jobs)
    depths = sweep.depths
    ks = np.arange(1, k_max + 1)
    emp = np.array([(depths > 2 * k).mean() for k in ks])
    bound = (1.0 - scenario.eps_ground**2) ** ks
    se = np.sqrt(np.maximum(emp * (1 - emp), 1e-12) / trials)
    return TerminationReport(trials, scenario.eps_ground, depths, ks, emp, bound, se)


# --------------------------------------------------------------------------
# process-level parallelism (trials are independent; randomness is counter
# based, so block splits cannot change any trial's outcome)


def _split_blocks(trials: int, jobs: int) -> list[tuple[int, int]]:
    jobs = max(1, int(jobs))
    if jobs == 1 or trials < 256:
        return [(0, trials)]
    per = (trials + jobs - 1) // jobs
    return [(lo, min(lo + per, trials)) for lo in range(0, trials, per)]


def _run_blocks(fn, args, jobs: int):
    if jobs <= 1 or len(args) == 1:
        return [fn(a) for a in args]
    import multiprocessing as mp

    ctx = mp.get_context("fork")
    with ctx.Pool(processes=min(jobs, len(args))) as pool:
        return pool.map(fn, args)
