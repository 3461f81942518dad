"""Conditional commitment/disclosure devices and the folk-profile construction.

A device is identified by a fingerprint (hash of its canonical behavior
specification); equality of devices is equality of fingerprints, since
behavioral equivalence is undecidable in general. Disclosure depends only on
the other devices' fingerprints, responses only on fingerprints, the
correlation value, own type and the disclosed-type ledger, so evaluation has
no circularity and is order-independent.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .games import (
    BayesianGame,
    CorrelatedPolicy,
    PayoffVector,
    _inverse_cdf,
    ex_post_payoffs,
    induced_payoff_vector,
    realize_at,
)
from .solvers import SolverReport, check_feasible, check_INTIR, expected_vs_policy


class InformationViolation(RuntimeError):
    """A response tried to read a type that was never disclosed to it."""


class DeviceConstructionError(ValueError):
    """Folk construction is missing a punishment entry or malformed policy."""


class TypeLedger:
    """Types an evaluation context has legitimately learned."""

    __slots__ = ("owner", "_known")

    def __init__(self, owner: int, own_type: int):
        self.owner = owner
        self._known: dict[int, int] = {owner: own_type}

    def learn(self, player: int, t: int) -> None:
        self._known[player] = t

    def knows(self, player: int) -> bool:
        return player in self._known

    def type_of(self, player: int) -> int:
        try:
            return self._known[player]
        except KeyError:
            raise InformationViolation(
                f"player {self.owner}'s device read player {player}'s undisclosed type"
            ) from None

    def try_full_profile(self, n: int) -> tuple[int, ...] | None:
        if len(self._known) < n:
            return None
        return tuple(self._known[i] for i in range(n))


@dataclass(frozen=True, eq=False)
class Device:
    """respond(other_fps, c, own_type, ledger) -> own action index;
    disclose(other_fps, own_type) -> {other player: bit}.

    c_breakpoints lists the interior breakpoints of respond as a function of
    c (None if unknown); exact expectation over c integrates the pieces.
    """

    kind: str
    player: int
    fingerprint: str
    respond: Callable
    disclose: Callable
    c_breakpoints: tuple[float, ...] | None = ()

    def __eq__(self, other):
        return isinstance(other, Device) and self.fingerprint == other.fingerprint

    def __hash__(self):
        return hash(self.fingerprint)


@dataclass(frozen=True)
class CommitmentOutcome:
    disclosure: np.ndarray  # disclosure[i, j] = 1 iff i disclosed to j
    actions: tuple[int, ...]
    payoffs: np.ndarray


def _digest(obj) -> str:
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def game_digest(game: BayesianGame) -> str:
    h = hashlib.sha256()
    h.update(repr(game.types).encode())
    h.update(repr(game.actions).encode())
    h.update(game.prior.tobytes())
    h.update(game.utility.tobytes())
    return h.hexdigest()[:16]


def policy_digest(policy: CorrelatedPolicy) -> str:
    entries = sorted(
        (repr(key), sorted((repr(a), round(p, 15)) for a, p in dist.items()))
        for key, dist in policy.table.items()
    )
    return _digest([policy.scope.kind, policy.scope.player, entries])


def _dist_breakpoints(dist: Mapping) -> set[float]:
    pts, cum = set(), 0.0
    for a in sorted(dist):
        cum += dist[a]
        pts.add(min(cum, 1.0))
    return pts


def policy_breakpoints(policy: CorrelatedPolicy) -> set[float]:
    out: set[float] = set()
    for dist in policy.table.values():
        out |= _dist_breakpoints(dist)
    return out


# --------------------------------------------------------------------------
# evaluation


def evaluate_commitment_game(
    game: BayesianGame,
    profile: Sequence[Device],
    t: tuple[int, ...],
    signal,
    trial: int,
    order: Sequence[int] | None = None,
) -> CommitmentOutcome:
    """Disclosure functions run first (fingerprint-conditioned only), the type
    ledgers are built from their returns, then responses run with the trial's
    correlation value. `order` permutes evaluation order; outcomes must not
    depend on it."""
    c = signal.draw_c(trial)
    return evaluate_at(game, profile, t, c, order)


def evaluate_at(
    game: BayesianGame,
    profile: Sequence[Device],
    t: tuple[int, ...],
    c: float,
    order: Sequence[int] | None = None,
) -> CommitmentOutcome:
    n = game.n
    if len(profile) != n:
        raise DeviceConstructionError("profile must have one device per player")
    t = tuple(int(v) for v in t)
    fps = [d.fingerprint for d in profile]
    others = [tuple(p for p in range(n) if p != i) for i in range(n)]
    other_fps = [tuple(fps[p] for p in others[i]) for i in range(n)]
    seq = list(order) if order is not None else list(range(n))

    disclosure = np.eye(n, dtype=int)
    bits: list[dict[int, int]] = [dict() for _ in range(n)]
    for i in seq:
        bits[i] = dict(profile[i].disclose(other_fps[i], t[i]))
        for j in others[i]:
            disclosure[i, j] = int(bits[i].get(j, 0))

    ledgers = [TypeLedger(i, t[i]) for i in range(n)]
    for i in range(n):
        for j in others[i]:
            if disclosure[j, i]:
                ledgers[i].learn(j, t[j])

    actions = [0] * n
    for i in seq:
        actions[i] = int(profile[i].respond(other_fps[i], c, t[i], ledgers[i]))
    payoffs = ex_post_payoffs(game, t, tuple(actions))
    return CommitmentOutcome(disclosure, tuple(actions), payoffs)


def _c_partition(profile: Sequence[Device]) -> list[tuple[float, float]] | None:
    """(midpoint, length) pieces covering [0, 1); None if any device has an
    unknown response-in-c structure."""
    pts: set[float] = {1.0}
    for d in profile:
        if d.c_breakpoints is None:
            return None
        pts |= set(d.c_breakpoints)
    ordered = sorted(p for p in pts if 0.0 < p <= 1.0)
    out, prev = [], 0.0
    for p in ordered:
        if p - prev > 1e-15:
            out.append(((prev + p) / 2.0, p - prev))
        prev = p
    return out


def interim_device_payoff(
    game: BayesianGame,
    profile: Sequence[Device],
    j: int,
    t_j: int,
    signal=None,
    trials: int = 0,
) -> tuple[float, float]:
    """Player j's ex interim payoff under the profile, with standard error.

    Exact (SE = 0) when every device declares its c-breakpoints; otherwise a
    Monte Carlo average over `trials` correlation draws."""
    cond = game.conditional_prior(j, t_j)
    other_axes = [range(d) for i, d in enumerate(game.type_dims) if i != j]
    partition = _c_partition(profile)
    if partition is not None:
        total = 0.0
        import itertools

        for tm in itertools.product(*other_axes):
            w = float(cond[tm])
            if w == 0.0:
                continue
            t = tm[:j] + (t_j,) + tm[j:]
            for mid, length in partition:
                out = evaluate_at(game, profile, t, mid)
                total += w * length * float(out.payoffs[j])
        return total, 0.0
    if signal is None or trials <= 0:
        raise ValueError("Monte Carlo fallback needs a signal and trials > 0")
    import itertools

    samples = np.zeros(trials)
    for k in range(trials):
        acc = 0.0
        for tm in itertools.product(*other_axes):
            w = float(cond[tm])
            if w == 0.0:
                continue
            t = tm[:j] + (t_j,) + tm[j:]
            out = evaluate_commitment_game(game, profile, t, signal, k)
            acc += w * float(out.payoffs[j])
        samples[k] = acc
    se = float(samples.std(ddof=1) / np.sqrt(trials)) if trials > 1 else float("inf")
    return float(samples.mean()), se


# --------------------------------------------------------------------------
# folk construction


@dataclass(frozen=True)
class FolkBundle:
    """Device profile of the folk construction plus its ingredients."""

    devices: tuple[Device, ...]
    target: CorrelatedPolicy
    punishments: dict[int, CorrelatedPolicy]
    default: dict[tuple[int, ...], float]
    payoff: PayoffVector
    expected_fps: tuple[str, ...]


def build_folk_devices(
    game: BayesianGame,
    target: CorrelatedPolicy,
    punishments: Mapping[int, CorrelatedPolicy],
    default: Mapping[tuple[int, ...], float] | None = None,
    salt: str = "",
) -> FolkBundle:
    """Profile that discloses to exact-fingerprint matches and plays the
    target realization when everyone matches, the deviator's minimax
    punishment when exactly one mismatches, and a type-free default otherwise.

    `default` is a distribution over joint actions; it doubles as the
    fallback when a response lacks the types its punishment conditions on.
    """
    n = game.n
    target.validate(game)
    for j in range(n):
        if j not in punishments:
            raise DeviceConstructionError(f"missing punishment entry for player {j}")
        punishments[j].validate(game)
    if default is None:
        default = {tuple(0 for _ in range(n)): 1.0}
    default = dict(default)
    if abs(sum(default.values()) - 1.0) > 1e-9 or any(p < 0 for p in default.values()):
        raise DeviceConstructionError("default punishment must be a distribution")

    gd = game_digest(game)
    td = policy_digest(target)
    pd = {j: policy_digest(punishments[j]) for j in range(n)}
    dd = _digest(sorted((repr(a), round(p, 15)) for a, p in default.items()))
    fps = tuple(
        _digest({"kind": "folk", "player": i, "game": gd, "target": td,
                 "punish": pd, "default": dd, "salt": salt})
        for i in range(n)
    )

    breakpoints: set[float] = policy_breakpoints(target) | _dist_breakpoints(default)
    for j in range(n):
        breakpoints |= policy_breakpoints(punishments[j])
    bps = tuple(sorted(breakpoints))

    realize_cache: dict[float, dict[tuple[int, ...], tuple[int, ...]]] = {}

    def target_action(c: float, t: tuple[int, ...], i: int) -> int:
        prof = realize_cache.get(c)
        if prof is None:
            prof = dict(realize_at(target, game, c).assignment)
            if len(realize_cache) > 64:
                realize_cache.clear()
            realize_cache[c] = prof
        return prof[t][i]

    def punish_action(c: float, i: int, deviator: int, ledger: TypeLedger) -> int:
        others = [p for p in range(n) if p != deviator]
        if i == deviator or not all(ledger.knows(p) for p in others):
            return _inverse_cdf(default, c)[i]
        t_minus = tuple(ledger.type_of(p) for p in others)
        joint = _inverse_cdf(punishments[deviator].dist_at(t_minus), c)
        return joint[others.index(i)]

    def make_device(i: int) -> Device:
        other_players = tuple(p for p in range(n) if p != i)
        expected = tuple(fps[p] for p in other_players)

        def disclose(other_fps, t_i, expected=expected, other_players=other_players):
            return {
                p: int(fp == efp)
                for p, fp, efp in zip(other_players, other_fps, expected)
            }

        def respond(other_fps, c, t_i, ledger,
                    expected=expected, other_players=other_players, i=i):
            mismatches = [
                p for p, fp, efp in zip(other_players, other_fps, expected) if fp != efp
            ]
            if not mismatches:
                t = ledger.try_full_profile(n)
                if t is not None:
                    return target_action(c, t, i)
                return _inverse_cdf(default, c)[i]
            if len(mismatches) == 1:
                return punish_action(c, i, mismatches[0], ledger)
            return _inverse_cdf(default, c)[i]

        return Device("folk", i, fps[i], respond, disclose, bps)

    devices = tuple(make_device(i) for i in range(n))
    payoff = induced_payoff_vector(game, target)
    return FolkBundle(devices, target, dict(punishments), default, payoff, fps)


# --------------------------------------------------------------------------
# deviation library and equilibrium verification


def constant_device(game: BayesianGame, j: int, a_j: int, disclose_bit: int = 0) -> Device:
    fp = _digest({"kind": "constant", "player": j, "action": a_j, "bit": disclose_bit})
    others = tuple(p for p in range(game.n) if p != j)
    return Device(
        "constant",
        j,
        fp,
        respond=lambda other_fps, c, t_j, ledger, a_j=a_j: a_j,
        disclose=lambda other_fps, t_j, bit=disclose_bit: {p: bit for p in others},
        c_breakpoints=(),
    )


def best_responder_device(game: BayesianGame, j: int, tau: CorrelatedPolicy) -> Device:
    """Non-disclosing deviator playing, per type, the best response to the
    punishment it will face."""
    values = expected_vs_policy(game, j, tau)
    best = {t_j: int(np.argmax(values[t_j])) for t_j in range(game.type_dims[j])}
    fp = _digest({"kind": "best-responder", "player": j, "actions": sorted(best.items())})
    others = tuple(p for p in range(game.n) if p != j)
    return Device(
        "best-responder",
        j,
        fp,
        respond=lambda other_fps, c, t_j, ledger, best=best: best[t_j],
        disclose=lambda other_fps, t_j: {p: 0 for p in others},
        c_breakpoints=(),
    )


def folk_deviation_library(game: BayesianGame, bundle: FolkBundle, j: int) -> list[Device]:
    """Non-disclosing best-responder, every constant-action device, and a
    truthful mimic of the folk device with a fresh fingerprint."""
    out = [best_responder_device(game, j, bundle.punishments[j])]
    out.extend(constant_device(game, j, a) for a in range(game.action_dims[j]))
    mimic_bundle = build_folk_devices(
        game, bundle.target, bundle.punishments, bundle.default, salt="fresh-identity"
    )
    out.append(mimic_bundle.devices[j])
    return out


@dataclass
class BNEReport:
    verdict: bool
    tol: float
    max_gains: dict = field(default_factory=dict)  # (j, t_j) -> (gain, device kind, se)

    def worst(self) -> float:
        return max((g for g, _k, _se in self.max_gains.values()), default=float("-inf"))

    def to_json(self) -> dict:
        return {
            "verdict": bool(self.verdict),
            "tol": self.tol,
            "max_gain": self.worst(),
            "per_type": {
                f"{j},{t_j}": {"gain": g, "device": k, "se": se}
                for (j, t_j), (g, k, se) in self.max_gains.items()
            },
        }


def verify_BNE(
    game: BayesianGame,
    profile: Sequence[Device],
    deviations: Mapping[int, Sequence[Device]],
    tol: float = 1e-9,
    trials: int = 2000,
    seed: int = 0,
) -> BNEReport:
    """Estimate, for every player, type, and library deviation, the ex interim
    gain over the profile; the profile passes when every gain is at most
    tol + 3 standard errors (errors are zero on the exact integration path)."""
    from .signals import RandomizationSignal

    signal = RandomizationSignal(seed)
    report = BNEReport(True, tol)
    for j, devs in deviations.items():
        marg = game.marginal_prior(j)
        for t_j in range(game.type_dims[j]):
            if marg[t_j] <= 0.0:
                continue
            eq_value, eq_se = interim_device_payoff(
                game, profile, j, t_j, signal, trials
            )
            best = (float("-inf"), "none", 0.0)
            for dev in devs:
                alt = list(profile)
                alt[j] = dev
                val, se = interim_device_payoff(game, alt, j, t_j, signal, trials)
                gain = val - eq_value
                if gain > best[0]:
                    best = (gain, dev.kind, float(np.hypot(se, eq_se)))
            report.max_gains[(j, t_j)] = best
            if best[0] > tol + 3.0 * best[2]:
                report.verdict = False
    return report


def verify_prop1(
    game: BayesianGame,
    profile: Sequence[Device],
    trials: int = 2000,
    seed: int = 0,
    tol: float = 1e-9,
) -> SolverReport:
    """The profile's induced payoff vector must be feasible and INTIR."""
    from .signals import RandomizationSignal

    signal = RandomizationSignal(seed)
    values = []
    for j in range(game.n):
        marg = game.marginal_prior(j)
        row = np.zeros(game.type_dims[j])
        for t_j in range(game.type_dims[j]):
            if marg[t_j] > 0.0:
                row[t_j], _se = interim_device_payoff(game, profile, j, t_j, signal, trials)
        values.append(row)
    x = PayoffVector(tuple(values))
    feas = check_feasible(game, x, tol=max(tol, 1e-7))
    intir = check_INTIR(game, x, tol=max(tol, 1e-7))
    return SolverReport(
        "prop1",
        feas.verdict and intir.verdict,
        tol,
        violations=feas.violations + intir.violations,
        details={"feasible": feas.verdict, "INTIR": intir.verdict, "payoff": x.values},
    )
