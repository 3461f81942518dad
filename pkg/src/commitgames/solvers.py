"""Feasibility, interim individual rationality, incentive compatibility and
ex post efficiency checks for payoff vectors, plus minimax punishment policies.

Feasibility and the punishment epigraph are linear programs; the IC check is
pure enumeration (its quantifier structure is finite). Equality constraints
are relaxed to +/- tol bands since exact equality is unreachable in floats.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .games import (
    DEFAULT_TOL,
    BayesianGame,
    CorrelatedPolicy,
    PayoffVector,
    PolicyScopeError,
    Scope,
    induced_payoff_vector,
    matrix_to_policy,
    minus_player,
)
from .lp import EQ, LE, LinearProgram, lp_solve, lp_solve_lexicographic


class ConsistencyError(ValueError):
    """The supplied payoff vector is not induced by the supplied policy."""


@dataclass
class SolverReport:
    check: str
    verdict: bool
    tol: float
    witness: CorrelatedPolicy | None = None
    violations: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "verdict": bool(self.verdict),
            "tol": self.tol,
            "witness": _policy_json(self.witness),
            "violations": [
                {"player": v[0], "types": v[1], "gain": v[2]} for v in self.violations
            ],
            "details": _details_json(self.details),
        }


def _policy_json(policy: CorrelatedPolicy | None):
    if policy is None:
        return None
    return {
        "scope": {"kind": policy.scope.kind, "player": policy.scope.player},
        "table": {
            ",".join(map(str, _flatkey(key))): {
                ",".join(map(str, a)): p for a, p in dist.items()
            }
            for key, dist in policy.table.items()
        },
    }


def _flatkey(key):
    if key and isinstance(key[0], tuple):  # reported scope: (s_j, t_minus)
        return (key[0],) + tuple(key[1])
    return key


def _details_json(details: dict) -> dict:
    out = {}
    for k, v in details.items():
        if isinstance(v, CorrelatedPolicy):
            out[k] = _policy_json(v)
        elif isinstance(v, dict) and any(isinstance(x, CorrelatedPolicy) for x in v.values()):
            out[k] = {str(kk): _policy_json(vv) for kk, vv in v.items()}
        elif isinstance(v, np.ndarray):
            out[k] = v.tolist()
        else:
            out[k] = v
    return out


# --------------------------------------------------------------------------
# feasibility


def check_feasible(game: BayesianGame, x: PayoffVector, tol: float = DEFAULT_TOL) -> SolverReport:
    """Is there a correlated policy whose ex interim payoffs equal x?

    LP over mu(a|t) >= 0 with per-type simplex rows and, for every player j
    and positive-marginal type t_j, the payoff identity within a +/- tol band.
    Types with zero marginal prior contribute no constraint.
    """
    x.check_shape(game)
    n_actions = game.num_joint_actions()
    flat_u = game.flat_utility()
    q_flat = game.prior.reshape(-1)
    all_types = list(game.joint_types())
    pos = [k for k, t in enumerate(all_types) if q_flat[k] > 0.0]
    pos_index = {k: i for i, k in enumerate(pos)}
    nvars = len(pos) * n_actions

    # simplex equalities, block diagonal
    a_eq = sp.kron(sp.eye(len(pos), format="csr"), np.ones((1, n_actions)), format="csr")
    b_eq = np.ones(len(pos))

    rows_ub, rhs_ub = [], []
    skipped = []
    for j in range(game.n):
        marg = game.marginal_prior(j)
        for t_j in range(game.type_dims[j]):
            if marg[t_j] <= 0.0:
                skipped.append((j, t_j))
                continue
            coeff = np.zeros(nvars)
            for k in pos:
                t = all_types[k]
                if t[j] != t_j:
                    continue
                w = q_flat[k] / marg[t_j]
                i = pos_index[k]
                coeff[i * n_actions : (i + 1) * n_actions] = w * flat_u[k, :, j]
            target = x.get(j, t_j)
            rows_ub.append(coeff)
            rhs_ub.append(target + tol)
            rows_ub.append(-coeff)
            rhs_ub.append(-target + tol)

    a_ub = sp.csr_matrix(np.vstack(rows_ub)) if rows_ub else None
    res = linprog(
        np.zeros(nvars),
        A_ub=a_ub,
        b_ub=np.array(rhs_ub) if rhs_ub else None,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
    )
    details: dict = {"skipped_types": skipped}
    if res.status == 0:
        mat = np.zeros((len(all_types), n_actions))
        for k in pos:
            mat[k] = res.x[pos_index[k] * n_actions : (pos_index[k] + 1) * n_actions]
        for k, t in enumerate(all_types):
            if q_flat[k] <= 0.0:
                mat[k, 0] = 1.0  # unconstrained off-support rows
        witness = matrix_to_policy(game, mat)
        return SolverReport("feasible", True, tol, witness=witness, details=details)
    if res.status == 2:
        details["infeasibility_gap"] = _feasibility_gap(
            nvars, a_ub, rhs_ub, a_eq, b_eq
        )
        return SolverReport("feasible", False, tol, details=details)
    raise ArithmeticError(f"feasibility LP failed: {res.message}")


def _feasibility_gap(nvars, a_ub, rhs_ub, a_eq, b_eq) -> float:
    """Elastic phase-1 value certifying infeasibility when > 1e-8."""
    m_ub = a_ub.shape[0] if a_ub is not None else 0
    m_eq = a_eq.shape[0]
    blocks_ub = [a_ub, -sp.eye(m_ub, format="csr")] if m_ub else None
    a_ub2 = sp.hstack(
        [blocks_ub[0], blocks_ub[1], sp.csr_matrix((m_ub, 2 * m_eq))], format="csr"
    ) if m_ub else None
    a_eq2 = sp.hstack(
        [a_eq, sp.csr_matrix((m_eq, m_ub)), sp.eye(m_eq, format="csr"), -sp.eye(m_eq, format="csr")],
        format="csr",
    )
    c = np.concatenate([np.zeros(nvars), np.ones(m_ub + 2 * m_eq)])
    res = linprog(
        c,
        A_ub=a_ub2,
        b_ub=np.array(rhs_ub) if m_ub else None,
        A_eq=a_eq2,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        raise ArithmeticError(f"phase-1 for feasibility failed: {res.message}")
    return float(res.fun)


def check_feasible_IC(game: BayesianGame, x: PayoffVector, tol: float = DEFAULT_TOL) -> SolverReport:
    """Joint LP: is there one correlated policy that induces x *and* is IC?

    This is the achievability question for devices without disclosure: the
    feasibility constraints of check_feasible plus, for every (j, t_j, s_j),
    the linear misreport bound
    sum_{t_-j} q(t_-j|t_j) E_{mu(.|s_j,t_-j)} u_j((t_j,t_-j), a) <= x_j(t_j).
    Variables cover all joint types (misreports may condition off-support).
    """
    x.check_shape(game)
    n_actions = game.num_joint_actions()
    flat_u = game.flat_utility()
    q_flat = game.prior.reshape(-1)
    all_types = list(game.joint_types())
    index_of = {t: k for k, t in enumerate(all_types)}
    nvars = len(all_types) * n_actions

    a_eq = sp.kron(sp.eye(len(all_types), format="csr"), np.ones((1, n_actions)), format="csr")
    b_eq = np.ones(len(all_types))

    rows_ub, rhs_ub = [], []
    for j in range(game.n):
        marg = game.marginal_prior(j)
        for t_j in range(game.type_dims[j]):
            if marg[t_j] <= 0.0:
                continue
            coeff = np.zeros(nvars)
            for k, t in enumerate(all_types):
                if t[j] != t_j or q_flat[k] <= 0.0:
                    continue
                w = q_flat[k] / marg[t_j]
                coeff[k * n_actions : (k + 1) * n_actions] = w * flat_u[k, :, j]
            target = x.get(j, t_j)
            rows_ub.append(coeff)
            rhs_ub.append(target + tol)
            rows_ub.append(-coeff)
            rhs_ub.append(-target + tol)
            # misreport rows: payoff from conditioning on s_j instead of t_j
            for s_j in range(game.type_dims[j]):
                if s_j == t_j:
                    continue
                coeff = np.zeros(nvars)
                for k, t in enumerate(all_types):
                    if t[j] != t_j or q_flat[k] <= 0.0:
                        continue
                    w = q_flat[k] / marg[t_j]
                    reported = t[:j] + (s_j,) + t[j + 1 :]
                    kr = index_of[reported]
                    # utility felt at the true profile, policy at the reported one
                    coeff[kr * n_actions : (kr + 1) * n_actions] += w * flat_u[k, :, j]
                rows_ub.append(coeff)
                rhs_ub.append(target + tol)

    res = linprog(
        np.zeros(nvars),
        A_ub=sp.csr_matrix(np.vstack(rows_ub)),
        b_ub=np.array(rhs_ub),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
    )
    if res.status == 0:
        mat = res.x.reshape(len(all_types), n_actions)
        witness = matrix_to_policy(game, np.maximum(mat, 0.0))
        return SolverReport("feasible+IC", True, tol, witness=witness)
    if res.status == 2:
        return SolverReport("feasible+IC", False, tol)
    raise ArithmeticError(f"feasible+IC LP failed: {res.message}")


# --------------------------------------------------------------------------
# punishment epigraph (INTIR + minimax)


def _other_type_space(game: BayesianGame, j: int):
    dims = [range(d) for i, d in enumerate(game.type_dims) if i != j]
    return list(itertools.product(*dims))


def _other_action_space(game: BayesianGame, j: int):
    dims = [range(d) for i, d in enumerate(game.action_dims) if i != j]
    return list(itertools.product(*dims))


def _insert(j: int, own, minus: tuple) -> tuple:
    return minus[:j] + (own,) + minus[j:]


def _punishment_epigraph(game: BayesianGame, j: int, x: PayoffVector):
    """LP: min z s.t. for all (t_j, a_j):
    E_{t_-j ~ q(.|t_j)} E_{tau(.|t_-j)} u_j(t, (a_j, a_-j)) - x_j(t_j) <= z.

    Variables are [z] + tau(a_-j | t_-j) over positive-marginal t_-j.
    """
    others_t = _other_type_space(game, j)
    others_a = _other_action_space(game, j)
    # marginal probability of each t_-j
    marg_minus = game.prior.sum(axis=j) if game.n > 1 else np.array(1.0)
    keep = [tm for tm in others_t if game.n == 1 or marg_minus[tm] > 0.0]
    var_of = {tm: 1 + i * len(others_a) for i, tm in enumerate(keep)}
    nvars = 1 + len(keep) * len(others_a)

    lp = LinearProgram(
        np.concatenate([[1.0], np.zeros(nvars - 1)]),
        "min",
        bounds=[(None, None)] + [(0.0, 1.0)] * (nvars - 1),
    )
    marg_j = game.marginal_prior(j)
    for t_j in range(game.type_dims[j]):
        if marg_j[t_j] <= 0.0:
            continue
        cond = game.conditional_prior(j, t_j)
        for a_j in range(game.action_dims[j]):
            coeff = np.zeros(nvars)
            coeff[0] = -1.0
            for tm in keep:
                w = float(cond[tm]) if game.n > 1 else 1.0
                if w == 0.0:
                    continue
                t = _insert(j, t_j, tm)
                base = var_of[tm]
                for ai, am in enumerate(others_a):
                    a = _insert(j, a_j, am)
                    coeff[base + ai] += w * float(game.utility[t + a + (j,)])
            lp.add_row(coeff, LE, x.get(j, t_j))
    for tm in keep:
        coeff = np.zeros(nvars)
        coeff[var_of[tm] : var_of[tm] + len(others_a)] = 1.0
        lp.add_row(coeff, EQ, 1.0)
    return lp, keep, others_a


def _tau_from_solution(game, j, sol_x, keep, others_a) -> CorrelatedPolicy:
    table = {}
    for i, tm in enumerate(keep):
        row = sol_x[1 + i * len(others_a) : 1 + (i + 1) * len(others_a)]
        # 1e-8 floor drops solver dust (incl. lexicographic pin bands)
        dist = {others_a[k]: float(p) for k, p in enumerate(row) if p > 1e-8}
        total = sum(dist.values())
        table[tm] = {a: p / total for a, p in dist.items()}
    for tm in _other_type_space(game, j):
        if tm not in table:
            table[tm] = {others_a[0]: 1.0}
    return CorrelatedPolicy(minus_player(j), table)


def check_INTIR(game: BayesianGame, x: PayoffVector, tol: float = DEFAULT_TOL) -> SolverReport:
    """For each player j, is there a punishment policy holding every type of j
    at or below x_j(t_j)? Verdict is the conjunction over players; witnesses
    are the punishment policies."""
    x.check_shape(game)
    witnesses, values, violations = {}, {}, []
    for j in range(game.n):
        lp, keep, others_a = _punishment_epigraph(game, j, x)
        sol = lp_solve(lp)
        if not sol.optimal:
            raise ArithmeticError(f"punishment epigraph for player {j}: {sol.status}")
        values[j] = sol.objective_value
        witnesses[j] = _tau_from_solution(game, j, sol.x, keep, others_a)
        if sol.objective_value > tol:
            worst = _worst_type(game, j, x, witnesses[j])
            violations.append((j, worst, sol.objective_value))
    return SolverReport(
        "INTIR",
        not violations,
        tol,
        violations=violations,
        details={"witnesses": witnesses, "values": values},
    )


def _worst_type(game, j, x, tau) -> int:
    br = best_response_values(game, j, tau)
    gaps = [br[t_j] - x.get(j, t_j) for t_j in range(game.type_dims[j])]
    return int(np.argmax(gaps))


def minimax_policy(game: BayesianGame, j: int, x: PayoffVector,
                   lexicographic: bool = True) -> CorrelatedPolicy:
    """Punishment policy minimizing max_{t_j} [BR_j(t_j, tau) - x_j(t_j)].

    With lexicographic=True the returned policy is the lexicographically
    smallest optimal point (z first, then tau components in canonical order),
    which pins the output among multiple minimax witnesses.
    """
    x.check_shape(game)
    lp, keep, others_a = _punishment_epigraph(game, j, x)
    sol = lp_solve_lexicographic(lp) if lexicographic else lp_solve(lp)
    if not sol.optimal:
        raise ArithmeticError(f"minimax epigraph for player {j}: {sol.status}")
    return _tau_from_solution(game, j, sol.x, keep, others_a)


def punishment_value(game: BayesianGame, j: int, x: PayoffVector,
                     tau: CorrelatedPolicy) -> float:
    """max_{t_j} [BR_j(t_j, tau) - x_j(t_j)], evaluated directly."""
    br = best_response_values(game, j, tau)
    marg = game.marginal_prior(j)
    gaps = [
        br[t_j] - x.get(j, t_j)
        for t_j in range(game.type_dims[j])
        if marg[t_j] > 0.0
    ]
    return max(gaps)


def expected_vs_policy(game: BayesianGame, j: int, tau: CorrelatedPolicy) -> np.ndarray:
    """Matrix E[t_j, a_j] of player j's expected payoff from a_j while the
    others play tau(.|t_-j); tau has scope minus-player(j)."""
    if tau.scope != minus_player(j):
        raise PolicyScopeError(f"policy must have scope minus-player({j})")
    out = np.zeros((game.type_dims[j], game.action_dims[j]))
    marg = game.marginal_prior(j)
    for t_j in range(game.type_dims[j]):
        if marg[t_j] <= 0.0:
            continue
        cond = game.conditional_prior(j, t_j) if game.n > 1 else None
        for tm in _other_type_space(game, j):
            w = float(cond[tm]) if game.n > 1 else 1.0
            if w == 0.0:
                continue
            t_slice = _insert(j, t_j, tm)
            for am, p in tau.dist_at(tm).items():
                if p == 0.0:
                    continue
                idx = t_slice + _insert(j, slice(None), am) + (j,)
                out[t_j] += w * p * game.utility[idx]
    return out


def best_response_values(game: BayesianGame, j: int, tau: CorrelatedPolicy) -> np.ndarray:
    """BR_j(t_j, tau) = max_{a_j} expected payoff, per type of j."""
    return expected_vs_policy(game, j, tau).max(axis=1)


# --------------------------------------------------------------------------
# incentive compatibility


def check_IC(game: BayesianGame, policy: CorrelatedPolicy, x: PayoffVector,
             tol: float = DEFAULT_TOL) -> SolverReport:
    """Enumerate all (player, true type, reported type) triples and flag any
    report whose conditional payoff beats x_j(t_j) by more than tol.

    The supplied x must be induced by the policy (re-verified)."""
    if policy.scope.kind != "full":
        raise PolicyScopeError("IC check needs a full-profile policy")
    x.check_shape(game)
    induced = induced_payoff_vector(game, policy)
    for j in range(game.n):
        marg = game.marginal_prior(j)
        for t_j in range(game.type_dims[j]):
            if marg[t_j] > 0.0 and abs(induced.get(j, t_j) - x.get(j, t_j)) > max(tol, 1e-9) * 10:
                raise ConsistencyError(
                    f"x[{j}][{t_j}]={x.get(j, t_j)} but the policy induces "
                    f"{induced.get(j, t_j)}"
                )

    violations = []
    for j in range(game.n):
        marg = game.marginal_prior(j)
        for t_j in range(game.type_dims[j]):
            if marg[t_j] <= 0.0:
                continue
            cond = game.conditional_prior(j, t_j)
            for s_j in range(game.type_dims[j]):
                if s_j == t_j:
                    continue
                value = 0.0
                for tm in _other_type_space(game, j):
                    w = float(cond[tm]) if game.n > 1 else 1.0
                    if w == 0.0:
                        continue
                    true_t = _insert(j, t_j, tm)
                    reported = _insert(j, s_j, tm)
                    acc = 0.0
                    for a, p in policy.dist_at(reported).items():
                        if p != 0.0:
                            acc += p * float(game.utility[true_t + a + (j,)])
                    value += w * acc
                gain = value - x.get(j, t_j)
                if gain > tol:
                    violations.append((j, (t_j, s_j), gain))
    return SolverReport("IC", not violations, tol, violations=violations)


# --------------------------------------------------------------------------
# ex post efficiency


def check_efficient(game: BayesianGame, t: tuple[int, ...], x_at_t,
                    tol: float = DEFAULT_TOL) -> SolverReport:
    """Is x_at_t on the Pareto frontier of the utility set at type profile t?

    LP: maximize sum of slacks s.t. u_i(t, mu~) >= x_i + slack_i, slack >= 0,
    mu~ a distribution over joint actions. Efficient iff the optimum <= tol.
    """
    t = tuple(int(v) for v in t)
    x_at_t = np.asarray(x_at_t, dtype=float)
    if x_at_t.shape != (game.n,):
        raise ValueError("x_at_t must have one entry per player")
    n_actions = game.num_joint_actions()
    flat_t = int(np.ravel_multi_index(t, game.type_dims))
    u_t = game.flat_utility()[flat_t]  # (n_actions, n)

    nvars = n_actions + game.n  # mu~ then slacks
    obj = np.concatenate([np.zeros(n_actions), np.ones(game.n)])
    lp = LinearProgram(obj, "max", bounds=[(0, None)] * nvars)
    for i in range(game.n):
        coeff = np.zeros(nvars)
        coeff[:n_actions] = -u_t[:, i]
        coeff[n_actions + i] = 1.0
        lp.add_row(coeff, LE, -float(x_at_t[i]))
    simplex = np.zeros(nvars)
    simplex[:n_actions] = 1.0
    lp.add_row(simplex, EQ, 1.0)

    sol = lp_solve(lp)
    if sol.status == "infeasible":
        # even slack 0 unreachable: x_at_t strictly dominates every policy
        return SolverReport("efficient", True, tol, details={"note": "x dominates the feasible set"})
    if not sol.optimal:
        raise ArithmeticError(f"efficiency LP: {sol.status}")
    total_slack = sol.objective_value
    verdict = total_slack <= tol
    details: dict = {"total_slack": total_slack}
    violations = []
    if not verdict:
        adims = game.action_dims
        dist = {}
        for flat in np.nonzero(sol.x[:n_actions] > 1e-13)[0]:
            dist[tuple(int(v) for v in np.unravel_index(flat, adims))] = float(sol.x[flat])
        z = sum(dist.values())
        details["dominating"] = {a: p / z for a, p in dist.items()}
        slacks = sol.x[n_actions:]
        violations = [
            (i, t, float(slacks[i])) for i in range(game.n) if slacks[i] > tol
        ]
    return SolverReport("efficient", verdict, tol, violations=violations, details=details)
