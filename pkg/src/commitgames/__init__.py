"""Commitment games with conditional information disclosure.

Library layout:
  games       finite Bayesian games, correlated policies, payoff evaluation
  signals     counter-based deterministic randomization
  lp          small LP surface (HiGHS backend) with infeasibility certificates
  solvers     feasible / INTIR / IC / efficient checks, minimax punishments
  disclosure  verifiable-disclosure spaces, unraveling equilibria
  devices     abstract conditional commitment devices and the folk profile
  engine      recursive program games (call stack, truncation, memoization)
  programs    the grounded fair reciprocator program and a deviator library
  war/auction/mountain  worked example games with analytic regression targets
  cli         batch front door emitting CSV + JSON reports and figures
"""

__version__ = "0.1.0"
