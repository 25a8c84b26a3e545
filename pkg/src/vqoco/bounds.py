"""Problem constants and the closed-form performance envelopes.

Every function here is a pure closed form.  Envelopes return the slack term
on the right-hand side of the corresponding guarantee, so a verifier checks
``empirical gap <= envelope``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class ProblemConstants:
    """Declared bounds: diameter ``D``, value bound ``F``, subgradient bound ``G``.

    ``eta`` is the Slater margin, ``mu`` the Lagrange multipliers of the
    fully i.i.d. setting, and ``f_star`` its optimal value when known.
    """

    D: float
    F: float
    G: float
    k: int
    eta: float = None
    mu: tuple = None
    f_star: float = None

    def __post_init__(self):
        if min(self.D, self.F, self.G) < 0:
            raise InputError("D, F, G must be nonnegative")
        if self.k < 0:
            raise InputError("k must be nonnegative")
        if self.eta is not None and not self.eta > 0:
            raise InputError("eta must be positive when given")
        if self.mu is not None:
            mu = tuple(float(m) for m in self.mu)
            if len(mu) != self.k or any(m < 0 for m in mu):
                raise InputError(f"mu must be {self.k} nonnegative values")
            object.__setattr__(self, "mu", mu)


def _need_eta(c):
    if c.eta is None:
        raise ConfigError("Slater margin eta is required for this bound", path="constants.eta")


def _need_integer_V(V):
    if V < 1 or V != int(V):
        raise ConfigError(f"V must be a positive integer for the queue bound, got {V}", path="solver.V")


def constant_B(c):
    return c.k * (c.F + c.G * c.D) ** 2 / 2.0


def constant_R(c, V, alpha):
    if not alpha > 0:
        raise InputError("alpha must be positive")
    return V * c.G**2 / (2.0 * alpha) + 2.0 * c.F


def constant_delta(c):
    """Largest possible one-slot change of the queue-vector norm."""
    return math.sqrt(c.k) * (c.F + c.D * c.G)


def constant_C(c):
    return constant_B(c) + c.k * c.G * (c.F + c.D * c.G)


def constant_theta(c, V, alpha):
    _need_eta(c)
    _need_integer_V(V)
    B, R, delta = constant_B(c), constant_R(c, V, alpha), constant_delta(c)
    second = (
        (B + R * V) / (c.eta * V)
        + alpha * c.D**2 / (c.eta * V * (V + 1))
        + delta * (V + 2) / (2.0 * V)
    )
    return max(delta, second)


def envelope_theorem1(c, V, alpha, T):
    """Objective slack against any fixed point of the common subset."""
    return constant_B(c) / V + V * c.G**2 / (2.0 * alpha) + alpha * c.D**2 / (V * T)


def envelope_theorem2(c, V, alpha):
    """Bound on the queue-vector norm, valid on every slot."""
    return constant_theta(c, V, alpha) * V


def envelope_theorem3(c, V, T):
    """Time-average constraint slack when ``alpha = V**2``."""
    theta = constant_theta(c, V, V * V)
    return theta * V / T + c.G**2 / (4.0 * V) + c.G**2 * (1.0 + theta * math.sqrt(c.k)) ** 2 / (4.0 * V)


def envelope_model1_objective(c, V, T, alpha=None):
    """Expected objective slack under i.i.d. constraints.

    With the default ``alpha = V**2`` this is ``C/V + G^2/(2V) + V D^2/T``;
    other ``alpha`` give ``C/V + V G^2/(2 alpha) + alpha D^2/(V T)``.
    """
    if alpha is None:
        return constant_C(c) / V + c.G**2 / (2.0 * V) + V * c.D**2 / T
    return constant_C(c) / V + V * c.G**2 / (2.0 * alpha) + alpha * c.D**2 / (V * T)


def _need_mu(c):
    if c.mu is None:
        raise ConfigError("Lagrange multipliers mu are required for this bound", path="constants.mu")
    return np.asarray(c.mu, dtype=float)


def _model2_y(c, V, alpha, T):
    mu = _need_mu(c)
    return (
        2.0 * constant_C(c) * T
        + T * V**2 * c.G**2 / alpha
        + 2.0 * alpha * c.D**2
        + 2.0 * T * V**2 * c.G**2 * float(mu.sum()) ** 2 / alpha
    )


def envelope_model2_queue(c, V, alpha, T):
    """Bound on ``E||Q(T+1)||`` in the fully i.i.d. setting."""
    mu = _need_mu(c)
    return 2.0 * V * float(np.linalg.norm(mu)) + math.sqrt(_model2_y(c, V, alpha, T))


def model2_queue_rate_constant(c):
    """``c0`` with ``envelope_model2_queue / T <= c0 * eps`` for ``V = 1/eps``, ``alpha = V^2``, ``T >= V^2``."""
    mu = _need_mu(c)
    return 2.0 * float(np.linalg.norm(mu)) + math.sqrt(
        2.0 * constant_C(c) + c.G**2 + 2.0 * c.D**2 + 2.0 * c.G**2 * float(mu.sum()) ** 2
    )


def envelope_model2_constraint(c, V, alpha, T):
    """Expected time-average constraint slack in the fully i.i.d. setting.

    Combines the virtual-queue inequality at ``beta = V`` with the queue bound
    and the summed-movement bound ``(alpha/2) sum E||dX||^2 <= y + 2V||mu|| E||Q||``.
    """
    mu = _need_mu(c)
    Z = envelope_model2_queue(c, V, alpha, T)
    movement = 2.0 * (_model2_y(c, V, alpha, T) + 2.0 * V * float(np.linalg.norm(mu)) * Z) / alpha
    return Z / T + c.G**2 / (4.0 * V) + V * movement / T


def doubling_constants(c):
    """``(c, d)`` such that a frame run with ``eps`` has average regret ``<= c*eps + d/(eps*T)``.

    Frames use ``V = ceil(1/eps)`` and ``alpha = V^2``, so the objective slack
    is ``(B + G^2/2)/V + V D^2/T``.  ``V >= 1/eps`` gives the first term;
    ``V <= 1/eps + 1 <= 2/eps`` (for ``eps <= 1``) gives ``d = 2 D^2``.
    """
    return constant_B(c) + c.G**2 / 2.0, 2.0 * c.D**2


def doubling_beta(c):
    cc, dd = doubling_constants(c)
    return (cc + dd) * (1.0 + math.sqrt(2.0) / (math.sqrt(2.0) - 1.0))


def zinkevich_constant(c):
    """``c`` with average regret ``<= c * step`` for every ``T >= 1/step^2``: ``(D^2 + G^2)/2``."""
    return (c.D**2 + c.G**2) / 2.0
