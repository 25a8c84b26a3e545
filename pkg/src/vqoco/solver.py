"""Virtual-queue online solver, the projected-subgradient baseline, and the doubling wrapper.

The main algorithm keeps one virtual queue per constraint.  On slot ``t >= 1``
it picks

    X_t = P_X[X_{t-1} - W_t / (2 alpha)],
    W_t = V f'_{t-1}(X_{t-1}) + sum_i Q_i(t) g'_{t-1,i}(X_{t-1}),

which is the unique minimizer over X of ``W_t^T x + alpha ||x - X_{t-1}||^2``,
then advances each queue with the linearized constraint value

    Q_i(t+1) = max[Q_i(t) + g_{t-1,i}(X_{t-1}) + g'_{t-1,i}(X_{t-1})^T (X_t - X_{t-1}), 0].

States are immutable values; ``advance`` returns a new state and a
:class:`SlotRecord`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError, SequencingError
from .streams import generate_slot

MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class AlgorithmParams:
    V: float
    alpha: float
    k: int
    epsilon: float = None

    def __post_init__(self):
        if not (self.V > 0 and self.alpha > 0):
            raise InputError("V and alpha must be positive")

    @classmethod
    def from_epsilon(cls, epsilon, k):
        """``V = ceil(1/epsilon)``, ``alpha = V**2``."""
        if not epsilon > 0:
            raise InputError("epsilon must be positive")
        # the 1e-9 guard keeps e.g. 1/(1/sqrt(2))**4 = 4.0000000000000001 at V=4
        V = max(1, math.ceil(1.0 / epsilon - 1e-9))
        return cls(V=V, alpha=float(V * V), k=k, epsilon=epsilon)

    @property
    def integer_V(self):
        return float(self.V).is_integer()


@dataclass(frozen=True, eq=False)
class SolverState:
    """Everything needed to make the next decision.

    ``t`` is the next slot to be processed and ``x`` the decision of slot
    ``t - 1`` (``x0`` before slot ``start``).  ``queues`` holds ``Q(t)``.
    The ``prev_*`` fields are slot ``t - 1``'s function data evaluated at ``x``.
    """

    t: int
    x: np.ndarray
    queues: np.ndarray
    start: int = 0
    prev_g: np.ndarray = None
    prev_f_sub: np.ndarray = None
    prev_g_sub: np.ndarray = None

    @property
    def lyapunov(self):
        return 0.5 * float(self.queues @ self.queues)


@dataclass(frozen=True, eq=False)
class SlotRecord:
    """What happened on slot ``t``.

    ``q`` is ``Q(t)`` and ``q_next`` is ``Q(t+1)``; ``lin`` holds the
    linearized constraint values that drove the queue update
    (``g_{t-1,i}(X_{t-1}) + g'_{t-1,i}(X_{t-1})^T (X_t - X_{t-1})``, zero on
    the first slot of a run).
    """

    t: int
    x: np.ndarray
    f: float
    g: np.ndarray
    q: np.ndarray
    q_next: np.ndarray
    drift: float
    step_sq: float
    lin: np.ndarray
    frame: int = 0

    def to_dict(self):
        return {
            "t": self.t,
            "x": self.x.tolist(),
            "f": self.f,
            "g": self.g.tolist(),
            "q": self.q.tolist(),
            "q_next": self.q_next.tolist(),
            "drift": self.drift,
            "step_sq": self.step_sq,
            "lin": self.lin.tolist(),
            "frame": self.frame,
        }

    @classmethod
    def from_dict(cls, d):
        arr = lambda v: np.array(v, dtype=float)  # noqa: E731
        return cls(
            t=int(d["t"]), x=arr(d["x"]), f=float(d["f"]), g=arr(d["g"]), q=arr(d["q"]),
            q_next=arr(d["q_next"]), drift=float(d["drift"]), step_sq=float(d["step_sq"]),
            lin=arr(d["lin"]), frame=int(d.get("frame", 0)),
        )


def init(params, dset, x0, start=0):
    x0 = np.array(x0, dtype=float)
    if x0.shape != (dset.dimension,) or not dset.contains(x0, MEMBERSHIP_TOL):
        raise InputError(f"x0={x0.tolist()} is not a member of the decision set")
    return SolverState(t=start, x=x0, queues=np.zeros(params.k), start=start)


def queue_update(Q_i, g_val, g_sub, dx):
    if Q_i < 0:
        raise InputError("queue values are nonnegative")
    g_sub, dx = np.asarray(g_sub, dtype=float), np.asarray(dx, dtype=float)
    if g_sub.shape != dx.shape:
        raise InputError(f"subgradient shape {g_sub.shape} does not match step shape {dx.shape}")
    return max(Q_i + g_val + float(g_sub @ dx), 0.0)


def decision_weights(state, params):
    """``W_t`` from the stored previous-slot subgradients and the current queues."""
    return params.V * state.prev_f_sub + state.queues @ state.prev_g_sub


def decision_objective(x, state, params):
    """The per-slot expression minimized by :func:`decision_step`."""
    W = decision_weights(state, params)
    d = np.asarray(x) - state.x
    return np.asarray(x) @ W + params.alpha * np.sum(d * d, axis=-1)


def decision_step(state, dset, params):
    if state.t <= state.start or state.prev_f_sub is None:
        raise SequencingError("no decision step before the first slot has been observed")
    W = decision_weights(state, params)
    return dset.project(state.x - W / (2.0 * params.alpha))


def _evaluate(slot, x):
    return (
        float(slot.objective.value(x)),
        slot.constraint_values(x),
        slot.objective.subgradient(x),
        slot.constraint_subgradients(x),
    )


def advance(state, slot, dset, params, frame=0):
    """Process one slot: decide, update queues, then observe the slot's functions."""
    if slot.slot_index != state.t:
        raise SequencingError(f"expected slot {state.t}, got slot {slot.slot_index}")
    k = params.k
    if state.t == state.start:
        x = state.x
        q = q_next = state.queues
        lin = np.zeros(k)
        step_sq = 0.0
    else:
        x = decision_step(state, dset, params)
        dx = x - state.x
        q = state.queues
        lin = state.prev_g + state.prev_g_sub @ dx if k else np.zeros(0)
        q_next = np.maximum(q + lin, 0.0)
        step_sq = float(dx @ dx)
    f_val, g_val, f_sub, g_sub = _evaluate(slot, x)
    record = SlotRecord(
        t=state.t, x=x, f=f_val, g=g_val, q=q, q_next=q_next,
        drift=0.5 * float(q_next @ q_next) - 0.5 * float(q @ q),
        step_sq=step_sq, lin=lin, frame=frame,
    )
    new_state = replace(
        state, t=state.t + 1, x=x, queues=q_next,
        prev_g=g_val, prev_f_sub=f_sub, prev_g_sub=g_sub,
    )
    return new_state, record


# -- projected-subgradient baseline -----------------------------------------


def zinkevich_step(x_prev, f_sub, step, dset):
    if not step > 0:
        raise InputError("step size must be positive")
    return dset.project(np.asarray(x_prev, dtype=float) - step * np.asarray(f_sub, dtype=float))


def zinkevich_advance(state, slot, dset, step):
    """Baseline analogue of :func:`advance`; constraints are observed but ignored."""
    if slot.slot_index != state.t:
        raise SequencingError(f"expected slot {state.t}, got slot {slot.slot_index}")
    if state.t == state.start:
        x, step_sq = state.x, 0.0
    else:
        x = zinkevich_step(state.x, state.prev_f_sub, step, dset)
        step_sq = float((x - state.x) @ (x - state.x))
    f_val, g_val, f_sub, g_sub = _evaluate(slot, x)
    zeros = np.zeros(slot.k)
    record = SlotRecord(t=state.t, x=x, f=f_val, g=g_val, q=zeros, q_next=zeros,
                        drift=0.0, step_sq=step_sq, lin=zeros)
    new_state = replace(state, t=state.t + 1, x=x, prev_g=g_val, prev_f_sub=f_sub, prev_g_sub=g_sub)
    return new_state, record


# -- doubling wrapper --------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    index: int
    start: int
    length: int  # slots actually run (the last frame may be truncated)
    epsilon: float
    params: AlgorithmParams


def frame_epsilon(m):
    return (1.0 / math.sqrt(2.0)) ** m


def doubling_frames(T, k, params_from=AlgorithmParams.from_epsilon):
    """Frames of nominal length ``2**m`` (m = 1, 2, ...) covering slots ``0..T-1``."""
    frames, start, m = [], 0, 1
    while start < T:
        eps = frame_epsilon(m)
        length = min(2**m, T - start)
        frames.append(Frame(m, start, length, eps, params_from(eps, k)))
        start += length
        m += 1
    return frames


def doubling_run(spec, dset, T, x0, params_from=AlgorithmParams.from_epsilon):
    """Restart the solver on frames of length 2, 4, 8, ...

    Frame ``m`` uses ``eps_m = 2**(-m/2)`` and the parameters derived from it.
    Queues restart at zero on every frame; the last decision carries over as
    the next frame's starting point.  Returns ``(records, frames)``.
    """
    if T < 2:
        raise InputError("doubling run needs T >= 2")
    frames = doubling_frames(T, spec.k, params_from)
    records = []
    x = np.array(x0, dtype=float)
    for fr in frames:
        state = init(fr.params, dset, x, start=fr.start)
        for t in range(fr.start, fr.start + fr.length):
            state, rec = advance(state, generate_slot(spec, t), dset, fr.params, frame=fr.index)
            records.append(rec)
        x = state.x
    return records, frames
