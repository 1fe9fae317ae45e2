"""Dormand-Prince 5(4) integrator for complex-valued ODE systems.

Complex states are integrated as the realified system: the error norm runs
over real and imaginary parts separately. A batch of trajectories (leading
axes of the state) shares one step size chosen from the worst member, so
every trajectory sees the same time grid and results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Diverged, StepUnderflow

# Butcher tableau
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array(A[6] + [0.0])
# B - B_hat, the embedded 4th order error weights
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
BETA = 0.04
EXPO = 0.2 - 0.75 * BETA

OVERFLOW_GUARD = 1e12


@dataclass
class OdeSolution:
    t: float
    y: np.ndarray
    t_eval: np.ndarray
    y_eval: np.ndarray
    step_t: list = field(default_factory=list)
    step_y: list = field(default_factory=list)
    n_steps: int = 0
    n_rejected: int = 0
    n_fev: int = 0


def _err_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    r = (err / scale).view(float) if np.iscomplexobj(err) else err / scale
    r = np.asarray(r)
    if r.ndim <= 1:
        return float(np.sqrt(np.mean(r * r)))
    per = np.sqrt(np.mean(r * r, axis=-1))
    return float(per.max())


def _hermite(theta, h, y0, f0, y1, f1):
    t2 = theta * theta
    t3 = t2 * theta
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + theta
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def dopri5(
    rhs,
    t0: float,
    y0,
    t1: float,
    rtol: float,
    atol=None,
    t_eval=None,
    h0: float | None = None,
    guard_cols: int | None = None,
    record_steps: bool = False,
    exact_eval: bool = False,
    max_steps: int = 200_000,
) -> OdeSolution:
    """Integrate y' = rhs(t, y) from t0 to t1 (either direction).

    t_eval points (monotone in the direction of integration, inside [t0, t1])
    are filled by cubic Hermite interpolation between accepted steps, or,
    with exact_eval, the step size is clipped so that every t_eval point is
    hit by an accepted step.
    guard_cols limits the overflow guard to the first columns of the last
    axis (useful when auxiliary variational components ride along).
    """
    y = np.array(y0, dtype=complex)
    atol = rtol if atol is None else atol
    direction = 1.0 if t1 >= t0 else -1.0
    t_eval = np.array([] if t_eval is None else t_eval, dtype=float)
    y_eval = np.empty((len(t_eval),) + y.shape, dtype=complex)
    sol = OdeSolution(t=t0, y=y, t_eval=t_eval, y_eval=y_eval)
    k_eval = 0
    while k_eval < len(t_eval) and t_eval[k_eval] == t0:
        y_eval[k_eval] = y
        k_eval += 1
    if record_steps:
        sol.step_t.append(t0)
        sol.step_y.append(y.copy())
    if t1 == t0:
        return sol

    def guard(state, t):
        g = state if guard_cols is None else state[..., :guard_cols]
        m = np.abs(g).max() if g.size else 0.0
        if not np.isfinite(m) or m > OVERFLOW_GUARD:
            raise Diverged(f"state norm exceeded {OVERFLOW_GUARD:g} at t={t:.6g}", t=t)

    f = rhs(t0, y)
    sol.n_fev += 1
    span = abs(t1 - t0)
    if h0 is None:
        d0 = _err_norm(y, 0 * y, 0 * y, rtol, atol)
        d1 = _err_norm(f, 0 * y, 0 * y, rtol, atol)
        h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h = min(h, span)
        y_trial = y + direction * h * f
        f_trial = rhs(t0 + direction * h, y_trial)
        sol.n_fev += 1
        d2 = _err_norm(f_trial - f, 0 * y, 0 * y, rtol, atol) / h
        dm = max(d1, d2)
        h1 = max(1e-6, h * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
        h = min(100 * h, h1, span)
    else:
        h = min(abs(h0), span)

    t = t0
    err_old = 1e-4
    rejected = False
    ks = [None] * 7
    while direction * (t1 - t) > 0:
        if sol.n_steps + sol.n_rejected > max_steps:
            raise StepUnderflow(f"step budget {max_steps} exhausted at t={t:.6g}")
        last = False
        target = t1
        if exact_eval and k_eval < len(t_eval):
            target = t_eval[k_eval]
        floor = 1e-14 * max(1.0, abs(t))
        # a remaining gap below the floor is closed in one step, not an underflow
        if h < floor and abs(target - t) > floor:
            raise StepUnderflow(f"step size underflow at t={t:.6g}")
        h_prop = h
        if h >= abs(target - t):
            h = abs(target - t)
            last = True
        hs = direction * h
        ks[0] = f
        for i in range(1, 7):
            acc = y.copy()
            for j, a in enumerate(A[i]):
                if a != 0.0:
                    acc = acc + hs * a * ks[j]
            if i == 6:
                y_new = acc
            ks[i] = rhs(t + C[i] * hs, acc)
        sol.n_fev += 6
        err = hs * sum(E[i] * ks[i] for i in range(7) if E[i] != 0.0)
        en = _err_norm(err, y, y_new, rtol, atol)
        if not np.isfinite(en):
            guard(y_new, t + hs)
            en = 1e10
        if en <= 1.0:
            t_new = target if last else t + hs
            f_new = ks[6]
            while k_eval < len(t_eval) and direction * (t_eval[k_eval] - t_new) <= 0:
                theta = (t_eval[k_eval] - t) / hs
                y_eval[k_eval] = _hermite(theta, hs, y, f, y_new, f_new)
                k_eval += 1
            t, y, f = t_new, y_new, f_new
            guard(y, t)
            sol.n_steps += 1
            if record_steps:
                sol.step_t.append(t)
                sol.step_y.append(y.copy())
            en = max(en, 1e-10)
            fac = SAFETY * en ** (-EXPO) * err_old**BETA
            fac = min(FAC_MAX, max(FAC_MIN, fac))
            if rejected:
                fac = min(1.0, fac)
            h = h * fac
            if last:
                h = max(h, min(h_prop, h_prop * fac))
            err_old = en
            rejected = False
        else:
            sol.n_rejected += 1
            h = h * max(FAC_MIN, SAFETY * en ** (-0.2))
            rejected = True
    while k_eval < len(t_eval):
        y_eval[k_eval] = y
        k_eval += 1
    sol.t = t
    sol.y = y
    return sol
