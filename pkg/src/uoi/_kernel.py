"""Compiled slot loops for the simulator and the tracking plant.

All randomness arrives as pre-drawn arrays so the loops are deterministic
functions of their inputs. Channel uniforms are consumed one per attempted
transmission; policy uniforms one per slot.
"""
import numpy as np
from numba import njit

ADAPTIVE, RANDOMIZED, PERIODIC, TABLE_UOI, TABLE_AOI, NEVER, ALWAYS = range(7)

# indices into the scalar result vector returned by simulate()
R_UOI, R_AOI, R_UPDATES, R_DPP, R_FINAL_H, R_FINAL_Q, R_FINAL_AGE, R_STATUS = range(8)
R_CRIT_SQ, R_CRIT_U, R_CRIT_N, R_ORD_SQ, R_ORD_U, R_ORD_N, R_DELIVERED = range(8, 15)
N_RESULTS = 15


@njit(cache=True)
def _decide(kind, t, Q, w_next, H, age, u_pol, rho, V, omega_bar, p, period,
            table_uoi, wi, wni, q_max, q_step, table_aoi):
    J = np.nan
    if kind == ADAPTIVE:
        J = (w_next - omega_bar + omega_bar / (p * rho)) * p * Q * Q
        U = 1 if J > V * H else 0
    elif kind == RANDOMIZED:
        U = 1 if u_pol < rho else 0
    elif kind == PERIODIC:
        U = 1 if t % period == 0 else 0
    elif kind == TABLE_UOI:
        qi = int(np.rint((Q + q_max) / q_step))
        qi = min(max(qi, 0), table_uoi.shape[0] - 1)
        U = 1 if u_pol < table_uoi[qi, wi, wni] else 0
    elif kind == TABLE_AOI:
        ai = min(max(age, 1), table_aoi.shape[0]) - 1
        U = 1 if u_pol < table_aoi[ai] else 0
    elif kind == NEVER:
        U = 0
    else:
        U = 1
    return U, J


@njit(cache=True)
def simulate(incr, weights, w_idx, chan_u, pol_u, kind, rho, V, omega_bar, p, period,
             table_uoi, q_max, q_step, table_aoi, q0, h0, age0, theta, crit_start, crit_end,
             batch_uoi, batch_dpp, batch_n, trace, tr_Q, tr_w, tr_H, tr_U, tr_S, tr_J, tr_uoi, tr_age):
    T = incr.shape[0]
    nb = batch_uoi.shape[0]
    res = np.zeros(N_RESULTS)
    Q, H, age = q0, h0, age0
    k = 0  # channel draws consumed
    for t in range(T):
        w_t = weights[t]
        w_next = weights[t + 1]
        f = w_t * Q * Q
        b = (t * nb) // T
        U, J = _decide(kind, t, Q, w_next, H, age, pol_u[t], rho, V, omega_bar, p, period,
                       table_uoi, w_idx[t], w_idx[t + 1], q_max, q_step, table_aoi)
        S = -1
        if U == 1:
            S = 1 if chan_u[k] < p else 0
            k += 1
        delivered = U == 1 and S == 1
        Q_new = incr[t] if delivered else Q + incr[t]
        H_new = max(H - rho + U, 0.0)
        age_new = 1 if delivered else age + 1
        dpp = 0.5 * V * (H_new * H_new - H * H) + theta * (Q_new * Q_new - Q * Q) + w_next * Q_new * Q_new

        res[R_UOI] += f
        res[R_AOI] += age
        res[R_UPDATES] += U
        res[R_DPP] += dpp
        res[R_DELIVERED] += 1 if delivered else 0
        batch_uoi[b] += f
        batch_dpp[b] += dpp
        batch_n[b] += 1
        if crit_start <= t <= crit_end:
            res[R_CRIT_SQ] += Q * Q
            res[R_CRIT_U] += U
            res[R_CRIT_N] += 1
        else:
            res[R_ORD_SQ] += Q * Q
            res[R_ORD_U] += U
            res[R_ORD_N] += 1
        if trace:
            tr_Q[t] = Q
            tr_w[t] = w_t
            tr_H[t] = H
            tr_U[t] = U
            tr_S[t] = S
            tr_J[t] = J
            tr_uoi[t] = f
            tr_age[t] = age
        if not np.isfinite(Q_new):
            res[R_STATUS] = t + 1
            break
        Q, H, age = Q_new, H_new, age_new
    res[R_FINAL_H] = H
    res[R_FINAL_Q] = Q
    res[R_FINAL_AGE] = age
    return res


@njit(cache=True)
def track(r, y, weights, chan_u, pol_u, a, b, var_r, kind, rho, V, omega_bar, p, period,
          batch_track, batch_est, batch_resid, batch_n, tr_x, tr_xhat):
    """Closed-loop tracking of ``y`` by the plant ``x_t = a x_{t-1} + b v_t + r_t``.

    The controller applies ``v_t = (y_t - a xhat_{t-1}) / b``. After ``x_t`` is
    realised the terminal may send it; the decision sees the error between
    ``x_t`` and the controller's model prediction.
    """
    T = r.shape[0]
    nb = batch_track.shape[0]
    dummy3 = np.zeros((1, 1, 1))
    dummy1 = np.zeros(1)
    x_prev, xhat_prev, H = 0.0, 0.0, 0.0
    k = 0
    status = 0
    updates = 0.0
    for t in range(T):
        w_t = weights[t]
        v = (y[t] - a * xhat_prev) / b
        x = a * x_prev + b * v + r[t]
        pred = a * xhat_prev + b * v
        e_prev = x_prev - xhat_prev
        trk = w_t * (x - y[t]) ** 2
        est = w_t * e_prev * e_prev
        bi = (t * nb) // T
        batch_track[bi] += trk
        batch_est[bi] += est
        batch_resid[bi] += trk - a * a * est - omega_bar * var_r
        batch_n[bi] += 1
        Q = x - pred
        U, J = _decide(kind, t, Q, weights[t + 1], H, 1, pol_u[t], rho, V, omega_bar, p, period,
                       dummy3, 0, 0, 1.0, 1.0, dummy1)
        delivered = False
        if U == 1:
            delivered = chan_u[k] < p
            k += 1
        updates += U
        xhat = x if delivered else pred
        H = max(H - rho + U, 0.0)
        tr_x[t] = x
        tr_xhat[t] = xhat
        if not np.isfinite(x):
            status = t + 1
            break
        x_prev, xhat_prev = x, xhat
    return status, updates
