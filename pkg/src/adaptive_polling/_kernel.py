"""Compiled event loop for the polling simulator.

The whole simulator state lives in a handful of flat arrays so the loop can be
suspended whenever a variate buffer runs dry and resumed after Python refills it.
"""
import numpy as np
from numba import njit

# integer state slots
Q0, H, I_LATCH, C, PHASE, PEND, LEG, CTYPE, CYCLE, SERVED, LAST_KIND, LAST_ST, ERR, QMAX, GATE = (
    0, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16,
)
N_STATE_I = 17
# float state slots
NEXT_ARR0, SERVER_T, CLOCK = 0, 3, 4
N_STATE_F = 5

# integer record slots
D0, E0, F0, CYC_TOTAL, CYC_REDUCED, STD_Q2_SERVED, EVENTS = 0, 3, 7, 10, 11, 12, 13
N_REC_I = 14
# float record slots
T0, U0, ELAPSED, QAREA0 = 0, 3, 7, 8
N_REC_F = 11

DECIDE, SERVING, WALKING = 0, 1, 2
VISIT_START, SERVE_NEXT, LEAVE = 0, 1, 2
LIMITED, GATED, EXHAUSTIVE, LIMITED_GATED = 0, 1, 2, 3
STANDARD, REDUCED = 0, 1
EV_ARRIVAL, EV_SERVICE, EV_WALK = 1, 2, 3

# variate streams: arrivals 0..2, services 3..5, legs 6..9
ARR_STREAM, SVC_STREAM, LEG_STREAM = 0, 3, 6
N_STREAMS = 10

RET_TARGET, RET_MAX_EVENTS, RET_INVARIANT = -1, -2, -3

# invariant codes stored in state[ERR]
ERR_WALK_BALANCE, ERR_LEG2_BALANCE, ERR_SANDWICH, ERR_SATURATED_VISIT, ERR_NEGATIVE_Q = 1, 2, 3, 4, 5

LEG_DEST = np.array([0, 2, 3, 1, 3], dtype=np.int64)  # leg (1-based) -> destination station


@njit(cache=True)
def _check(si, ri, sat, limits, disc):
    e1 = ri[E0]
    e2 = ri[E0 + 1]
    e3 = ri[E0 + 2]
    e4 = ri[E0 + 3]
    if abs(e1 + e4 - e3) > 1:
        return ERR_WALK_BALANCE
    if e2 > e1 or e1 > e2 + 1:
        return ERR_LEG2_BALANCE
    if disc == LIMITED or disc == LIMITED_GATED:
        s = ri[STD_Q2_SERVED]
        d2 = ri[D0 + 1]
        if not (e1 - e4 - 1 <= s and s <= d2 and d2 <= limits[1] * (e1 - e4 + 1)):
            return ERR_SANDWICH
    for k in range(3):
        if si[Q0 + k] < 0:
            return ERR_NEGATIVE_Q
    return 0


@njit(cache=True)
def _complete_walk(si, sf, ri, leg_dest):
    leg = si[LEG]
    ri[E0 + leg - 1] += 1
    si[H] = leg_dest[leg]
    si[PHASE] = DECIDE
    si[PEND] = VISIT_START
    si[C] = 0
    if leg == 3:
        ri[CYC_TOTAL] += 1
        if si[CTYPE] == REDUCED:
            ri[CYC_REDUCED] += 1
        si[CTYPE] = REDUCED if si[I_LATCH] == 1 else STANDARD
        si[CYCLE] += 1
        return True
    return False


@njit(cache=True)
def _complete_service(si, ri, sat, disc):
    h = si[H] - 1
    ri[D0 + h] += 1
    if not sat[h]:
        si[Q0 + h] -= 1
    si[SERVED] += 1
    if disc == LIMITED or disc == LIMITED_GATED:
        si[C] = si[SERVED]
    if h == 1 and si[SERVED] == 1:
        ri[STD_Q2_SERVED] += 1
    si[PHASE] = DECIDE
    si[PEND] = SERVE_NEXT


@njit(cache=True, nogil=True)
def advance(si, sf, ri, rf, buf, pos, sat, limits, disc, target_cycles, max_events, check):
    """Run until ``ri[CYC_TOTAL] == target_cycles``, ``max_events`` events, or a dry buffer.

    Returns a stream index (0..9) when that buffer must be refilled, otherwise one
    of the ``RET_*`` codes.
    """
    nbuf = buf.shape[1]
    leg_dest = LEG_DEST
    events = 0
    while True:
        # instantaneous decisions, at most one draw each
        while si[PHASE] == DECIDE:
            h = si[H]
            k = h - 1
            pend = si[PEND]
            if pend == VISIT_START:
                si[C] = 0
                si[SERVED] = 0
                si[GATE] = si[Q0 + k]
                if not sat[k] and si[Q0 + k] == 0:
                    ri[F0 + k] += 1
                    if h == 2:
                        si[I_LATCH] = 1
                    si[PEND] = LEAVE
                else:
                    si[PEND] = SERVE_NEXT
            elif pend == SERVE_NEXT:
                if disc == LIMITED:
                    more = si[SERVED] < limits[k] and (sat[k] or si[Q0 + k] > 0)
                elif disc == LIMITED_GATED:
                    more = si[SERVED] < limits[k] and (sat[k] or si[SERVED] < si[GATE])
                elif disc == GATED:
                    more = si[Q0 + k] - si[C] > 0
                else:
                    more = si[Q0 + k] > 0
                if not more:
                    si[PEND] = LEAVE
                    continue
                s = SVC_STREAM + k
                if pos[s] >= nbuf:
                    return s
                x = buf[s, pos[s]]
                pos[s] += 1
                if x == 0.0:
                    _complete_service(si, ri, sat, disc)
                else:
                    si[PHASE] = SERVING
                    sf[SERVER_T] = sf[CLOCK] + x
            else:  # LEAVE
                if check and (disc == LIMITED or disc == LIMITED_GATED) and h == 1 and sat[0] and si[SERVED] != limits[0]:
                    si[ERR] = ERR_SATURATED_VISIT
                    return RET_INVARIANT
                if h == 1:
                    leg = 4 if si[CTYPE] == REDUCED else 1
                elif h == 2:
                    leg = 2
                else:
                    leg = 3
                s = LEG_STREAM + leg - 1
                if pos[s] >= nbuf:
                    return s
                x = buf[s, pos[s]]
                pos[s] += 1
                if leg == 4:
                    si[I_LATCH] = 0
                si[C] = 0
                si[LEG] = leg
                if x == 0.0:
                    if _complete_walk(si, sf, ri, leg_dest):
                        if check:
                            err = _check(si, ri, sat, limits, disc)
                            if err:
                                si[ERR] = err
                                return RET_INVARIANT
                        if ri[CYC_TOTAL] >= target_cycles:
                            return RET_TARGET
                else:
                    si[PHASE] = WALKING
                    sf[SERVER_T] = sf[CLOCK] + x
            if check:
                err = _check(si, ri, sat, limits, disc)
                if err:
                    si[ERR] = err
                    return RET_INVARIANT

        if events >= max_events:
            return RET_MAX_EVENTS

        # next event: server first on ties, then arrivals by queue index
        t = sf[SERVER_T]
        which = -1
        for k in range(3):
            if sf[NEXT_ARR0 + k] < t:
                t = sf[NEXT_ARR0 + k]
                which = k
        if which >= 0:
            s = ARR_STREAM + which
            if pos[s] >= nbuf:
                return s

        dt = t - sf[CLOCK]
        if si[PHASE] == SERVING:
            rf[T0 + si[H] - 1] += dt
        else:
            rf[U0 + si[LEG] - 1] += dt
        rf[ELAPSED] += dt
        qtot = 0
        for k in range(3):
            rf[QAREA0 + k] += si[Q0 + k] * dt
            qtot += si[Q0 + k]
        sf[CLOCK] = t
        events += 1
        ri[EVENTS] += 1

        cycle_done = False
        if which >= 0:
            si[Q0 + which] += 1
            qtot += 1
            if qtot > si[QMAX]:
                si[QMAX] = qtot
            s = ARR_STREAM + which
            sf[NEXT_ARR0 + which] = t + buf[s, pos[s]]
            pos[s] += 1
            if disc == GATED and si[PHASE] == SERVING and si[H] == which + 1:
                si[C] += 1
            si[LAST_KIND] = EV_ARRIVAL
            si[LAST_ST] = which + 1
        elif si[PHASE] == SERVING:
            _complete_service(si, ri, sat, disc)
            si[LAST_KIND] = EV_SERVICE
            si[LAST_ST] = si[H]
        else:
            cycle_done = _complete_walk(si, sf, ri, leg_dest)
            si[LAST_KIND] = EV_WALK
            si[LAST_ST] = si[H]

        if check:
            err = _check(si, ri, sat, limits, disc)
            if err:
                si[ERR] = err
                return RET_INVARIANT
        if cycle_done and ri[CYC_TOTAL] >= target_cycles:
            return RET_TARGET
        if events >= max_events:
            return RET_MAX_EVENTS
