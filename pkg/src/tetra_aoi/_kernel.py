"""numba event loop for the abstract single-server model.

Resumable: returns a status code whenever it needs fresh random numbers or
a larger FCFS ring buffer, and never mutates state before checking that the
inputs for the next event are available.
"""
import numpy as np
from numba import njit

DISC_CODES = {"FCFS": 0, "NPR": 1, "PR": 2, "PRRT": 3, "REPLACE2": 4}

# float state
NOW, NEXT_ARR, SVC_END, CUR_GEN = range(4)
NF = 4
# int state
(IA_POS, U_POS, N_DEL, Q_HEAD, Q_LEN, BUSY, ATTEMPT, ARRIVALS,
 D_PREEMPT, D_REPLACE, D_BUSY, D_CHANNEL, EVENTS) = range(13)
NI = 13

DONE, NEED_IA, NEED_U, NEED_Q, TRUNCATED = range(5)


@njit(cache=True)
def run(disc, lam, mu, alpha, ia, us, fst, ist, q, out_gen, out_dep, out_att, target, budget):
    while ist[N_DEL] < target:
        if budget >= 0 and ist[EVENTS] >= budget:
            return TRUNCATED
        if ist[BUSY] == 1 and fst[SVC_END] <= fst[NEXT_ARR]:
            if ist[U_POS] >= us.shape[0]:
                return NEED_U
            u = us[ist[U_POS]]
            ist[U_POS] += 1
            ist[EVENTS] += 1
            now = fst[SVC_END]
            fst[NOW] = now
            if u >= alpha:
                k = ist[N_DEL]
                out_gen[k] = fst[CUR_GEN]
                out_dep[k] = now
                out_att[k] = ist[ATTEMPT]
                ist[N_DEL] += 1
                ist[BUSY] = 0
            elif disc == 3:
                ist[ATTEMPT] += 1
                fst[SVC_END] = now + mu
                continue
            else:
                ist[D_CHANNEL] += 1
                ist[BUSY] = 0
            if ist[Q_LEN] > 0:
                h = ist[Q_HEAD]
                fst[CUR_GEN] = q[h]
                ist[Q_HEAD] = (h + 1) % q.shape[0]
                ist[Q_LEN] -= 1
                fst[SVC_END] = now + mu
                ist[ATTEMPT] = 1
                ist[BUSY] = 1
        else:
            if ist[IA_POS] >= ia.shape[0]:
                return NEED_IA
            if disc == 0 and ist[BUSY] == 1 and ist[Q_LEN] >= q.shape[0]:
                return NEED_Q
            ist[EVENTS] += 1
            now = fst[NEXT_ARR]
            fst[NOW] = now
            ist[ARRIVALS] += 1
            if ist[BUSY] == 0:
                fst[CUR_GEN] = now
                fst[SVC_END] = now + mu
                ist[ATTEMPT] = 1
                ist[BUSY] = 1
            elif disc == 0:
                q[(ist[Q_HEAD] + ist[Q_LEN]) % q.shape[0]] = now
                ist[Q_LEN] += 1
            elif disc == 1:
                ist[D_BUSY] += 1
            elif disc == 2 or disc == 3:
                ist[D_PREEMPT] += 1
                fst[CUR_GEN] = now
                fst[SVC_END] = now + mu
                ist[ATTEMPT] = 1
            else:
                if ist[Q_LEN] > 0:
                    q[ist[Q_HEAD]] = now
                    ist[D_REPLACE] += 1
                else:
                    q[ist[Q_HEAD]] = now
                    ist[Q_LEN] = 1
            fst[NEXT_ARR] = now + ia[ist[IA_POS]] / lam
            ist[IA_POS] += 1
    return DONE


def grow(q, ist):
    n = q.shape[0]
    h = int(ist[Q_HEAD])
    m = int(ist[Q_LEN])
    out = np.empty(2 * n)
    idx = (h + np.arange(m)) % n
    out[:m] = q[idx]
    ist[Q_HEAD] = 0
    return out
