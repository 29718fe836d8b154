"""Compiled inner loop of the self-repellent walk.

State lives in small arrays so the loop can run in place:
``state_i = [node, n, sigma, kappa, nu, truncated_flag]`` and
``state_f = [total]``.
"""

import numpy as np
from numba import njit

NODE, STEP, SIGMA, KAPPA, NU, FLAG = range(6)


@njit(cache=True)
def advance(indptr, indices, logp, pvals, logmu, counts, logc, visits,
            state_i, state_f, uniforms, alphas, n_steps, truncate, M, scratch):
    """Run up to ``n_steps`` steps; stop early after a truncation event.

    Returns the number of uniforms consumed. On truncation ``state_i[FLAG]``
    is set to 1 and the caller performs the restart.
    """
    state_i[FLAG] = 0
    node = state_i[NODE]
    total = state_f[0]
    for s in range(n_steps):
        a = indptr[node]
        b = indptr[node + 1]
        alpha = alphas[s]
        tot = 0.0
        if alpha == 0.0:
            for k in range(a, b):
                scratch[k - a] = pvals[k]
                tot += pvals[k]
        else:
            m = -np.inf
            for k in range(a, b):
                j = indices[k]
                v = logp[k] - alpha * (logc[j] - logmu[j])
                scratch[k - a] = v
                if v > m:
                    m = v
            for k in range(a, b):
                e = np.exp(scratch[k - a] - m)
                scratch[k - a] = e
                tot += e
        target = uniforms[s] * tot
        acc = 0.0
        nxt = -1
        for k in range(a, b):
            acc += scratch[k - a]
            if scratch[k - a] > 0.0:
                nxt = indices[k]
                if target < acc:
                    break
        if truncate:
            lo = 1.0 / (state_i[KAPPA] + M)
            hi = 1.0 - lo
            t1 = total + 1.0
            inside = True
            for i in range(counts.shape[0]):
                c = counts[i] + 1.0 if i == nxt else counts[i]
                xi = c / t1
                if xi < lo or xi > hi:
                    inside = False
                    break
            if not inside:
                state_i[STEP] += 1
                state_i[FLAG] = 1
                state_i[NODE] = node
                state_f[0] = total
                return s + 1
        counts[nxt] += 1.0
        logc[nxt] = np.log(counts[nxt])
        total += 1.0
        visits[nxt] += 1
        node = nxt
        state_i[STEP] += 1
        state_i[SIGMA] += 1
        state_i[NU] += 1
    state_i[NODE] = node
    state_f[0] = total
    return n_steps
