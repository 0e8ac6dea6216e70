"""Compiled depth-first search loop for the d/u state machine.

The loop keeps only ``(k, b, v, m)`` plus a per-level cap array used to catch
invalid prune constants. ``k`` is 1-based and row ``k`` lives at ``M[k - 1]``.
"""

import numpy as np
from numba import njit

# Stand-in for an infinite prune constant. Norms are bounded by 2**61 (see
# matrix.EXACT_LIMIT) so norm + INF cannot wrap.
INF = np.int64(2**62)


@njit(nogil=True, cache=True)
def tail_kernel(M, c, k_top, b0, v0, m0, shared, slot, check_every):
    """Run the search below level ``k_top`` starting from partial sum ``v0``.

    Returns ``(best, best_b, d_calls, u_calls, fault)``. ``best`` is the
    largest leaf norm found here that beat the running maximum, or -1 if none
    did. ``fault`` is 0, or the level ``k`` whose finite ``c_k`` a leaf
    exceeded. ``shared`` holds best values published by concurrent searches;
    this one writes only ``shared[slot]``.
    """
    n = M.shape[0]
    ncol = M.shape[1]
    v = v0.copy()
    cap = np.empty(n + 1, np.int64)
    cap_level = np.zeros(n + 1, np.int64)
    k = k_top
    b = b0
    m = m0
    best = np.int64(-1)
    best_b = np.int64(-1)
    d_calls = 0
    u_calls = 0
    down = True
    while True:
        if down:
            d_calls += 1
            if check_every > 0 and d_calls % check_every == 0:
                for s in range(shared.shape[0]):
                    if shared[s] > m:
                        m = shared[s]
            norm = np.int64(0)
            for j in range(ncol):
                x = v[j]
                norm += x if x >= 0 else -x
            if m >= norm + c[k - 1]:
                down = False
            elif k == n:
                if k > k_top and norm > cap[k - 1]:
                    return best, best_b, d_calls, u_calls, cap_level[k - 1]
                m = norm
                best = norm
                best_b = b
                shared[slot] = norm
                down = False
            else:
                here = norm + c[k - 1]
                if k > k_top and cap[k - 1] < here:
                    cap[k] = cap[k - 1]
                    cap_level[k] = cap_level[k - 1]
                else:
                    cap[k] = here
                    cap_level[k] = k
                k += 1
                b = 2 * b
                for j in range(ncol):
                    v[j] += M[k - 1, j]
        else:
            u_calls += 1
            if k == k_top:
                return best, best_b, d_calls, u_calls, 0
            if b % 2 == 0:
                b += 1
                for j in range(ncol):
                    v[j] -= 2 * M[k - 1, j]
                down = True
            else:
                b = b // 2
                for j in range(ncol):
                    v[j] += M[k - 1, j]
                k -= 1
