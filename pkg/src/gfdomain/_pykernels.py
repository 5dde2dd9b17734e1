"""Pure numpy versions of the compiled kernels (same signatures)."""

import numpy as np


def mul_trunc(a, b, ia, ib, ik, n_out):
    return np.bincount(ik, weights=a[ia] * b[ib], minlength=n_out)


def monomial_values(exps, pts):
    pts = np.asarray(pts, dtype=np.float64)
    nmax = int(exps.max()) if exps.size else 0
    powers = pts[:, :, None] ** np.arange(nmax + 1)
    out = np.ones((pts.shape[0], exps.shape[0]))
    for j in range(exps.shape[1]):
        out *= powers[:, j, exps[:, j]]
    return out


def track(coeffs, exps, start, turns, escape):
    z = np.array(start, dtype=np.float64, copy=True)
    survived = np.zeros(z.shape[0], dtype=np.int64)
    alive = np.ones(z.shape[0], dtype=bool)
    for t in range(turns):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = monomial_values(exps, z[idx]) @ coeffs.T
        z[idx] = nxt
        ok = np.all(np.abs(nxt) <= escape, axis=1)
        survived[idx[ok]] = t + 1
        alive[idx[~ok]] = False
    return z, survived
