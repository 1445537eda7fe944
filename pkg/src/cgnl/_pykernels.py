"""Pure numpy versions of the compiled kernels (same signatures)."""
import time

import numpy as np

DOT, EGAUSS, RBF = 0, 1, 2
_ROW_BLOCK = 64
# callers check results for non-finite values and name the stage
_quiet = np.errstate(over="ignore", invalid="ignore")


@_quiet
def compact_forward(theta, phi, g, alpha_theta, alpha_phi, theta_lift, phi_lift, z, out):
    pt = np.ones_like(theta)
    pp = np.ones_like(phi)
    for p in range(alpha_theta.shape[0]):
        theta_lift[:, :, p] = alpha_theta[p] * pt
        phi_lift[:, :, p] = alpha_phi[p] * pp
        pt = pt * theta
        pp = pp * phi
    np.einsum("bmp,bm->bp", phi_lift, g, out=z)
    np.einsum("bmp,bp->bm", theta_lift, z, out=out)


@_quiet
def pairwise_forward(theta, phi, g, alpha_sq, family, gamma, use_taylor, pair, out):
    M = theta.shape[0]
    for r0 in range(0, M, _ROW_BLOCK):
        rows = slice(r0, min(r0 + _ROW_BLOCK, M))
        x = np.multiply.outer(theta[rows], phi)
        blk = pair[rows]
        if use_taylor:
            blk[...] = alpha_sq[0]
            pw = np.ones_like(x)
            for p in range(1, alpha_sq.shape[0]):
                pw *= x
                blk += alpha_sq[p] * pw
        elif family == DOT:
            blk[...] = x
        elif family == EGAUSS:
            np.exp(x, out=blk)
        else:
            d = np.subtract.outer(theta[rows], phi)
            np.exp(-gamma * (d * d), out=blk)
    np.dot(pair, g, out=out)


def time_compact(theta, phi, g, alpha_theta, alpha_phi, theta_lift, phi_lift, z, out, iters):
    t0 = time.perf_counter_ns()
    for _ in range(iters):
        compact_forward(theta, phi, g, alpha_theta, alpha_phi, theta_lift, phi_lift, z, out)
    return time.perf_counter_ns() - t0


def time_pairwise(theta, phi, g, alpha_sq, family, gamma, use_taylor, pair, out, iters):
    t0 = time.perf_counter_ns()
    for _ in range(iters):
        pairwise_forward(theta, phi, g, alpha_sq, family, gamma, use_taylor, pair, out)
    return time.perf_counter_ns() - t0
