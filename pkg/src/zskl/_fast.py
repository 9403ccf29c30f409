"""Batched loss/gradient and scoring kernels, numba and numpy flavours.

Both flavours take row-major inputs: ``Xb`` is (B, d) with one sample per
row and ``A`` is (C, d_attr) with one class attribute vector per row.
Per sample ``b`` the positive attribute is ``A[pos[b]]`` and the sampled
negatives are ``A[neg[b, :]]``.

Kernel family codes: 0 gaussian, 1 cauchy, 2 polynomial.
"""

from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit

FAM_GAUSSIAN = 0
FAM_CAUCHY = 1
FAM_POLY = 2


def family_code(name: str) -> int:
    return {"gaussian": FAM_GAUSSIAN, "cauchy": FAM_CAUCHY, "polynomial": FAM_POLY}[name]


# ----------------------------------------------------------------------------
# numba
# ----------------------------------------------------------------------------

@njit
def _rbf(fam, sigma, s):
    # returns (k, dk/ds)
    if fam == 0:
        k = math.exp(-s / (2.0 * sigma * sigma))
        return k, -k / (2.0 * sigma * sigma)
    k = 1.0 / (1.0 + sigma * s)
    return k, -sigma * k * k


@njit
def _tval(squared, within, k):
    if squared:
        if within:
            return (1.0 - k) * (1.0 - k), -2.0 * (1.0 - k)
        return k * k, 2.0 * k
    if within:
        return -k, -1.0
    return k, 1.0


@njit
def batch_loss_grad_numba(W, Xb, A, pos, neg, npc, fam, sigma, degree, bias,
                          two_dir, squared, lam, share, alpha):
    B, d = Xb.shape
    dp = W.shape[1]
    m = neg.shape[1]
    vals = np.zeros(B)
    gsum = np.zeros((d, dp))
    sqsum = np.zeros((d, dp))

    pen = np.zeros((d, dp))
    pen_val = 0.0
    if share != 0.0 and alpha != 0.0:
        WtW = W.T @ W
        pen = 4.0 * alpha * (W @ WtW) - 2.0 * alpha * W
        fro = 0.0
        tr = 0.0
        for i in range(dp):
            tr += WtW[i, i]
            for j in range(dp):
                fro += WtW[i, j] * WtW[i, j]
        pen_val = alpha * fro - alpha * tr

    wtx = np.zeros(dp)
    gx = np.zeros(dp)
    z = np.zeros(dp)
    u = np.zeros(d)
    G = np.zeros((d, dp))
    for b in range(B):
        for q in range(dp):
            acc = 0.0
            for p in range(d):
                acc += W[p, q] * Xb[b, p]
            wtx[q] = acc
            gx[q] = 0.0
        for p in range(d):
            for q in range(dp):
                G[p, q] = share * pen[p, q]
        val = share * pen_val
        for t in range(m + 1):
            if t == 0:
                row = pos[b]
                weight = npc[b]
                within = True
            else:
                row = neg[b, t - 1]
                weight = lam
                within = False
            if weight == 0.0:
                continue
            if fam == 2:
                base = bias
                for q in range(dp):
                    base += wtx[q] * A[row, q]
                k = 1.0
                for _ in range(degree):
                    k *= base
                dk = 1.0 * degree
                for _ in range(degree - 1):
                    dk *= base
                tv, ts = _tval(False, within, k)
                val += weight * tv
                c = weight * ts * dk
                for q in range(dp):
                    gx[q] += c * A[row, q]
                continue
            s = 0.0
            for q in range(dp):
                z[q] = wtx[q] - A[row, q]
                s += z[q] * z[q]
            k, dk = _rbf(fam, sigma, s)
            tv, ts = _tval(squared, within, k)
            val += weight * tv
            c = weight * ts * 2.0 * dk
            for q in range(dp):
                gx[q] += c * z[q]
            if two_dir:
                s = 0.0
                for p in range(d):
                    acc = 0.0
                    for q in range(dp):
                        acc += W[p, q] * A[row, q]
                    u[p] = Xb[b, p] - acc
                    s += u[p] * u[p]
                k, dk = _rbf(fam, sigma, s)
                tv, ts = _tval(squared, within, k)
                val += weight * tv
                c = -weight * ts * 2.0 * dk
                for p in range(d):
                    cu = c * u[p]
                    for q in range(dp):
                        G[p, q] += cu * A[row, q]
        for p in range(d):
            xp = Xb[b, p]
            for q in range(dp):
                g = G[p, q] + xp * gx[q]
                gsum[p, q] += g
                sqsum[p, q] += g * g
        vals[b] = val
    return vals, gsum, sqsum


@njit
def score_matrix_numba(W, Xr, Yr, fam, sigma, degree, bias, two_dir):
    M, d = Xr.shape
    P, dp = Yr.shape
    out = np.zeros((M, P))
    WtX = Xr @ W
    WY = Yr @ W.T
    for i in range(M):
        for j in range(P):
            if fam == 2:
                base = bias
                for q in range(dp):
                    base += WtX[i, q] * Yr[j, q]
                k = 1.0
                for _ in range(degree):
                    k *= base
                out[i, j] = 2.0 * k
                continue
            s = 0.0
            for q in range(dp):
                diff = WtX[i, q] - Yr[j, q]
                s += diff * diff
            k, _ = _rbf(fam, sigma, s)
            score = k
            if two_dir:
                s = 0.0
                for p in range(d):
                    diff = Xr[i, p] - WY[j, p]
                    s += diff * diff
                k, _ = _rbf(fam, sigma, s)
                score += k
            out[i, j] = score
    return out


# ----------------------------------------------------------------------------
# numpy
# ----------------------------------------------------------------------------

def _rbf_np(fam, sigma, s):
    if fam == FAM_GAUSSIAN:
        k = np.exp(-s / (2.0 * sigma * sigma))
        return k, -k / (2.0 * sigma * sigma)
    k = 1.0 / (1.0 + sigma * s)
    return k, -sigma * k * k


def _tval_np(squared, within_mask, k):
    if squared:
        val = np.where(within_mask, (1.0 - k) ** 2, k * k)
        slope = np.where(within_mask, -2.0 * (1.0 - k), 2.0 * k)
    else:
        val = np.where(within_mask, -k, k)
        slope = np.where(within_mask, -1.0, 1.0)
    return val, slope


def batch_loss_grad_numpy(W, Xb, A, pos, neg, npc, fam, sigma, degree, bias,
                          two_dir, squared, lam, share, alpha):
    B, d = Xb.shape
    rows = np.concatenate([pos[:, None], neg], axis=1)          # (B, T)
    Yall = A[rows]                                                # (B, T, dp)
    weights = np.empty(rows.shape)
    weights[:, 0] = npc
    weights[:, 1:] = lam
    within = np.zeros(rows.shape, dtype=bool)
    within[:, 0] = True
    WtX = Xb @ W                                                  # (B, dp)

    G = np.zeros((B,) + W.shape)
    vals = np.zeros(B)
    if share != 0.0 and alpha != 0.0:
        WtW = W.T @ W
        pen = 4.0 * alpha * (W @ WtW) - 2.0 * alpha * W
        G += share * pen
        vals += share * (alpha * np.sum(WtW * WtW) - alpha * np.trace(WtW))

    if fam == FAM_POLY:
        base = np.einsum("bq,btq->bt", WtX, Yall) + bias
        k = base ** degree
        dk = degree * base ** (degree - 1)
        tv, ts = _tval_np(False, within, k)
        vals += np.sum(weights * tv, axis=1)
        gx = np.einsum("bt,btq->bq", weights * ts * dk, Yall)
        G += Xb[:, :, None] * gx[:, None, :]
    else:
        Z = WtX[:, None, :] - Yall
        k, dk = _rbf_np(fam, sigma, np.einsum("btq,btq->bt", Z, Z))
        tv, ts = _tval_np(squared, within, k)
        vals += np.sum(weights * tv, axis=1)
        gx = np.einsum("bt,btq->bq", weights * ts * 2.0 * dk, Z)
        G += Xb[:, :, None] * gx[:, None, :]
        if two_dir:
            U = Xb[:, None, :] - Yall @ W.T                       # (B, T, d)
            k, dk = _rbf_np(fam, sigma, np.einsum("btp,btp->bt", U, U))
            tv, ts = _tval_np(squared, within, k)
            vals += np.sum(weights * tv, axis=1)
            G += np.einsum("bt,btp,btq->bpq", -weights * ts * 2.0 * dk, U, Yall)
    return vals, G.sum(axis=0), (G * G).sum(axis=0)


def score_matrix_numpy(W, Xr, Yr, fam, sigma, degree, bias, two_dir):
    if fam == FAM_POLY:
        return 2.0 * (Xr @ W @ Yr.T + bias) ** degree
    D = (Xr @ W)[:, None, :] - Yr[None, :, :]
    out, _ = _rbf_np(fam, sigma, np.einsum("ijq,ijq->ij", D, D))
    if two_dir:
        D = Xr[:, None, :] - (Yr @ W.T)[None, :, :]
        k, _ = _rbf_np(fam, sigma, np.einsum("ijp,ijp->ij", D, D))
        out = out + k
    return out


# ----------------------------------------------------------------------------
# dispatch
# ----------------------------------------------------------------------------

def batch_loss_grad(W, Xb, A, pos, neg, npc, fam, sigma, degree, bias,
                    two_dir, squared, lam, share, alpha):
    """Per-sample losses plus summed gradients and summed squared gradients."""
    args = (
        np.ascontiguousarray(W, dtype=np.float64),
        np.ascontiguousarray(Xb, dtype=np.float64),
        np.ascontiguousarray(A, dtype=np.float64),
        np.ascontiguousarray(pos, dtype=np.int64),
        np.ascontiguousarray(neg, dtype=np.int64).reshape(len(pos), -1),
        np.ascontiguousarray(npc, dtype=np.float64),
        int(fam), float(sigma), int(degree), float(bias),
        bool(two_dir), bool(squared), float(lam), float(share), float(alpha),
    )
    if _accel.BACKEND == "numba":
        return batch_loss_grad_numba(*args)
    # overflow surfaces as inf/nan, which the trainer turns into a TrainingError
    with np.errstate(over="ignore", invalid="ignore"):
        return batch_loss_grad_numpy(*args)


def score_matrix(W, Xr, Yr, fam, sigma, degree, bias, two_dir):
    """Classification scores, shape (M, P), for M samples against P candidates."""
    args = (
        np.ascontiguousarray(W, dtype=np.float64),
        np.ascontiguousarray(Xr, dtype=np.float64),
        np.ascontiguousarray(Yr, dtype=np.float64),
        int(fam), float(sigma), int(degree), float(bias), bool(two_dir),
    )
    if _accel.BACKEND == "numba":
        return score_matrix_numba(*args)
    return score_matrix_numpy(*args)
