"""Independent brute-force reference implementations used by the tests.

Everything here is written with explicit loops and elementary operations so
it shares no code path with the library: direct-summation DFT, spatial-domain
spectral encoding, per-window SSIM, and per-element network layers.
"""

import math

import numpy as np


def naive_centered_dft(u: np.ndarray) -> np.ndarray:
    """O(N^4) double-sum DFT with the DC term at pixel (N//2, N//2)."""
    n = u.shape[0]
    c = n // 2
    out = np.zeros((n, n), dtype=complex)
    for p in range(n):
        for q in range(n):
            acc = 0.0 + 0.0j
            for x in range(n):
                for y in range(n):
                    angle = -2.0 * math.pi * ((p - c) * (x - c) + (q - c) * (y - c)) / n
                    acc += u[x, y] * complex(math.cos(angle), math.sin(angle))
            out[p, q] = acc
    return out


def matrix_centered_dft(u: np.ndarray) -> np.ndarray:
    """Direct-summation DFT via an explicit exponential matrix (no FFT)."""
    n = u.shape[0]
    c = n // 2
    k = np.arange(n) - c
    e = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return e @ u @ e.T


def direct_encode(cube: np.ndarray, kernels: np.ndarray, weights) -> np.ndarray:
    """Spatial-domain evaluation of the band-summed encoding.

    For every source voxel, the band's kernel is translated so its center
    pixel (N//2, N//2) lands on the source pixel, scaled by the voxel value
    and the band weight, and accumulated over the H x W output window.
    """
    height, width, bands = cube.shape
    n = kernels.shape[1]
    c = n // 2
    out = np.zeros((height, width))
    for b in range(bands):
        k = kernels[b]
        w = weights[b]
        for si in range(height):
            r0, r1 = max(0, si - c), min(height, si + n - c)
            for sj in range(width):
                val = cube[si, sj, b]
                if val == 0.0:
                    continue
                c0, c1 = max(0, sj - c), min(width, sj + n - c)
                out[r0:r1, c0:c1] += (w * val) * k[
                    c + r0 - si : c + r1 - si, c + c0 - sj : c + c1 - sj
                ]
    return out


def ssim_loop(a: np.ndarray, b: np.ndarray, window: np.ndarray,
              c1: float, c2: float) -> float:
    """Sliding-window SSIM computed one window at a time."""
    wsize = window.shape[0]
    height, width = a.shape
    values = []
    for i in range(height - wsize + 1):
        for j in range(width - wsize + 1):
            pa = a[i : i + wsize, j : j + wsize]
            pb = b[i : i + wsize, j : j + wsize]
            mu1 = float((window * pa).sum())
            mu2 = float((window * pb).sum())
            s1 = float((window * pa * pa).sum()) - mu1 * mu1
            s2 = float((window * pb * pb).sum()) - mu2 * mu2
            s12 = float((window * pa * pb).sum()) - mu1 * mu2
            num = (2 * mu1 * mu2 + c1) * (2 * s12 + c2)
            den = (mu1 * mu1 + mu2 * mu2 + c1) * (s1 + s2 + c2)
            values.append(num / den)
    return sum(values) / len(values)


def layer_norm_loop(x: np.ndarray, gain, bias, eps: float = 1e-6) -> np.ndarray:
    height, width, channels = x.shape
    out = np.zeros_like(x, dtype=float)
    for i in range(height):
        for j in range(width):
            vec = x[i, j, :]
            mu = sum(vec) / channels
            var = sum((v - mu) ** 2 for v in vec) / channels
            for c in range(channels):
                out[i, j, c] = (vec[c] - mu) / math.sqrt(var + eps) * gain[c] + bias[c]
    return out


def conv3x3_loop(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """3x3 convolution with zero padding 1, weight (C_out, C_in, 3, 3)."""
    height, width, cin = x.shape
    cout = weight.shape[0]
    out = np.zeros((height, width, cout))
    for o in range(cout):
        for i in range(height):
            for j in range(width):
                acc = 0.0
                for ci in range(cin):
                    for di in range(3):
                        for dj in range(3):
                            si, sj = i + di - 1, j + dj - 1
                            if 0 <= si < height and 0 <= sj < width:
                                acc += weight[o, ci, di, dj] * x[si, sj, ci]
                out[i, j, o] = acc
    return out


def depthwise3x3_loop(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    height, width, channels = x.shape
    out = np.zeros_like(x, dtype=float)
    for c in range(channels):
        for i in range(height):
            for j in range(width):
                acc = 0.0
                for di in range(3):
                    for dj in range(3):
                        si, sj = i + di - 1, j + dj - 1
                        if 0 <= si < height and 0 <= sj < width:
                            acc += weight[c, 0, di, dj] * x[si, sj, c]
                out[i, j, c] = acc
    return out


def project_loop(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    height, width, cin = x.shape
    cout = weight.shape[0]
    out = np.zeros((height, width, cout))
    for i in range(height):
        for j in range(width):
            for o in range(cout):
                out[i, j, o] = sum(weight[o, c] * x[i, j, c] for c in range(cin))
    return out


def down4_loop(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """4x4 convolution, stride 2, padding 1, weight (C_out, C_in, 4, 4)."""
    height, width, cin = x.shape
    cout = weight.shape[0]
    out = np.zeros((height // 2, width // 2, cout))
    for o in range(cout):
        for oi in range(height // 2):
            for oj in range(width // 2):
                acc = 0.0
                for ci in range(cin):
                    for di in range(4):
                        for dj in range(4):
                            si, sj = 2 * oi + di - 1, 2 * oj + dj - 1
                            if 0 <= si < height and 0 <= sj < width:
                                acc += weight[o, ci, di, dj] * x[si, sj, ci]
                out[oi, oj, o] = acc
    return out


def up2_loop(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """2x2 transposed convolution, stride 2, weight (C_in, C_out, 2, 2)."""
    height, width, cin = x.shape
    cout = weight.shape[1]
    out = np.zeros((2 * height, 2 * width, cout))
    for i in range(height):
        for j in range(width):
            for ci in range(cin):
                for o in range(cout):
                    for di in range(2):
                        for dj in range(2):
                            out[2 * i + di, 2 * j + dj, o] += (
                                x[i, j, ci] * weight[ci, o, di, dj]
                            )
    return out


def spectral_msa_loop(x: np.ndarray, weights: dict, heads: int) -> np.ndarray:
    """Loop evaluation of spectral attention: explicit Q/K/V and attention
    matrices, column-normalized softmax, then 1x1 + 3x3 finishing."""
    height, width, channels = x.shape
    hw = height * width
    d = channels // heads
    tokens = x.reshape(hw, channels)
    wq = np.asarray(weights["q_proj"], dtype=float)
    wk = np.asarray(weights["k_proj"], dtype=float)
    wv = np.asarray(weights["v_proj"], dtype=float)
    q = np.zeros((hw, channels))
    k = np.zeros((hw, channels))
    v = np.zeros((hw, channels))
    for t in range(hw):
        for o in range(channels):
            q[t, o] = sum(wq[o, c] * tokens[t, c] for c in range(channels))
            k[t, o] = sum(wk[o, c] * tokens[t, c] for c in range(channels))
            v[t, o] = sum(wv[o, c] * tokens[t, c] for c in range(channels))
    merged = np.zeros((hw, channels))
    for h in range(heads):
        cols = range(h * d, (h + 1) * d)
        qh = q[:, list(cols)].copy()
        kh = k[:, list(cols)].copy()
        vh = v[:, list(cols)]
        for col in range(d):
            qn = math.sqrt(sum(qh[t, col] ** 2 for t in range(hw)))
            kn = math.sqrt(sum(kh[t, col] ** 2 for t in range(hw)))
            if qn > 0:
                qh[:, col] /= qn
            if kn > 0:
                kh[:, col] /= kn
        temp = float(weights["temperature"][h])
        logits = np.zeros((d, d))
        for a in range(d):
            for bcol in range(d):
                logits[a, bcol] = temp * sum(kh[t, a] * qh[t, bcol] for t in range(hw))
        attn = np.zeros((d, d))
        for bcol in range(d):
            col = [math.exp(logits[a, bcol]) for a in range(d)]
            total = sum(col)
            for a in range(d):
                attn[a, bcol] = col[a] / total
        for t in range(hw):
            for bcol in range(d):
                merged[t, h * d + bcol] = sum(
                    vh[t, a] * attn[a, bcol] for a in range(d)
                )
    z = merged.reshape(height, width, channels)
    return project_loop(z, np.asarray(weights["out_proj"], dtype=float)) + conv3x3_loop(
        z, np.asarray(weights["conv_res"], dtype=float)
    )


def gelu_scalar(v: float) -> float:
    return 0.5 * v * (1.0 + math.erf(v / math.sqrt(2.0)))


def ffn_loop(x: np.ndarray, weights: dict) -> np.ndarray:
    t = project_loop(x, np.asarray(weights["expand"], dtype=float))
    t = np.vectorize(gelu_scalar)(t)
    t = depthwise3x3_loop(t, np.asarray(weights["dw"], dtype=float))
    t = np.vectorize(gelu_scalar)(t)
    return project_loop(t, np.asarray(weights["contract"], dtype=float))


def fusion_loop(shallow: np.ndarray, deep: np.ndarray, weights: dict) -> np.ndarray:
    cat = np.concatenate([shallow, deep], axis=2)
    m = conv3x3_loop(cat, np.asarray(weights["cat_conv"], dtype=float))
    m = m + conv3x3_loop(shallow, np.asarray(weights["shallow_conv"], dtype=float))
    dconv = conv3x3_loop(deep, np.asarray(weights["deep_conv"], dtype=float))
    stacked = np.concatenate([dconv, m], axis=2)
    return conv3x3_loop(stacked, np.asarray(weights["out_conv"], dtype=float))
