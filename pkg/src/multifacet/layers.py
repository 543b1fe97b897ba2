"""Numpy Transformer building blocks with explicit backward passes.

Every ``*_forward`` returns ``(output, cache)`` and the matching
``*_backward`` consumes the upstream gradient and the cache, returning input
gradients and accumulating parameter gradients into ``grads`` (a dict keyed
by parameter name). Sequences are 2-d ``(T, dim)`` arrays; there is no batch
axis.
"""

import numpy as np

LN_EPS = 1e-5


def _acc(grads, name, value):
    if name in grads:
        grads[name] += value
    else:
        grads[name] = value


def linear_forward(x, P, name):
    return x @ P[name + ".weight"] + P[name + ".bias"], x


def linear_backward(dy, x, P, name, grads):
    _acc(grads, name + ".weight", x.T @ dy)
    _acc(grads, name + ".bias", dy.sum(axis=0))
    return dy @ P[name + ".weight"].T


def layer_norm_forward(x, P, name):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv
    return xhat * P[name + ".gain"] + P[name + ".bias"], (xhat, inv)


def layer_norm_backward(dy, cache, P, name, grads):
    xhat, inv = cache
    _acc(grads, name + ".gain", np.sum(dy * xhat, axis=0))
    _acc(grads, name + ".bias", dy.sum(axis=0))
    dxhat = dy * P[name + ".gain"]
    return inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                  - xhat * np.mean(dxhat * xhat, axis=-1, keepdims=True))


def _split(x, heads):
    T, d = x.shape
    return x.reshape(T, heads, d // heads).transpose(1, 0, 2)


def _merge(x):
    h, T, dh = x.shape
    return x.transpose(1, 0, 2).reshape(T, h * dh)


def attention_forward(xq, xkv, P, name, heads, dropout=0.0, rng=None):
    """Multi-head scaled dot-product attention with dropout on the weights."""
    q, cq = linear_forward(xq, P, name + ".q")
    k, ck = linear_forward(xkv, P, name + ".k")
    v, cv = linear_forward(xkv, P, name + ".v")
    Q, Kh, V = _split(q, heads), _split(k, heads), _split(v, heads)
    scale = 1.0 / np.sqrt(Q.shape[-1])
    S = (Q @ Kh.transpose(0, 2, 1)) * scale
    S = S - S.max(axis=-1, keepdims=True)
    A = np.exp(S)
    A /= A.sum(axis=-1, keepdims=True)
    if dropout > 0.0 and rng is not None:
        mask = (rng.random(A.shape) >= dropout).astype(A.dtype) / (1.0 - dropout)
        Ad = A * mask
    else:
        mask = None
        Ad = A
    C = _merge(Ad @ V)
    out, co = linear_forward(C, P, name + ".o")
    return out, (cq, ck, cv, Q, Kh, V, A, mask, Ad, scale, co)


def attention_backward(dout, cache, P, name, heads, grads):
    """Returns ``(dxq, dxkv)``; for self-attention the caller sums them."""
    cq, ck, cv, Q, Kh, V, A, mask, Ad, scale, co = cache
    dC = _split(linear_backward(dout, co, P, name + ".o", grads), heads)
    dAd = dC @ V.transpose(0, 2, 1)
    dV = Ad.transpose(0, 2, 1) @ dC
    dA = dAd * mask if mask is not None else dAd
    dS = A * (dA - np.sum(dA * A, axis=-1, keepdims=True)) * scale
    dQ = dS @ Kh
    dK = dS.transpose(0, 2, 1) @ Q
    dxq = linear_backward(_merge(dQ), cq, P, name + ".q", grads)
    dxkv = (linear_backward(_merge(dK), ck, P, name + ".k", grads)
            + linear_backward(_merge(dV), cv, P, name + ".v", grads))
    return dxq, dxkv


def ffn_forward(x, P, name):
    h, c1 = linear_forward(x, P, name + ".in")
    r = np.maximum(h, 0.0)
    y, c2 = linear_forward(r, P, name + ".out")
    return y, (c1, h > 0, c2)


def ffn_backward(dy, cache, P, name, grads):
    c1, active, c2 = cache
    dr = linear_backward(dy, c2, P, name + ".out", grads)
    return linear_backward(dr * active, c1, P, name + ".in", grads)


def encoder_block_forward(x, P, name, heads, dropout, rng):
    """Post-norm block: ``LN(x + SelfAttn(x))`` then ``LN(. + FFN(.))``."""
    a, ca = attention_forward(x, x, P, name + ".attn", heads, dropout, rng)
    y1, cn1 = layer_norm_forward(x + a, P, name + ".ln1")
    f, cf = ffn_forward(y1, P, name + ".ffn")
    y2, cn2 = layer_norm_forward(y1 + f, P, name + ".ln2")
    return y2, (ca, cn1, cf, cn2)


def encoder_block_backward(dy, cache, P, name, heads, grads):
    ca, cn1, cf, cn2 = cache
    dh2 = layer_norm_backward(dy, cn2, P, name + ".ln2", grads)
    dy1 = dh2 + ffn_backward(dh2, cf, P, name + ".ffn", grads)
    dh1 = layer_norm_backward(dy1, cn1, P, name + ".ln1", grads)
    dq, dkv = attention_backward(dh1, ca, P, name + ".attn", heads, grads)
    return dh1 + dq + dkv


def decoder_block_forward(x, memory, P, name, heads, dropout, rng, cross):
    """Self-attention over facet slots, optional cross-attention, then FFN."""
    a, ca = attention_forward(x, x, P, name + ".self", heads, dropout, rng)
    y, cn1 = layer_norm_forward(x + a, P, name + ".ln1")
    cc = cn2 = None
    if cross:
        c, cc = attention_forward(y, memory, P, name + ".cross", heads, dropout, rng)
        y, cn2 = layer_norm_forward(y + c, P, name + ".ln2")
    f, cf = ffn_forward(y, P, name + ".ffn")
    out, cn3 = layer_norm_forward(y + f, P, name + ".ln3")
    return out, (ca, cn1, cc, cn2, cf, cn3)


def decoder_block_backward(dy, cache, P, name, heads, grads, cross):
    """Returns ``(dx, dmemory)``; ``dmemory`` is None without cross-attention."""
    ca, cn1, cc, cn2, cf, cn3 = cache
    dh = layer_norm_backward(dy, cn3, P, name + ".ln3", grads)
    dy_ = dh + ffn_backward(dh, cf, P, name + ".ffn", grads)
    dmem = None
    if cross:
        dh = layer_norm_backward(dy_, cn2, P, name + ".ln2", grads)
        dq, dmem = attention_backward(dh, cc, P, name + ".cross", heads, grads)
        dy_ = dh + dq
    dh = layer_norm_backward(dy_, cn1, P, name + ".ln1", grads)
    dq, dkv = attention_backward(dh, ca, P, name + ".self", heads, grads)
    return dh + dq + dkv, dmem
