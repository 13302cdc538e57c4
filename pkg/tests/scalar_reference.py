"""Independent scalar reference for the encoder forward pass.

Pure-Python lists and math module only: no numpy, no imports from the
package. Written directly from the model definition (post-layer-norm
encoder, additive -1e9 mask, exact-erf GELU, tanh pooler, linear head)
so it can serve as an oracle for the vectorized implementation. Slow on
purpose; used only on tiny configurations.

Tensor dict layout matches the documented checkpoint tensor names:
tok_emb, pos_emb, seg_emb, emb_ln_gain, emb_ln_bias,
layer{i}.{wq,bq,wk,bk,wv,bv,wo,bo,ln1_gain,ln1_bias,w1,b1,w2,b2,ln2_gain,ln2_bias},
pooler_w, pooler_b, classifier_w, classifier_b.
Matrices are nested lists indexed [row][col]; projections compute
out[t][j] = sum_i h[t][i] * w[i][j] + b[j], and the classifier computes
logits[c] = sum_j pooled[j] * classifier_w[c][j] + classifier_b[c].
"""

import math

MASK_ADDEND = -1e9


def _layer_norm_rows(rows, gain, bias, eps):
    out = []
    for row in rows:
        n = len(row)
        mu = sum(row) / n
        var = sum((v - mu) ** 2 for v in row) / n
        inv = 1.0 / math.sqrt(var + eps)
        out.append([(v - mu) * inv * g + b for v, g, b in zip(row, gain, bias)])
    return out


def _affine_rows(rows, w, b):
    n_out = len(b)
    out = []
    for row in rows:
        acc = list(b)
        for i, x in enumerate(row):
            wi = w[i]
            for j in range(n_out):
                acc[j] += x * wi[j]
        out.append(acc)
    return out


def _softmax(row):
    m = max(row)
    exps = [math.exp(v - m) for v in row]
    s = sum(exps)
    return [e / s for e in exps]


def _gelu(x):
    return x * 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def forward_scalar(tensors, config, ids, mask):
    """Logits (list of n_classes floats) for one unbatched sequence."""
    d = config["d_model"]
    n_heads = config["n_heads"]
    n_layers = config["n_layers"]
    eps = config["layer_norm_eps"]
    d_head = d // n_heads
    T = len(ids)

    x = []
    for t, tok in enumerate(ids):
        x.append([
            tensors["tok_emb"][tok][k] + tensors["pos_emb"][t][k] + tensors["seg_emb"][0][k]
            for k in range(d)
        ])
    h = _layer_norm_rows(x, tensors["emb_ln_gain"], tensors["emb_ln_bias"], eps)

    for li in range(n_layers):
        p = f"layer{li}."
        q = _affine_rows(h, tensors[p + "wq"], tensors[p + "bq"])
        k = _affine_rows(h, tensors[p + "wk"], tensors[p + "bk"])
        v = _affine_rows(h, tensors[p + "wv"], tensors[p + "bv"])
        ctx = [[0.0] * d for _ in range(T)]
        for head in range(n_heads):
            lo = head * d_head
            for a in range(T):
                scores = []
                for b in range(T):
                    dot = sum(q[a][lo + c] * k[b][lo + c] for c in range(d_head))
                    s = dot / math.sqrt(d_head)
                    if mask[b] == 0:
                        s += MASK_ADDEND
                    scores.append(s)
                probs = _softmax(scores)
                for c in range(d_head):
                    ctx[a][lo + c] = sum(probs[b] * v[b][lo + c] for b in range(T))
        attn = _affine_rows(ctx, tensors[p + "wo"], tensors[p + "bo"])
        h = _layer_norm_rows(
            [[hv + av for hv, av in zip(hr, ar)] for hr, ar in zip(h, attn)],
            tensors[p + "ln1_gain"], tensors[p + "ln1_bias"], eps,
        )
        u = _affine_rows(h, tensors[p + "w1"], tensors[p + "b1"])
        g = [[_gelu(val) for val in row] for row in u]
        f = _affine_rows(g, tensors[p + "w2"], tensors[p + "b2"])
        h = _layer_norm_rows(
            [[hv + fv for hv, fv in zip(hr, fr)] for hr, fr in zip(h, f)],
            tensors[p + "ln2_gain"], tensors[p + "ln2_bias"], eps,
        )

    pooled_pre = _affine_rows([h[0]], tensors["pooler_w"], tensors["pooler_b"])[0]
    pooled = [math.tanh(v) for v in pooled_pre]
    logits = []
    for crow, cb in zip(tensors["classifier_w"], tensors["classifier_b"]):
        logits.append(sum(pv * wv for pv, wv in zip(pooled, crow)) + cb)
    return logits
