import numpy as np

from randattn import AttentionInputs


def make_inputs(g, N, M, D, Dv=None, key_scale=1.0) -> AttentionInputs:
    return AttentionInputs(
        g.standard_normal((N, D)), key_scale * g.standard_normal((M, D)), g.standard_normal((M, Dv or D))
    ).scaled()


def naive_attention(Q, K, V):
    out = np.zeros((Q.shape[0], V.shape[1]))
    for n in range(Q.shape[0]):
        weights = [np.exp(sum(q * k for q, k in zip(Q[n], K[m]))) for m in range(K.shape[0])]
        total = sum(weights)
        for m in range(K.shape[0]):
            out[n] += weights[m] / total * V[m]
    return out
