"""Small end-to-end model used by gradient checks."""

import numpy as np

from ugn.autograd import Tape, Tensor
from ugn.decoder import decode, init_decoder, node_matrix
from ugn.encoder import encode, init_encoder
from ugn.graph import build_graph, normalized_adjacency
from ugn.losses import total_loss

from oracles import central_difference, rel_error


def make_instance(seed, n=5, c=3, latent=4, classes=2):
    rng = np.random.default_rng(seed)
    iu, ju = np.nonzero(np.triu(rng.random((n, n)) < 0.5, 1))
    g = build_graph(n, np.stack([iu, ju], axis=1))
    feats = rng.uniform(0.1, 1.0, size=(n, c))
    enc = init_encoder([c, 4, latent], rng)
    dec = init_decoder(latent, classes, channels=(2,), hidden=(5,), rng=rng)
    # biases start at zero; move them so no ReLU sits exactly on its kink
    for p in dec.parameters():
        p.data += rng.normal(scale=0.05, size=p.shape)
    labels = rng.integers(0, classes, size=n)
    labels[rng.random(n) < 0.4] = -1
    labels[0] = max(labels[0], 0)
    return normalized_adjacency(g), feats, enc, dec, labels, g.edges


def composite_loss(a_hat, feats, enc, dec, labels, edges):
    logits = decode(node_matrix(encode(a_hat, feats, enc)), dec)
    return total_loss(logits, labels, edges).total


# central differences at h=1e-6 carry ~1e-10 of rounding noise, so entries
# much smaller than 1e-5 cannot be compared relatively
GRAD_FLOOR = 1e-5


def composite_max_error(seed, h=1e-6, floor=GRAD_FLOOR):
    """Largest relative error over all parameters of one random instance."""
    a_hat, feats, enc, dec, labels, edges = make_instance(seed)
    params = enc.parameters() + dec.parameters()
    with Tape() as tape:
        loss = composite_loss(a_hat, feats, enc, dec, labels, edges)
    tape.backward(loss)
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        saved = p.data.copy()

        def f(x, p=p):
            p.data[...] = x
            return composite_loss(a_hat, feats, enc, dec, labels, edges).item()

        numeric = central_difference(f, saved, h)
        p.data[...] = saved
        worst = max(worst, rel_error(analytic, numeric, floor))
    return worst
