"""Shared independent oracles for the test suite."""

import numpy as np

from qasched.surrogate import backward, forward_batch


def mse_loss(model, tokens, targets, training_mode=False, dropout_seed=0):
    out = forward_batch(model, tokens, training_mode=training_mode,
                        dropout_seed=dropout_seed)
    return float(np.mean((out - targets) ** 2))


def analytic_gradients(model, tokens, targets, training_mode=False,
                       dropout_seed=0):
    out, cache = forward_batch(model, tokens, training_mode=training_mode,
                               dropout_seed=dropout_seed, want_cache=True)
    d_out = 2.0 * (out - targets) / out.size
    return backward(model, cache, d_out)


def fd_gradient_max_relerr(model, tokens, targets, training_mode=False,
                           dropout_seed=0, step=1e-5, floor=1e-6):
    """Max relative disagreement between backprop and central differences.

    The denominator floor keeps exactly-zero gradient components (whose
    finite differences are pure rounding noise) from exploding the ratio;
    any component larger than the floor is compared truly relatively.
    """
    grads = analytic_gradients(model, tokens, targets, training_mode,
                               dropout_seed).parameters()
    worst = 0.0
    for p, g in zip(model.parameters(), grads):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for idx in range(flat_p.size):
            orig = flat_p[idx]
            flat_p[idx] = orig + step
            up = mse_loss(model, tokens, targets, training_mode, dropout_seed)
            flat_p[idx] = orig - step
            down = mse_loss(model, tokens, targets, training_mode, dropout_seed)
            flat_p[idx] = orig
            fd = (up - down) / (2.0 * step)
            rel = abs(fd - flat_g[idx]) / max(floor, abs(fd), abs(flat_g[idx]))
            worst = max(worst, rel)
    return worst
