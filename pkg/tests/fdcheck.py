"""Central finite-difference gradient checking (the independent oracle the
analytic backward pass is held against)."""

import numpy as np

from canoseg import autodiff as ad


def max_rel_error(build_loss, params, h=1e-3, max_entries=None, rng=None):
    """Compare analytic gradients of ``build_loss()`` against central finite
    differences at float64.

    Relative error uses an absolute floor of 1: |fd - an| / max(|fd|, |an|, 1),
    so near-zero gradients are compared absolutely.  ``max_entries`` limits the
    number of randomly chosen entries checked per parameter.
    """
    for p in params:
        assert p.data.dtype == np.float64, "gradient checks must run at float64"
        p.zero_grad()
    loss = build_loss()
    ad.backward(loss)
    analytic = {id(p): (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for p in params}
    for p in params:
        p.zero_grad()
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        indices = range(flat.size)
        if max_entries is not None and flat.size > max_entries:
            rng = rng or np.random.default_rng(0)
            indices = rng.choice(flat.size, size=max_entries, replace=False)
        an_flat = analytic[id(p)].reshape(-1)
        for i in indices:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = build_loss().item()
            flat[i] = orig - h
            f_minus = build_loss().item()
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * h)
            err = abs(fd - an_flat[i]) / max(abs(fd), abs(an_flat[i]), 1.0)
            worst = max(worst, err)
    return worst


def quadratic_probe(out, seed=0):
    """Reduce an op output to a scalar with nontrivial curvature so every
    output entry influences the loss: sum(out * R + out * out)."""
    r = np.random.default_rng(seed).normal(size=out.data.shape)
    return ad.sum_(ad.add(ad.mul(out, ad.Tensor(r)), ad.mul(out, out)))
