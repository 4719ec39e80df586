"""Independent reference computations used by the test suite.

Nothing here calls the analytic derivative code paths it is used to check.
"""
import numpy as np

from ratio_forge import fgen
from ratio_forge.net import mlp_backward, mlp_forward


def central_diff(fn, x, h=1e-5):
    return (fn(x + h) - fn(x - h)) / (2 * h)


def second_diff(fn, x, h=1e-4):
    return (fn(x + h) - 2 * fn(x) + fn(x - h)) / (h * h)


def fd_param_grads(loss_fn, params, h=1e-6):
    """Central differences of ``loss_fn(params)`` over every parameter entry."""
    arrays = [a.copy() for a in params.arrays()]
    out = []
    for k, a in enumerate(arrays):
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            old = a[idx]
            a[idx] = old + h
            up = loss_fn(params.with_arrays(arrays))
            a[idx] = old - h
            down = loss_fn(params.with_arrays(arrays))
            a[idx] = old
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


def fd_input_grads(fn, x, h=1e-6):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        up = fn(x)
        x[idx] = old - h
        down = fn(x)
        x[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g


def max_rel_err(a, b, floor=1e-6):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def per_sample_ratio_jacobian(net, x):
    """d r_i / d theta for each row, one backward pass per sample."""
    out, tape = mlp_forward(net, x)
    rows = []
    for i in range(len(x)):
        up = np.zeros_like(out)
        up[i, 0] = 1.0
        grads, _ = mlp_backward(net, tape, up)
        rows.append(grads.arrays())
    return out[:, 0], rows


def moment_matching_gradient(gen, net, real, fake):
    """mean_fake f''(r) r dr/dtheta - mean_real f''(r) dr/dtheta, per sample."""
    r_real, j_real = per_sample_ratio_jacobian(net, real)
    r_fake, j_fake = per_sample_ratio_jacobian(net, fake)
    total = [np.zeros_like(a) for a in net.arrays()]
    for r, jac in zip(r_fake, j_fake):
        w = fgen.f_second(gen, r) * r / len(fake)
        for t, j in zip(total, jac):
            t += w * j
    for r, jac in zip(r_real, j_real):
        w = fgen.f_second(gen, r) / len(real)
        for t, j in zip(total, jac):
            t -= w * j
    return total


def enumerate_divergence(p, q, f):
    """sum_x q(x) f(p(x)/q(x)) with a plain python loop and a scalar f."""
    return sum(qx * f(px / qx) for px, qx in zip(p, q))
