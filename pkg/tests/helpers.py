import numpy as np

from wmcoherence.gaussian import evaluate


def quadrature_trace(g, n=401, width=8.0):
    """Trapezoid rule on a box of +-width standard deviations around the
    maximum of |rho|."""
    re = np.array([[2 * g.a.real, -g.c.real], [-g.c.real, 2 * g.b.real]])
    cov = np.linalg.inv(re)
    center = cov @ np.array([g.u.real, g.v.real])
    sx, sy = np.sqrt(np.diag(cov))
    x = g.Q + center[0] + np.linspace(-width * sx, width * sx, n)
    y = g.P + center[1] + np.linspace(-width * sy, width * sy, n)
    f = evaluate(g, x[:, None], y[None, :])
    return np.trapezoid(np.trapezoid(f, y, axis=1), x)
