"""Pure numpy kernels. Reference semantics for the compiled ``_kernels`` module."""
import numpy as np

TIE_BAND = 1e-13

# Dormand-Prince 5(4) tableau
C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
B = A[6]
E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0
HMIN_REL = 1e-14

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2


def fp_rhs(rho, F, beta, ei, ej, tie_band=TIE_BAND):
    """Fokker-Planck right-hand side given the plain payoff vector ``F``.

    Edge flux ``g_ij * (Fbar_i - Fbar_j)`` is added to ``i`` and removed from
    ``j``, so the components sum to zero up to round-off.
    """
    if beta > 0:
        with np.errstate(invalid="ignore", divide="ignore"):
            fbar = F - beta * np.log(rho)
    else:
        fbar = F
    d = fbar[ei] - fbar[ej]
    ri = rho[ei]
    rj = rho[ej]
    w = np.where(d > tie_band, rj, np.where(d < -tie_band, ri, 0.5 * (ri + rj)))
    m = w * d
    n = rho.shape[0]
    return np.bincount(ei, m, n) - np.bincount(ej, m, n)


def _project(y, floor):
    y = y / y.sum()
    low = y < floor
    nclamp = int(low.sum())
    if nclamp:
        y[low] = floor
        y = y / y.sum()
    return y, nclamp


def dopri_integrate(f, y0, t_out, rtol=1e-9, atol=1e-9, h0=0.0, floor=1e-12,
                    max_steps=10_000_000):
    """Adaptive Dormand-Prince integration on the simplex.

    Steps are clipped to land exactly on every ``t_out`` entry; each
    accepted state is renormalised to unit mass and floored at ``floor``.

    Returns
    -------
    states : (len(t_out), n) array
        Rows past the point of failure are NaN.
    stats : dict
        ``accepted``, ``rejected``, ``clamps``, ``status``, ``t_reached``,
        ``h_last``.
    """
    t_out = np.asarray(t_out, dtype=float)
    y, clamps = _project(np.array(y0, dtype=float), floor)
    n = y.size
    out = np.full((t_out.size, n), np.nan)
    out[0] = y
    t = t_out[0]
    k = np.empty((7, n))
    if h0 <= 0:
        k[0] = f(y)
        h0 = min(0.1, 0.01 / max(float(np.max(np.abs(k[0]))), 1e-10))
    h = h0
    accepted = rejected = 0
    status = STATUS_OK
    idx = 1
    while idx < t_out.size:
        if accepted + rejected >= max_steps:
            status = STATUS_MAX_STEPS
            break
        target = t_out[idx]
        remaining = target - t
        hit = h >= remaining
        h_try = remaining if hit else h
        k[0] = f(y)
        for s in range(1, 7):
            ys = y + h_try * np.dot(A[s], k[:s])
            k[s] = f(ys)
        y5 = ys  # stage 7 is evaluated at the 5th-order solution
        err_vec = h_try * np.dot(E, k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        with np.errstate(invalid="ignore"):
            err = float(np.max(np.abs(err_vec) / scale))
        if err <= 1.0:
            t = target if hit else t + h_try
            y, nc = _project(y5, floor)
            clamps += nc
            accepted += 1
            if hit:
                out[idx] = y
                idx += 1
            fac = FAC_MAX if err == 0.0 else min(FAC_MAX, max(FAC_MIN, SAFETY * err ** -0.2))
            h = h_try * fac
        else:
            rejected += 1
            fac = FAC_MIN if not np.isfinite(err) else max(FAC_MIN, SAFETY * err ** -0.2)
            h = h_try * fac
        if h < HMIN_REL * max(1.0, abs(t)):
            status = STATUS_UNDERFLOW
            break
    stats = dict(accepted=accepted, rejected=rejected, clamps=clamps, status=status,
                 t_reached=float(t), h_last=float(h))
    return out, stats


def integrate_matrix(a, ei, ej, y0, beta, t_out, rtol=1e-9, atol=1e-9, h0=0.0,
                     floor=1e-12, max_steps=10_000_000, tie_band=TIE_BAND):
    """:func:`dopri_integrate` specialised to ``F = a @ rho``."""
    a = np.asarray(a, dtype=float)

    def f(y):
        return fp_rhs(y, a @ y, beta, ei, ej, tie_band)

    return dopri_integrate(f, y0, t_out, rtol, atol, h0, floor, max_steps)
