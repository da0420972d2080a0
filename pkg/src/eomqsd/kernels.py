"""Hot kernels for matrix-free operator action and trajectory integration.

A state is a flat complex128 vector over a mixed-radix Fock basis.  Every
kernel receives the basis layout as three arrays:

``occ``    int64 (n_modes, dim) occupation table, ``occ[m, k]`` is the
           number of quanta of mode ``m`` in basis state ``k``
``cut``    int64 (n_modes,) per-mode cutoffs
``stride`` int64 (n_modes,) row-major strides

Everything exists twice: explicit loops compiled by numba (the stepper is
fused, works in preallocated buffers and never materializes intermediate
states it can form on the fly), and vectorized numpy.  ``USE_NUMBA``
selects which set the public names below point to; both sets take the same
arguments and agree to rounding.
"""

import math

import numpy as np

from ._jit import USE_NUMBA, njit

# SDE forms
FORM_STANDARD = 0
FORM_SWAPPED = 1

# run_steps status codes
STATUS_OK = 0
STATUS_UNSTABLE = 1

NORM_LOW = 0.5
NORM_HIGH = 1.5


# --------------------------------------------------------------------------
# numba primitives
# --------------------------------------------------------------------------

@njit(cache=True)
def _lower_nb(psi, occ, cut, stride, m):
    out = np.zeros(psi.size, np.complex128)
    top = cut[m] - 1
    s = stride[m]
    for k in range(psi.size):
        n = occ[m, k]
        if n < top:
            out[k] = math.sqrt(n + 1.0) * psi[k + s]
    return out


@njit(cache=True)
def _raise_nb(psi, occ, cut, stride, m):
    out = np.zeros(psi.size, np.complex128)
    s = stride[m]
    for k in range(psi.size):
        n = occ[m, k]
        if n >= 1:
            out[k] = math.sqrt(float(n)) * psi[k - s]
    return out


@njit(cache=True)
def _number_nb(psi, occ, m):
    out = np.empty(psi.size, np.complex128)
    for k in range(psi.size):
        out[k] = occ[m, k] * psi[k]
    return out


@njit(cache=True)
def _hamiltonian_nb(psi, occ, cut, stride, ti, tj, tw, free):
    # sum_q tw[q] (m_i^dag m_j + m_j^dag m_i) psi + free * N_total psi
    dim = psi.size
    nmode = cut.size
    out = np.zeros(dim, np.complex128)
    for k in range(dim):
        acc = 0j
        if free != 0.0:
            tot = 0
            for m in range(nmode):
                tot += occ[m, k]
            acc += free * tot * psi[k]
        for q in range(ti.size):
            w = tw[q]
            if w == 0.0:
                continue
            i = ti[q]
            j = tj[q]
            ni = occ[i, k]
            nj = occ[j, k]
            if ni >= 1 and nj < cut[j] - 1:
                acc += w * math.sqrt(ni * (nj + 1.0)) * psi[k - stride[i] + stride[j]]
            if nj >= 1 and ni < cut[i] - 1:
                acc += w * math.sqrt(nj * (ni + 1.0)) * psi[k - stride[j] + stride[i]]
        out[k] = acc
    return out


@njit(cache=True)
def _top_population_nb(psi, occ, cut):
    worst = 0.0
    for m in range(cut.size):
        top = cut[m] - 1
        p = 0.0
        for k in range(psi.size):
            if occ[m, k] == top:
                p += psi[k].real ** 2 + psi[k].imag ** 2
        if p > worst:
            worst = p
    return worst


# --------------------------------------------------------------------------
# numpy primitives
# --------------------------------------------------------------------------

def _lower_np(psi, occ, cut, stride, m):
    out = np.zeros(psi.size, np.complex128)
    n = occ[m]
    idx = np.flatnonzero(n < cut[m] - 1)
    out[idx] = np.sqrt(n[idx] + 1.0) * psi[idx + stride[m]]
    return out


def _raise_np(psi, occ, cut, stride, m):
    out = np.zeros(psi.size, np.complex128)
    n = occ[m]
    idx = np.flatnonzero(n >= 1)
    out[idx] = np.sqrt(n[idx].astype(np.float64)) * psi[idx - stride[m]]
    return out


def _number_np(psi, occ, m):
    return occ[m] * psi


def _hop_np(psi, occ, cut, stride, i, j):
    out = np.zeros(psi.size, np.complex128)
    ni = occ[i]
    nj = occ[j]
    idx = np.flatnonzero((ni >= 1) & (nj < cut[j] - 1))
    out[idx] = np.sqrt(ni[idx] * (nj[idx] + 1.0)) * psi[idx - stride[i] + stride[j]]
    return out


def _hamiltonian_np(psi, occ, cut, stride, ti, tj, tw, free):
    out = np.zeros(psi.size, np.complex128)
    if free != 0.0:
        out += free * occ.sum(axis=0) * psi
    for q in range(ti.size):
        if tw[q] == 0.0:
            continue
        i, j = ti[q], tj[q]
        out += tw[q] * (_hop_np(psi, occ, cut, stride, i, j)
                        + _hop_np(psi, occ, cut, stride, j, i))
    return out


def _top_population_np(psi, occ, cut):
    p = np.abs(psi) ** 2
    return max(float(p[occ[m] == cut[m] - 1].sum()) for m in range(cut.size))


# --------------------------------------------------------------------------
# numpy composite (fallback path)
# --------------------------------------------------------------------------

def _amplitudes(r_loss, r_abs, form):
    """Prefactors of the noise operators (d, d^dag) for the given form."""
    if form == FORM_STANDARD:
        return math.sqrt(r_loss), math.sqrt(r_abs)
    # swapped variant: d pairs with the absorption rate, d^dag with the loss rate
    return math.sqrt(r_abs), math.sqrt(r_loss)


def _drift_np(psi, occ, cut, stride, ti, tj, tw, free, mech, r_loss, r_abs, form):
    out = -1j * _hamiltonian_np(psi, occ, cut, stride, ti, tj, tw, free)
    if r_loss == 0.0 and r_abs == 0.0:
        return out
    nrm2 = np.vdot(psi, psi).real
    dpsi = _lower_np(psi, occ, cut, stride, mech)
    re_d = np.vdot(psi, dpsi).real / nrm2
    npsi = _number_np(psi, occ, mech)
    if form == FORM_STANDARD:
        # homodyne unraveling: -1/2 (L^dag L - x L + x^2/4), x = <L + L^dag>
        if r_loss > 0.0:
            xl = 2.0 * math.sqrt(r_loss) * re_d
            out += -0.5 * r_loss * npsi + 0.5 * xl * math.sqrt(r_loss) * dpsi \
                - xl * xl / 8.0 * psi
        if r_abs > 0.0:
            upsi = _raise_np(psi, occ, cut, stride, mech)
            xa = 2.0 * math.sqrt(r_abs) * re_d
            out += -0.5 * r_abs * _lower_np(upsi, occ, cut, stride, mech) \
                + 0.5 * xa * math.sqrt(r_abs) * upsi - xa * xa / 8.0 * psi
    else:
        g = r_loss + r_abs
        out += -0.5 * g * npsi - 2.0 * g * 2.0 * re_d * dpsi
    return out


def _diffusion_np(psi, j, occ, cut, stride, mech, r_loss, r_abs, form):
    """Noise coefficient of channel j (0 pairs with d, 1 with d^dag)."""
    amp = _amplitudes(r_loss, r_abs, form)[j]
    if j == 0:
        opsi = _lower_np(psi, occ, cut, stride, mech)
    else:
        opsi = _raise_np(psi, occ, cut, stride, mech)
    if form != FORM_STANDARD:
        return amp * opsi
    nrm2 = np.vdot(psi, psi).real
    # <d^dag> and <d> share the real part
    re_d = (np.vdot(psi, opsi) if j == 0 else np.vdot(opsi, psi)).real / nrm2
    return amp * (opsi - re_d * psi)


def _platen_step_np(psi, occ, cut, stride, ti, tj, tw0, tw1, free, mech,
                    r_loss, r_abs, form, dt, dw0, dw1, v01):
    """Explicit weak order-2.0 step (derivative-free, multi-noise).

    ``tw0``/``tw1`` are the coupling term weights at the start and end of
    the step.  ``v01`` is the two-point (+-dt) variable approximating the
    mixed multiple integral of the two noise channels.
    """
    args = (occ, cut, stride, ti, tj)
    noise_args = (mech, r_loss, r_abs, form)
    a = _drift_np(psi, *args, tw0, free, *noise_args)
    acts = [amp > 0.0 for amp in _amplitudes(r_loss, r_abs, form)]
    dws = (dw0, dw1)
    b = [_diffusion_np(psi, j, occ, cut, stride, *noise_args) if acts[j] else None
         for j in range(2)]
    ybar = psi + a * dt
    for j in range(2):
        if acts[j]:
            ybar = ybar + b[j] * dws[j]
    out = psi + 0.5 * dt * (a + _drift_np(ybar, *args, tw1, free, *noise_args))
    sq = math.sqrt(dt)
    base = psi + a * dt
    for j in range(2):
        if not acts[j]:
            continue
        bj, dwj = b[j], dws[j]
        rp = _diffusion_np(base + bj * sq, j, occ, cut, stride, *noise_args)
        rm = _diffusion_np(base - bj * sq, j, occ, cut, stride, *noise_args)
        out = out + 0.25 * ((rp + rm + 2.0 * bj) * dwj + (rp - rm) * ((dwj * dwj - dt) / sq))
        r = 1 - j
        if acts[r]:
            up = _diffusion_np(psi + b[r] * sq, j, occ, cut, stride, *noise_args)
            um = _diffusion_np(psi - b[r] * sq, j, occ, cut, stride, *noise_args)
            v_rj = v01 if r == 0 else -v01
            out = out + 0.25 * ((up + um - 2.0 * bj) * dwj
                                + (up - um) * ((dwj * dws[r] + v_rj) / sq))
    return out


def _term_weights(omega_row, tch):
    return -0.5 * np.asarray(omega_row)[tch]


def _run_steps_np(psi0, occ, cut, stride, ti, tj, tch, free, mech, r_loss, r_abs,
                  form, omegas, dw, v, dt, rec_steps):
    n_steps = omegas.shape[0] - 1
    n_rec = rec_steps.size
    pops = np.zeros((n_rec, cut.size))
    drift_rec = np.zeros(n_rec)
    top_rec = np.zeros(n_rec)
    psi = psi0.copy()
    max_drift = last_drift = 0.0
    r = 0
    tw0 = _term_weights(omegas[0], tch)
    for s in range(n_steps + 1):
        while r < n_rec and rec_steps[r] == s:
            pops[r] = occ @ (np.abs(psi) ** 2)
            drift_rec[r] = last_drift
            top_rec[r] = _top_population_np(psi, occ, cut)
            r += 1
        if s == n_steps:
            break
        tw1 = _term_weights(omegas[s + 1], tch)
        new = _platen_step_np(psi, occ, cut, stride, ti, tj, tw0, tw1, free, mech,
                              r_loss, r_abs, form, dt, dw[s, 0], dw[s, 1], v[s])
        nrm2 = np.vdot(new, new).real
        if not (NORM_LOW <= nrm2 <= NORM_HIGH) or not math.isfinite(nrm2):
            return psi, STATUS_UNSTABLE, s, pops, drift_rec, max_drift, top_rec
        last_drift = nrm2 - 1.0
        max_drift = max(max_drift, abs(last_drift))
        psi = new / math.sqrt(nrm2)
        tw0 = tw1
    return psi, STATUS_OK, -1, pops, drift_rec, max_drift, top_rec


# --------------------------------------------------------------------------
# numba fused stepper
# --------------------------------------------------------------------------

@njit(cache=True)
def _sqrt_tables(occ, cut):
    """Per-state lookup tables.

    sq_lo[m, k] = sqrt(n+1) below the top level (else 0), sq_up[m, k] =
    sqrt(n), nf = occupations as floats, ntot = total occupation.
    """
    nmode, dim = occ.shape
    sq_lo = np.zeros((nmode, dim))
    sq_up = np.zeros((nmode, dim))
    nf = np.zeros((nmode, dim))
    ntot = np.zeros(dim)
    for m in range(nmode):
        top = cut[m] - 1
        for k in range(dim):
            n = occ[m, k]
            if n < top:
                sq_lo[m, k] = math.sqrt(n + 1.0)
            sq_up[m, k] = math.sqrt(float(n))
            nf[m, k] = n
            ntot[k] += n
    return sq_lo, sq_up, nf, ntot


@njit(cache=True, fastmath=True)
def _re_d(p, lo, s):
    """Re<p|d|p> / <p|p>."""
    nrm = 0.0
    acc = 0.0
    for k in range(p.size):
        pk = p[k]
        nrm += pk.real * pk.real + pk.imag * pk.imag
        f = lo[k]
        if f != 0.0:
            q = p[k + s]
            acc += f * (pk.real * q.real + pk.imag * q.imag)
    return acc / nrm


@njit(cache=True)
def _dissipator_coeffs(r_loss, r_abs, form, re_d):
    """Coefficients (c_n, c_0, c_d, c_u, c_dd) of the dissipative drift.

    The drift reads (c_n n + c_0 + c_dd d d^dag) psi + c_d d psi + c_u d^dag psi,
    where d d^dag is diagonal (n + 1, zero at the top level).
    """
    if form == FORM_STANDARD:
        sl = math.sqrt(r_loss)
        sa = math.sqrt(r_abs)
        xl = 2.0 * sl * re_d
        xa = 2.0 * sa * re_d
        return (-0.5 * r_loss, -(xl * xl + xa * xa) / 8.0, 0.5 * xl * sl,
                0.5 * xa * sa, -0.5 * r_abs)
    g = r_loss + r_abs
    return -0.5 * g, 0.0, -4.0 * g * re_d, 0.0, 0.0


@njit(cache=True, fastmath=True)
def _drift_into(p, ntot, stride, ti, tj, tw, free, sq_lo, sq_up, nm, lo, up, s,
                dissip, c_n, c_0, c_d, c_u, c_dd, out):
    """out = drift at p.

    ``ntot`` is the total occupation per basis state, ``nm``/``lo``/``up``
    the mechanical occupation and ladder factors, ``s`` its stride.
    """
    for k in range(p.size):
        acc = 0j
        if free != 0.0:
            acc += free * ntot[k] * p[k]
        for q in range(ti.size):
            w = tw[q]
            if w == 0.0:
                continue
            i = ti[q]
            jj = tj[q]
            f = sq_up[i, k] * sq_lo[jj, k]
            if f != 0.0:
                acc += w * f * p[k - stride[i] + stride[jj]]
            f = sq_up[jj, k] * sq_lo[i, k]
            if f != 0.0:
                acc += w * f * p[k - stride[jj] + stride[i]]
        val = -1j * acc
        if dissip:
            diag = c_n * nm[k] + c_0
            f = lo[k]
            if f != 0.0:
                diag += c_dd * f * f
                val += c_d * f * p[k + s]
            f = up[k]
            if f != 0.0:
                val += c_u * f * p[k - s]
            val += diag * p[k]
        out[k] = val


@njit(cache=True, fastmath=True)
def _pair_update(x, y, c, j, lo, up, s, amp, form, bj, sign, dwj, cd, out):
    """Add the two support terms built from b_j(x + c y) and b_j(x - c y).

    b_j(P) = amp (O_j P - r(P) P) is linear in P up to the scalar r(P), so
    both evaluations follow from one set of inner products of x and y.
    ``sign`` is +1 for the same-channel term and -1 for the cross term.
    """
    dim = x.size
    rp = 0.0
    rm = 0.0
    if form == FORM_STANDARD:
        xx = 0.0
        yy = 0.0
        xy = 0.0
        dxx = 0.0
        dxy = 0.0
        dyy = 0.0
        for k in range(dim):
            xk = x[k]
            yk = y[k]
            xx += xk.real * xk.real + xk.imag * xk.imag
            yy += yk.real * yk.real + yk.imag * yk.imag
            xy += xk.real * yk.real + xk.imag * yk.imag
            f = lo[k]
            if f != 0.0:
                xs = x[k + s]
                ys = y[k + s]
                dxx += f * (xk.real * xs.real + xk.imag * xs.imag)
                dxy += f * (xk.real * ys.real + xk.imag * ys.imag
                            + yk.real * xs.real + yk.imag * xs.imag)
                dyy += f * (yk.real * ys.real + yk.imag * ys.imag)
        rp = (dxx + c * dxy + c * c * dyy) / (xx + 2.0 * c * xy + c * c * yy)
        rm = (dxx - c * dxy + c * c * dyy) / (xx - 2.0 * c * xy + c * c * yy)
    rs = rp + rm
    rd = rp - rm
    w = 0.25 * dwj
    wd = 0.25 * cd
    for k in range(dim):
        tot = -rs * x[k] - c * rd * y[k]
        dif = -rd * x[k] - c * rs * y[k]
        if j == 0:
            f = lo[k]
            if f != 0.0:
                tot += 2.0 * f * x[k + s]
                dif += 2.0 * c * f * y[k + s]
        else:
            f = up[k]
            if f != 0.0:
                tot += 2.0 * f * x[k - s]
                dif += 2.0 * c * f * y[k - s]
        out[k] += w * (amp * tot + sign * 2.0 * bj[k]) + wd * amp * dif


@njit(cache=True, fastmath=True)
def _platen_into(psi, occ, cut, stride, ti, tj, tw0, tw1, free, mech, r_loss, r_abs,
                 form, dt, dw0, dw1, v01, sq_lo, sq_up, ntot, nmf, buf, out):
    """Fused weak order-2.0 step; ``buf`` is a (5, dim) complex work array."""
    dim = psi.size
    a = buf[0]
    b0 = buf[1]
    b1 = buf[2]
    ybar = buf[3]
    abar = buf[4]
    amp0, amp1 = _amplitudes_nb(r_loss, r_abs, form)
    act0 = amp0 > 0.0
    act1 = amp1 > 0.0
    s = stride[mech]
    lo = sq_lo[mech]
    up = sq_up[mech]
    nm = nmf[mech]
    dissip = act0 or act1
    re_d = _re_d(psi, lo, s) if dissip else 0.0
    r_b = re_d if form == FORM_STANDARD else 0.0
    c_n, c_0, c_d, c_u, c_dd = _dissipator_coeffs(r_loss, r_abs, form, re_d)
    _drift_into(psi, ntot, stride, ti, tj, tw0, free, sq_lo, sq_up, nm, lo, up, s,
                dissip, c_n, c_0, c_d, c_u, c_dd, a)
    for k in range(dim):
        y = psi[k] + dt * a[k]
        if act0:
            dk = lo[k] * psi[k + s] if lo[k] != 0.0 else 0j
            b0[k] = amp0 * (dk - r_b * psi[k])
            y += b0[k] * dw0
        if act1:
            uk = up[k] * psi[k - s] if up[k] != 0.0 else 0j
            b1[k] = amp1 * (uk - r_b * psi[k])
            y += b1[k] * dw1
        ybar[k] = y
    re_bar = _re_d(ybar, lo, s) if dissip else 0.0
    c_n, c_0, c_d, c_u, c_dd = _dissipator_coeffs(r_loss, r_abs, form, re_bar)
    _drift_into(ybar, ntot, stride, ti, tj, tw1, free, sq_lo, sq_up, nm, lo, up, s,
                dissip, c_n, c_0, c_d, c_u, c_dd, abar)
    for k in range(dim):
        out[k] = psi[k] + 0.5 * dt * (a[k] + abar[k])
    if not dissip:
        return
    # ybar is free again: hold the support base psi + a dt
    base = ybar
    for k in range(dim):
        base[k] = psi[k] + dt * a[k]
    sq = math.sqrt(dt)
    if act0:
        _pair_update(base, b0, sq, 0, lo, up, s, amp0, form, b0, 1.0, dw0,
                     (dw0 * dw0 - dt) / sq, out)
        if act1:
            # V_{1,0} = -v01
            _pair_update(psi, b1, sq, 0, lo, up, s, amp0, form, b0, -1.0, dw0,
                         (dw0 * dw1 - v01) / sq, out)
    if act1:
        _pair_update(base, b1, sq, 1, lo, up, s, amp1, form, b1, 1.0, dw1,
                     (dw1 * dw1 - dt) / sq, out)
        if act0:
            _pair_update(psi, b0, sq, 1, lo, up, s, amp1, form, b1, -1.0, dw1,
                         (dw1 * dw0 + v01) / sq, out)


@njit(cache=True)
def _amplitudes_nb(r_loss, r_abs, form):
    if form == FORM_STANDARD:
        return math.sqrt(r_loss), math.sqrt(r_abs)
    return math.sqrt(r_abs), math.sqrt(r_loss)


@njit(cache=True)
def _term_weights_nb(omega_row, tch):
    tw = np.empty(tch.size, np.float64)
    for q in range(tch.size):
        tw[q] = -0.5 * omega_row[tch[q]]
    return tw


@njit(cache=True)
def _platen_step_nb(psi, occ, cut, stride, ti, tj, tw0, tw1, free, mech,
                    r_loss, r_abs, form, dt, dw0, dw1, v01):
    sq_lo, sq_up, nf, ntot = _sqrt_tables(occ, cut)
    buf = np.zeros((5, psi.size), np.complex128)
    out = np.empty(psi.size, np.complex128)
    _platen_into(psi, occ, cut, stride, ti, tj, tw0, tw1, free, mech, r_loss, r_abs,
                 form, dt, dw0, dw1, v01, sq_lo, sq_up, ntot, nf, buf, out)
    return out


@njit(cache=True)
def _run_steps_nb(psi0, occ, cut, stride, ti, tj, tch, free, mech, r_loss, r_abs,
                  form, omegas, dw, v, dt, rec_steps):
    n_steps = omegas.shape[0] - 1
    nmode, dim = occ.shape
    n_rec = rec_steps.size
    pops = np.zeros((n_rec, nmode))
    drift_rec = np.zeros(n_rec)
    top_rec = np.zeros(n_rec)
    sq_lo, sq_up, nf, ntot = _sqrt_tables(occ, cut)
    buf = np.zeros((5, dim), np.complex128)
    psi = psi0.copy()
    new = np.empty(dim, np.complex128)
    max_drift = 0.0
    last_drift = 0.0
    r = 0
    tw0 = _term_weights_nb(omegas[0], tch)
    for s in range(n_steps + 1):
        while r < n_rec and rec_steps[r] == s:
            for m in range(nmode):
                acc = 0.0
                for k in range(dim):
                    acc += occ[m, k] * (psi[k].real ** 2 + psi[k].imag ** 2)
                pops[r, m] = acc
            drift_rec[r] = last_drift
            top_rec[r] = _top_population_nb(psi, occ, cut)
            r += 1
        if s == n_steps:
            break
        tw1 = _term_weights_nb(omegas[s + 1], tch)
        _platen_into(psi, occ, cut, stride, ti, tj, tw0, tw1, free, mech, r_loss, r_abs,
                     form, dt, dw[s, 0], dw[s, 1], v[s], sq_lo, sq_up, ntot, nf, buf, new)
        nrm2 = 0.0
        for k in range(dim):
            nrm2 += new[k].real ** 2 + new[k].imag ** 2
        if not (NORM_LOW <= nrm2 <= NORM_HIGH) or not math.isfinite(nrm2):
            return psi, STATUS_UNSTABLE, s, pops, drift_rec, max_drift, top_rec
        last_drift = nrm2 - 1.0
        if abs(last_drift) > max_drift:
            max_drift = abs(last_drift)
        inv = 1.0 / math.sqrt(nrm2)
        for k in range(dim):
            psi[k] = new[k] * inv
        tw0 = tw1
    return psi, STATUS_OK, -1, pops, drift_rec, max_drift, top_rec


if USE_NUMBA:
    lower = _lower_nb
    raise_ = _raise_nb
    number = _number_nb
    hamiltonian = _hamiltonian_nb
    top_population = _top_population_nb
    platen_step = _platen_step_nb
    run_steps = _run_steps_nb
    term_weights = _term_weights_nb
else:
    lower = _lower_np
    raise_ = _raise_np
    number = _number_np
    hamiltonian = _hamiltonian_np
    top_population = _top_population_np
    platen_step = _platen_step_np
    run_steps = _run_steps_np
    term_weights = _term_weights
