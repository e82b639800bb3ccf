"""Partial-wave engine for radially symmetric potentials.

For radial V the operator V R0(eta^2) block-diagonalizes over spherical
harmonics: the free resolvent kernel expands as

    R0(eta)(x, y) = sum_l (2l+1)/(4 pi) g_l(eta; r_<, r_>) P_l(xhat . yhat),

    g_l = i eta j_l(eta r_<) h^(1)_l(eta r_>)          (eta real or complex)
        = (2/pi) kappa i_l(kappa r_<) k_l(kappa r_>)   (eta = i kappa)
        = r_<^l / r_>^{l+1} / (2l+1)                   (eta = 0),

so each channel reduces to a one-dimensional integral operator on [0, R].
Channels are discretized on Gauss-Legendre radial nodes with product
integration: row i integrates g_l(r_i, rho) rho^2 against the Lagrange
interpolant of the solution, with the quadrature split at rho = r_i where the
kernel has a kink.  This is spectrally accurate in angle (exact per channel)
and high-order in radius, which is what makes tight eigenvalue tolerances
reachable at tiny matrix sizes (n_r x n_r per channel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import spherical_in, spherical_jn, spherical_kn, spherical_yn

from .errors import NearSingularSolve, TrackingLost

#: default number of channels for spectral-parameter-independent operations
L_MAX_SPECTRAL = 12
#: extra channels beyond eta * R for resolvent evaluations
L_MARGIN = 16
L_HARD_CAP = 80


def channel_count(eta, radius, l_max=None):
    """Number of partial waves retained at spectral parameter eta."""
    if l_max is not None:
        return l_max
    mag = abs(complex(eta))
    return min(int(math.ceil(mag * radius)) + L_MARGIN, L_HARD_CAP)


def g_l(l, eta, r_small, r_big):
    """Channel radial kernel of the free resolvent (see module docstring).

    r_small <= r_big elementwise; eta is a scalar (0, real, or i*kappa).
    """
    eta = complex(eta)
    if eta == 0:
        return (np.asarray(r_small) ** l
                / np.asarray(r_big) ** (l + 1) / (2 * l + 1))
    if abs(eta.real) < 1e-300:  # eta = i kappa, kappa > 0
        k = eta.imag
        return (2.0 / math.pi) * k * spherical_in(l, k * np.asarray(r_small)) \
            * spherical_kn(l, k * np.asarray(r_big))
    if abs(eta.imag) < 1e-300:
        e = eta.real
        zs = np.abs(e) * np.asarray(r_small)
        zb = np.abs(e) * np.asarray(r_big)
        with np.errstate(over="ignore", invalid="ignore"):
            js = spherical_jn(l, zs)
            val = 1j * abs(e) * js * (
                spherical_jn(l, zb) + 1j * spherical_yn(l, zb))
            # j_l underflow paired with y_l overflow: the true product is
            # below double precision, so zero is the right answer
            val = np.where(np.isfinite(val), val, 0.0)
            val = np.where(js == 0.0, 0.0, val)
        # eta -> -eta conjugates the kernel (boundary value from below)
        return val if e > 0 else np.conj(val)
    raise ValueError("eta must be 0, real, or purely imaginary")


def spherical_table(l_max, z):
    """j_l(z) and y_l(z) for all l = 0..l_max at once, vectorized over z > 0.

    y is computed by the (stable) upward recurrence, clipped near overflow;
    j by Miller's downward recurrence with renormalization against j_0/j_1,
    switching to the upward recurrence where z is large enough for it to be
    stable (l < z throughout).  Cost is O(l_max * len(z)), independent of
    how many orders are requested downstream.
    """
    z = np.asarray(z, dtype=float)
    shape = z.shape
    z = z.ravel()
    L = int(l_max)
    inv = 1.0 / z
    sz, cz = np.sin(z), np.cos(z)
    y = np.empty((L + 1, z.size))
    y[0] = -cz * inv
    if L >= 1:
        y[1] = (-cz * inv - sz) * inv
    # overflow in the decay regime saturates to -inf (all terms share a sign
    # there) or propagates as nan; downstream products mask non-finite values,
    # and the j-partner underflows at exactly those orders
    with np.errstate(over="ignore", invalid="ignore"):
        for l in range(1, L):
            y[l + 1] = (2 * l + 1) * inv * y[l] - y[l - 1]
    j = np.empty((L + 1, z.size))
    j[0] = sz * inv
    if L == 0:
        return j.reshape((1,) + shape), y.reshape((1,) + shape)
    j[1] = (sz * inv - cz) * inv
    up = z >= L + 5.0  # upward recurrence is stable when l < z throughout
    if np.any(up):
        zi = inv[up]
        for l in range(1, L):
            j[l + 1, up] = (2 * l + 1) * zi * j[l, up] - j[l - 1, up]
    down = ~up
    if np.any(down):
        zi = inv[down]
        n_start = L + 40 + int(math.sqrt(40.0 * L))
        stored = np.zeros((L + 1, zi.size))
        counts = np.zeros((L + 1, zi.size))
        jp = np.zeros(zi.size)
        jc = np.full(zi.size, 1e-30)
        count = np.zeros(zi.size)
        for n in range(n_start, 0, -1):
            jm = (2 * n + 1) * zi * jc - jp
            jp, jc = jc, jm
            # rescale check every 4th step: per-step growth stays well below
            # 1e50 for the z range reachable here, so 1e200 cannot overflow
            if n % 4 == 0 or n - 1 <= L:
                big = np.abs(jc) > 1e200
                if np.any(big):
                    jc[big] *= 1e-250
                    jp[big] *= 1e-250
                    count[big] += 1
            if n - 1 <= L:
                stored[n - 1] = jc
                counts[n - 1] = count
        use0 = np.abs(stored[0]) >= np.abs(stored[1])
        sel_true = np.where(use0, sz[down] * zi, (sz[down] * zi - cz[down]) * zi)
        sel_val = np.where(use0, stored[0], stored[1])
        sel_cnt = np.where(use0, counts[0], counts[1])
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            ratio = sel_true / sel_val
            scale = np.power(1e-250, sel_cnt[None, :] - counts)
            vals = stored * ratio[None, :] * scale
        j[:, down] = np.where(np.isfinite(vals), vals, 0.0)
    return j.reshape((L + 1,) + shape), y.reshape((L + 1,) + shape)


def legendre_p_table(l_max, x):
    """P_l(x) for l = 0..l_max via the three-term recurrence; shape
    (l_max+1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    out = np.empty((l_max + 1,) + x.shape)
    out[0] = 1.0
    if l_max >= 1:
        out[1] = x
    for l in range(1, l_max):
        out[l + 1] = ((2 * l + 1) * x * out[l] - l * out[l - 1]) / (l + 1)
    return out


def _bary_weights(nodes):
    n = len(nodes)
    bw = np.ones(n)
    for j in range(n):
        bw[j] = 1.0 / np.prod(nodes[j] - np.delete(nodes, j))
    return bw


def _lagrange_matrix(nodes, bw, x):
    """L[q, j] = j-th Lagrange basis polynomial at x[q]."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    diff = x[:, None] - nodes[None, :]
    hit = np.isclose(diff, 0.0, atol=1e-300)
    diff = np.where(hit, 1.0, diff)
    w = bw[None, :] / diff
    out = w / np.sum(w, axis=1)[:, None]
    rows_hit = np.any(hit, axis=1)
    out[rows_hit] = hit[rows_hit].astype(float)
    return out


class ChannelEngine:
    """Per-channel discretization of V R0 for a radial potential."""

    def __init__(self, v_of_r, radius, n_r=24, n_fine=24):
        self.radius = float(radius)
        self.n_r = int(n_r)
        xg, wg = np.polynomial.legendre.leggauss(self.n_r)
        self.r = 0.5 * self.radius * (xg + 1.0)
        self.wr = 0.5 * self.radius * wg  # without r^2 jacobian
        self.vr = np.asarray(v_of_r(self.r), dtype=float)
        self._bw = _bary_weights(self.r)
        # per-row fine quadrature: inner panel [0, r_i], outer panel [r_i, R]
        xf, wf = np.polynomial.legendre.leggauss(n_fine)
        n = self.n_r
        self.fine_nodes = np.empty((n, 2 * n_fine))
        self.fine_weights = np.empty((n, 2 * n_fine))
        for i, ri in enumerate(self.r):
            self.fine_nodes[i, :n_fine] = 0.5 * ri * (xf + 1.0)
            self.fine_weights[i, :n_fine] = 0.5 * ri * wf
            self.fine_nodes[i, n_fine:] = 0.5 * (self.radius - ri) * (xf + 1.0) + ri
            self.fine_weights[i, n_fine:] = 0.5 * (self.radius - ri) * wf
        self.n_fine = n_fine
        # Lagrange interpolation matrices fine -> nodes, per row
        self.lag = np.empty((n, 2 * n_fine, n))
        for i in range(n):
            self.lag[i] = _lagrange_matrix(self.r, self._bw, self.fine_nodes[i])
        self._fine_rule = (xf, wf)
        self._m_cache = {}
        self._lu_cache = {}
        self._row_geom_cache = {}
        self._ws_cache = {}
        self._rad_tab_cache = {}
        self._mall_cache = {}
        self._luall_cache = {}
        self._rowsall_cache = {}
        self._gnall_cache = {}

    def clear_eta(self, e):
        """Drop the per-eta workspaces and factorizations (the tables for a
        swept spectral node are never revisited; without eviction a long
        quadrature sweep accumulates gigabytes)."""
        a = abs(float(e))
        self._ws_cache.pop(a, None)
        self._mall_cache.pop(a, None)
        self._luall_cache.pop(a, None)
        for cache in (self._rad_tab_cache, self._rowsall_cache,
                      self._gnall_cache):
            for key in [k for k in cache if k[0] == a]:
                del cache[key]
        for cache in (self._m_cache, self._lu_cache):
            for key in [k for k in cache
                        if abs(k[1].real) == a and k[1].imag == 0.0]:
                del cache[key]

    # -- per-eta Bessel workspaces (real eta fast path) ---------------------

    def _workspace(self, e, lmin):
        """j/y tables at |e| * (fine nodes, radial nodes), all orders up to
        at least lmin; cached per eta and grown on demand."""
        key = float(abs(e))
        ws = self._ws_cache.get(key)
        if ws is None or ws["L"] < lmin:
            # first build: pad to the per-l callers' typical ceiling so
            # incremental l loops do not rebuild; growth beyond that is exact
            floor = min(int(key * self.radius) + 24, 88) if ws is None else 0
            L = max(lmin + 8, floor)
            jf, yf = spherical_table(L, key * self.fine_nodes)
            jr, yr = spherical_table(L, key * self.r)
            ws = {"L": L, "jf": jf, "yf": yf, "jr": jr, "yr": yr}
            self._ws_cache[key] = ws
        return ws

    def m_all(self, e, l_max):
        """Product-integration matrices for channels 0..l_max at real eta,
        vectorized over the channel index; shape (l_max+1, n_r, n_r)."""
        a = abs(float(e))
        hit = self._mall_cache.get(a)
        if hit is not None and hit.shape[0] >= l_max + 1:
            return hit[:l_max + 1]
        ws = self._workspace(a, l_max)
        L = l_max
        nf = self.n_fine
        jf, yf = ws["jf"][:L + 1], ws["yf"][:L + 1]
        jr, yr = ws["jr"][:L + 1], ws["yr"][:L + 1]
        g_in = self._combine(a, jf[:, :, :nf], jr[:, :, None], yr[:, :, None])
        g_out = self._combine(a, jr[:, :, None], jf[:, :, nf:], yf[:, :, nf:])
        g = np.concatenate([g_in, g_out], axis=2)
        integ = g * (self.fine_weights * self.fine_nodes**2)[None, :, :]
        # batched over the row index i: m[l, i, :] = integ[l, i, :] @ lag[i]
        m = np.ascontiguousarray(
            np.matmul(integ.transpose(1, 0, 2), self.lag).transpose(1, 0, 2))
        self._mall_cache[a] = m
        return m

    def lu_all(self, e, l_max):
        """LU factors of I + A_l for channels 0..l_max at real eta."""
        from scipy.linalg import lu_factor
        a = abs(float(e))
        lus = self._luall_cache.setdefault(a, [])
        if len(lus) < l_max + 1:
            m = self.m_all(a, l_max)
            eye = np.eye(self.n_r)
            for l in range(len(lus), l_max + 1):
                lus.append(lu_factor(eye + self.vr[:, None] * m[l]))
        return lus

    def rows_all(self, e, l_max, rv):
        """Product-integration rows at radius rv for channels 0..l_max at
        real eta; shape (l_max+1, n_r)."""
        a = abs(float(e))
        key = (a, float(rv))
        hit = self._rowsall_cache.get(key)
        if hit is not None and hit.shape[0] >= l_max + 1:
            return hit[:l_max + 1]
        ws = self._workspace(a, l_max)
        tab = self._radius_tab(a, float(rv), l_max)
        Lt = min(ws["L"], tab["L"])
        if rv >= self.radius:
            g = self._combine(a, ws["jr"][:Lt + 1],
                              tab["j"][:Lt + 1, -1:], tab["y"][:Lt + 1, -1:])
            out = g * (self.wr * self.r**2)[None, :]
        else:
            nfr = len(self._fine_rule[0])
            n_in, w_in, n_out, w_out, lag = self._row_geom(float(rv))
            g_in = self._combine(a, tab["j"][:Lt + 1, :nfr],
                                 tab["j"][:Lt + 1, -1:], tab["y"][:Lt + 1, -1:])
            g_out = self._combine(a, tab["j"][:Lt + 1, -1:],
                                  tab["j"][:Lt + 1, nfr:-1],
                                  tab["y"][:Lt + 1, nfr:-1])
            integ = np.concatenate([g_in * (w_in * n_in**2)[None, :],
                                    g_out * (w_out * n_out**2)[None, :]],
                                   axis=1)
            out = integ @ lag
        self._rowsall_cache[key] = out
        return out[:l_max + 1]

    def g_nodes_all(self, e, l_max, rv):
        """g_l between the radial nodes and scalar rv, channels 0..l_max at
        real eta; shape (l_max+1, n_r)."""
        a = abs(float(e))
        key = (a, float(rv))
        hit = self._gnall_cache.get(key)
        if hit is not None and hit.shape[0] >= l_max + 1:
            return hit[:l_max + 1]
        ws = self._workspace(a, l_max)
        tab = self._radius_tab(a, float(rv), l_max)
        Lt = min(ws["L"], tab["L"])
        jsc = tab["j"][:Lt + 1, -1:]
        ysc = tab["y"][:Lt + 1, -1:]
        jr, yr = ws["jr"][:Lt + 1], ws["yr"][:Lt + 1]
        below = (self.r <= rv)[None, :]
        out = np.where(below, self._combine(a, jr, jsc, ysc),
                       self._combine(a, jsc, jr, yr))
        self._gnall_cache[key] = out
        return out[:l_max + 1]

    def _radius_pts(self, rv):
        if rv < self.radius:
            n_in, _, n_out, _, _ = self._row_geom(float(rv))
            return np.concatenate([n_in, n_out, [rv]])
        return np.array([rv])

    def _radius_tab(self, e, rv, lmin):
        """j/y tables at |e| * (row fine nodes of rv, and rv itself)."""
        key = (float(abs(e)), float(rv))
        tab = self._rad_tab_cache.get(key)
        if tab is None or tab["L"] < lmin:
            L = lmin + 8
            jt, yt = spherical_table(L, abs(e) * self._radius_pts(float(rv)))
            tab = {"L": L, "j": jt, "y": yt}
            self._rad_tab_cache[key] = tab
        return tab

    def prime_radii(self, e, l_max, radii):
        """Build the radius tables for many radii in one Bessel sweep (one
        recurrence pass instead of one per radius)."""
        a = abs(float(e))
        todo, blocks = [], []
        for rv in radii:
            rv = float(rv)
            tab = self._rad_tab_cache.get((a, rv))
            if tab is None or tab["L"] < l_max:
                pts = self._radius_pts(rv)
                todo.append((rv, len(pts)))
                blocks.append(pts)
        if not todo:
            return
        L = l_max + 8
        jt, yt = spherical_table(L, a * np.concatenate(blocks))
        off = 0
        for rv, width in todo:
            self._rad_tab_cache[(a, rv)] = {
                "L": L, "j": jt[:, off:off + width], "y": yt[:, off:off + width]}
            off += width

    @staticmethod
    def _combine(e, js, jb, yb):
        """i|e| j_l(|e| r_<) h_l(|e| r_>) with under/overflow masking;
        conjugated for e < 0."""
        with np.errstate(over="ignore", invalid="ignore"):
            val = 1j * abs(e) * js * (jb + 1j * yb)
            val = np.where(np.isfinite(val), val, 0.0)
            val = np.where(js == 0.0, 0.0, val)
        return val if e > 0 else np.conj(val)

    # -- matrices -----------------------------------------------------------

    def m_matrix(self, l, eta):
        """Product-integration matrix for int_0^R g_l(r_i, rho) f(rho) rho^2."""
        key = (l, complex(eta))
        hit = self._m_cache.get(key)
        if hit is not None:
            return hit
        nf = self.n_fine
        e = complex(eta)
        if e.real != 0 and abs(e.imag) < 1e-300:
            ws = self._workspace(e.real, l)
            g_in = self._combine(e.real, ws["jf"][l][:, :nf],
                                 ws["jr"][l][:, None], ws["yr"][l][:, None])
            g_out = self._combine(e.real, ws["jr"][l][:, None],
                                  ws["jf"][l][:, nf:], ws["yf"][l][:, nf:])
        else:
            inner = self.fine_nodes[:, :nf]
            outer = self.fine_nodes[:, nf:]
            g_in = g_l(l, eta, inner, self.r[:, None])   # rho < r_i
            g_out = g_l(l, eta, self.r[:, None], outer)  # rho > r_i
        g = np.concatenate([g_in, g_out], axis=1)
        integ = g * self.fine_weights * self.fine_nodes**2
        m = np.einsum("iq,iqj->ij", integ, self.lag)
        self._m_cache[key] = m
        return m

    def a_matrix(self, l, eta):
        """Channel block of V R0(eta): diag(V(r_i)) @ m_matrix."""
        return self.vr[:, None] * self.m_matrix(l, eta)

    def _row_geom(self, rv):
        """Split fine quadrature and Lagrange matrix for an interior radius
        (eta-independent, cached)."""
        geom = self._row_geom_cache.get(rv)
        if geom is None:
            xf, wf = self._fine_rule
            n_in = 0.5 * rv * (xf + 1.0)
            w_in = 0.5 * rv * wf
            n_out = 0.5 * (self.radius - rv) * (xf + 1.0) + rv
            w_out = 0.5 * (self.radius - rv) * wf
            lag = np.vstack([_lagrange_matrix(self.r, self._bw, n_in),
                             _lagrange_matrix(self.r, self._bw, n_out)])
            geom = (n_in, w_in, n_out, w_out, lag)
            self._row_geom_cache[rv] = geom
        return geom

    def rows(self, l, eta, radii):
        """Product-integration row vectors at arbitrary radii (for kernel
        evaluation off the node set); shape (len(radii), n_r)."""
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        out = np.empty((len(radii), self.n_r),
                       dtype=complex if complex(eta).real else float)
        e = complex(eta)
        fast = e.real != 0 and abs(e.imag) < 1e-300
        nfr = 0 if not fast else len(self._fine_rule[0])
        for k, rv in enumerate(radii):
            if rv >= self.radius:
                if fast:
                    ws = self._workspace(e.real, l)
                    tab = self._radius_tab(e.real, rv, l)
                    g = self._combine(e.real, ws["jr"][l],
                                      tab["j"][l, -1], tab["y"][l, -1])
                else:
                    g = g_l(l, eta, self.r, rv)
                out[k] = g * self.wr * self.r**2
            else:
                n_in, w_in, n_out, w_out, lag = self._row_geom(float(rv))
                if fast:
                    tab = self._radius_tab(e.real, rv, l)
                    g_in = self._combine(e.real, tab["j"][l, :nfr],
                                         tab["j"][l, -1], tab["y"][l, -1])
                    g_out = self._combine(e.real, tab["j"][l, -1],
                                          tab["j"][l, nfr:-1],
                                          tab["y"][l, nfr:-1])
                else:
                    g_in = g_l(l, eta, n_in, rv)
                    g_out = g_l(l, eta, rv, n_out)
                out[k] = np.concatenate(
                    [g_in * w_in * n_in**2, g_out * w_out * n_out**2]) @ lag
        return out

    def g_nodes(self, l, eta, rv):
        """g_l between the radial nodes and the scalar radius rv."""
        e = complex(eta)
        if e.real != 0 and abs(e.imag) < 1e-300:
            ws = self._workspace(e.real, l)
            tab = self._radius_tab(e.real, float(rv), l)
            below = self.r <= rv
            jsc, ysc = tab["j"][l, -1], tab["y"][l, -1]
            jr, yr = ws["jr"][l], ws["yr"][l]
            return np.where(below,
                            self._combine(e.real, jr, jsc, ysc),
                            self._combine(e.real, jsc, jr, yr))
        return g_l(l, eta, np.minimum(self.r, rv), np.maximum(self.r, rv))

    # -- spectral quantities ------------------------------------------------

    def eigvals(self, l, eta):
        return np.linalg.eigvals(self.a_matrix(l, eta))

    def real_eigvals(self, l, eta, imag_tol=1e-8):
        mu = self.eigvals(l, eta)
        keep = np.abs(mu.imag) <= imag_tol * np.maximum(np.abs(mu.real), 1.0)
        return np.sort(mu[keep].real)

    def mu_list(self, eta, l_max=L_MAX_SPECTRAL):
        """Real channel eigenvalues as (mu, l) pairs (one entry per channel,
        not per degenerate copy)."""
        out = []
        for l in range(l_max + 1):
            for mu in self.real_eigvals(l, eta):
                out.append((float(mu), l))
        return sorted(out, key=lambda t: t[0])

    def count_below(self, eta, threshold=-1.0, l_max=L_MAX_SPECTRAL):
        """Number of channel eigenvalues <= threshold, counted with the
        (2l+1) degeneracy."""
        total = 0
        for l in range(l_max + 1):
            vals = self.real_eigvals(l, eta)
            total += (2 * l + 1) * int(np.sum(vals <= threshold))
        return total

    def _weighted(self, mat):
        """Similarity transform to the L^2(r^2 dr) orthonormal frame."""
        s = np.sqrt(self.wr * self.r**2)
        return mat * (s[:, None] / s[None, :])

    def sigma_min(self, eta, l_max=None):
        """min over channels of the smallest singular value of I + V R0."""
        lmax = channel_count(eta, self.radius, l_max)
        best = np.inf
        for l in range(lmax + 1):
            m = np.eye(self.n_r) + self._weighted(self.a_matrix(l, eta))
            sv = np.linalg.svd(m, compute_uv=False)[-1]
            best = min(best, float(sv))
            if l > 2 and float(sv) > 0.9 and best < 0.5:
                break
        return best

    def solve(self, l, eta, rhs):
        """(I + A_l(eta))^{-1} rhs with an LU cache per (l, eta)."""
        from scipy.linalg import lu_factor, lu_solve
        key = (l, complex(eta))
        lu = self._lu_cache.get(key)
        if lu is None:
            mat = np.eye(self.n_r) + self.a_matrix(l, eta)
            try:
                lu = lu_factor(mat)
            except np.linalg.LinAlgError as exc:  # pragma: no cover
                raise NearSingularSolve(str(exc)) from exc
            self._lu_cache[key] = lu
        return lu_solve(lu, rhs)

    # -- bound states -------------------------------------------------------

    def channel_crossings(self, l, kappa_max, kappa_tol=1e-8, n_scan=48):
        """kappa values where a channel-l eigenvalue of V R0(-kappa^2)
        crosses -1, by bisection on the integer count (monotone for wells)."""
        kmin = 1e-6

        def count(kap):
            return int(np.sum(self.real_eigvals(l, 1j * kap) <= -1.0))

        grid = np.linspace(kmin, kappa_max, n_scan)
        counts = [count(k) for k in grid]
        crossings = []
        for a, b, ca, cb in zip(grid[:-1], grid[1:], counts[:-1], counts[1:]):
            if ca == cb:
                continue
            for step in range(ca - cb):
                lo, hi, clo = a, b, ca - step
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    if count(mid) >= clo:
                        lo = mid
                    else:
                        hi = mid
                    if hi - lo < kappa_tol:
                        break
                else:
                    raise TrackingLost(
                        f"bisection failed to converge in channel {l}")
                crossings.append(0.5 * (lo + hi))
        return sorted(crossings)

    def channel_state(self, l, kappa):
        """Radial eigenfunction data at the crossing kappa.

        Returns (u_nodes, c_out) where u solves u = -int g_l V u rho^2 on the
        nodes (normalized later) and the exterior continuation is
        psi(r) = c_out * g_tail(r) with g_tail(r) = k_l(kappa r) type decay.
        """
        a = self.a_matrix(l, 1j * kappa)
        mu, vecs = np.linalg.eig(a)
        idx = int(np.argmin(np.abs(mu + 1.0)))
        f = vecs[:, idx].real  # f = V psi on the nodes (real matrix)
        # psi on the nodes: psi = -R0 f
        psi = -(self.m_matrix(l, 1j * kappa) @ f)
        # exterior: psi(r) = -(2/pi) kappa k_l(kappa r) * int i_l(kappa rho)
        #                    f rho^2 drho =: c_out * k_l(kappa r)
        c_out = -(2.0 / math.pi) * kappa * float(
            np.sum(spherical_in(l, kappa * self.r) * f * self.wr * self.r**2))
        return psi, c_out, float(np.abs(mu[idx] + 1.0))

    def norm_squared(self, l, kappa, psi_nodes, c_out, decay_lengths=40.0):
        """L^2(R^3) norm^2 of psi(r) Y_lm: interior node quadrature plus the
        exact-tail integral |c_out|^2 int_R^inf k_l(kappa r)^2 r^2 dr."""
        interior = float(np.sum(np.abs(psi_nodes) ** 2 * self.wr * self.r**2))
        top = self.radius + decay_lengths / max(kappa, 1e-8)
        xg, wg = np.polynomial.legendre.leggauss(64)
        t = 0.5 * (top - self.radius) * (xg + 1.0) + self.radius
        wt = 0.5 * (top - self.radius) * wg
        tail = float(np.sum(spherical_kn(l, kappa * t) ** 2 * t**2 * wt))
        return interior + c_out**2 * tail
