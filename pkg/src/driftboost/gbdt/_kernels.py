"""Hot loops of tree growing and prediction.

Each kernel has a numba implementation (``*_nb``) and a numpy twin
(``*_np``). The public names point at one or the other depending on
``DRIFTBOOST_DISABLE_NUMBA``. Both variants accumulate in row order, so they
agree bit for bit; tests check this.

Binned data is feature-major: ``binned[f, i]`` is the bin of row ``i`` on
feature ``f``.
"""
import numpy as np

from .._accel import USE_NUMBA, njit, prange


# --- histograms -----------------------------------------------------------

@njit(parallel=True)
def build_histograms_nb(binned, node_of_row, grad, hess, n_nodes, n_bins):
    """hist[node, feature, bin] = (sum grad, sum hess); rows with node -1 skipped."""
    n_features, n_rows = binned.shape
    hist = np.zeros((n_nodes, n_features, n_bins, 2))
    # one feature per task; the row loop stays sequential so sums are ordered
    for f in prange(n_features):
        col = binned[f]
        for i in range(n_rows):
            node = node_of_row[i]
            if node < 0:
                continue
            b = col[i]
            hist[node, f, b, 0] += grad[i]
            hist[node, f, b, 1] += hess[i]
    return hist


def build_histograms_np(binned, node_of_row, grad, hess, n_nodes, n_bins):
    n_features = binned.shape[0]
    hist = np.zeros((n_nodes, n_features, n_bins, 2))
    live = node_of_row >= 0
    node = node_of_row[live].astype(np.int64) * n_bins
    g = grad[live]
    h = hess[live]
    size = n_nodes * n_bins
    for f in range(n_features):
        key = node + binned[f, live]
        hist[:, f, :, 0] = np.bincount(key, weights=g, minlength=size).reshape(n_nodes, n_bins)
        hist[:, f, :, 1] = np.bincount(key, weights=h, minlength=size).reshape(n_nodes, n_bins)
    return hist


# --- node bookkeeping -----------------------------------------------------

@njit
def node_totals_nb(slot, grad, hess, n_slots):
    g = np.zeros(n_slots)
    h = np.zeros(n_slots)
    c = np.zeros(n_slots, dtype=np.int64)
    for i in range(slot.shape[0]):
        k = slot[i]
        if k >= 0:
            g[k] += grad[i]
            h[k] += hess[i]
            c[k] += 1
    return g, h, c


def node_totals_np(slot, grad, hess, n_slots):
    live = slot >= 0
    s = slot[live]
    return (np.bincount(s, weights=grad[live], minlength=n_slots),
            np.bincount(s, weights=hess[live], minlength=n_slots),
            np.bincount(s, minlength=n_slots).astype(np.int64))


@njit
def route_rows_nb(binned, slot, split_f, split_t, next_slot):
    """Move every row to its child slot on the next level (in place)."""
    for i in range(slot.shape[0]):
        k = slot[i]
        if k < 0:
            continue
        f = split_f[k]
        if f < 0:
            slot[i] = -1
        elif binned[f, i] <= split_t[k]:
            slot[i] = next_slot[2 * k]
        else:
            slot[i] = next_slot[2 * k + 1]


def route_rows_np(binned, slot, split_f, split_t, next_slot):
    rows = np.flatnonzero(slot >= 0)
    k = slot[rows]
    f = split_f[k]
    moving = f >= 0
    new = np.full(rows.size, -1, dtype=slot.dtype)
    rm, km = rows[moving], k[moving]
    right = (binned[f[moving], rm] > split_t[km]).astype(np.int64)
    new[moving] = next_slot[2 * km + right]
    slot[rows] = new


# --- split scan -----------------------------------------------------------

@njit
def _soft(g, alpha):
    if g > alpha:
        return g - alpha
    if g < -alpha:
        return g + alpha
    return 0.0


@njit
def _score(g, h, lam, alpha):
    t = _soft(g, alpha)
    if t == 0.0:
        return 0.0
    return t * t / (h + lam)


@njit
def find_best_split_nb(hist, n_bins, g_total, h_total, lam, alpha,
                       min_gain, min_child_hess):
    parent = _score(g_total, h_total, lam, alpha)
    best_f = -1
    best_t = -1
    best_gain = 0.0
    for f in range(hist.shape[0]):
        gl = 0.0
        hl = 0.0
        for t in range(n_bins[f] - 1):
            gl += hist[f, t, 0]
            hl += hist[f, t, 1]
            gr = g_total - gl
            hr = h_total - hl
            if hl <= 0.0 or hr <= 0.0 or hl < min_child_hess or hr < min_child_hess:
                continue
            gain = 0.5 * (_score(gl, hl, lam, alpha) + _score(gr, hr, lam, alpha) - parent)
            if gain > best_gain and gain >= min_gain:
                best_gain = gain
                best_f = f
                best_t = t
    return best_f, best_t, best_gain


def _score_np(g, h, lam, alpha):
    t = np.sign(g) * np.maximum(np.abs(g) - alpha, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = t * t / (h + lam)
    return np.where(t == 0.0, 0.0, out)


def find_best_split_np(hist, n_bins, g_total, h_total, lam, alpha,
                       min_gain, min_child_hess):
    n_features, width, _ = hist.shape
    if width < 2:
        return -1, -1, 0.0
    gl = np.cumsum(hist[:, :-1, 0], axis=1)
    hl = np.cumsum(hist[:, :-1, 1], axis=1)
    gr = g_total - gl
    hr = h_total - hl
    parent = _score_np(np.float64(g_total), np.float64(h_total), lam, alpha)
    gain = 0.5 * (_score_np(gl, hl, lam, alpha) + _score_np(gr, hr, lam, alpha) - parent)
    ok = (hl > 0.0) & (hr > 0.0) & (hl >= min_child_hess) & (hr >= min_child_hess)
    ok &= np.arange(width - 1)[None, :] < (np.asarray(n_bins)[:, None] - 1)
    ok &= (gain > 0.0) & (gain >= min_gain)
    if not ok.any():
        return -1, -1, 0.0
    masked = np.where(ok, gain, -np.inf)
    # argmax returns the first maximum in (feature, threshold) order
    flat = int(np.argmax(masked))
    f, t = divmod(flat, width - 1)
    return f, t, float(masked[f, t])


# --- prediction -----------------------------------------------------------

@njit
def predict_binned_nb(binned, feature, threshold, left, right, value):
    n = binned.shape[1]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if binned[feature[node], i] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def predict_binned_np(binned, feature, threshold, left, right, value):
    n = binned.shape[1]
    node = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        cur = node[active]
        f = feature[cur]
        internal = f >= 0
        active, cur, f = active[internal], cur[internal], f[internal]
        go_left = binned[f, active] <= threshold[cur]
        node[active] = np.where(go_left, left[cur], right[cur])
    return value[node].astype(np.float64)


if USE_NUMBA:
    build_histograms = build_histograms_nb
    node_totals = node_totals_nb
    route_rows = route_rows_nb
    find_best_split = find_best_split_nb
    predict_binned = predict_binned_nb
else:
    build_histograms = build_histograms_np
    node_totals = node_totals_np
    route_rows = route_rows_np
    find_best_split = find_best_split_np
    predict_binned = predict_binned_np

BACKEND = "numba" if USE_NUMBA else "numpy"
