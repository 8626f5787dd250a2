"""Sample-parallel Monte Carlo kernels.

Every kernel simulates one block of independent samples with numpy array
operations per orbit step (lanes = samples), consuming a dedicated
Generator.  ``run_blocked`` slices a run into fixed-size blocks, gives
block i the substream keyed by (seed, labels..., i), executes blocks on a
thread pool, and concatenates results in block order — so outputs are
bit-identical for any thread count.

The expanding digit systems (tent/doubling) are simulated exactly on an
implicit infinite digit stream: the state per lane is a sliding 53-bit
window of upcoming digits, stored as a float in [0, 1).  One step doubles
the window mod 1 (an exact float operation on the 2^-53 grid) and shifts
in one fresh digit at the bottom.  The value of the j-th doubling iterate
is the window itself; the j-th tent iterate is the window or its ones'
complement according to the digit just left of it.  Direct float64
iteration of these maps would collapse onto dyadics within 53 steps; the
window never does, at the price of truncating each reported position to
53 bits (positions are only ever compared against thresholds, so the
2^-53 truncation is far below every statistical tolerance).

Cylinder events need no positions at all: a depth-d cylinder membership
test is a rolling d-letter register compared against the target word,
bit-exact at every step.  Letters are the digits themselves for the
doubling map and adjacent-digit XORs for the tent map.

Rotations advance 63-bit integer positions (exact), and the intermittent
map steps float64 lanes with the same update as the scalar reference.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import DomainError
from .rng import block_slices, substream
from .systems import FIXED_ONE

WINDOW = 53
_SCALE = 2.0 ** -WINDOW
_TOP = 1.0 - 2.0 ** -WINDOW
_POWERS = 2.0 ** -(np.arange(1, WINDOW + 1, dtype=np.float64))

#: fraction of finished lanes that triggers an active-set compaction
_COMPACT_AT = 0.25


def run_blocked(n_samples, master_seed, labels, kernel, threads=1):
    """Run ``kernel(gen, count)`` over every block and concatenate.

    ``kernel`` must return a tuple of 1-d arrays of length ``count`` (or
    2-d with ``count`` rows).  Results are concatenated in block order.
    """
    slices = block_slices(n_samples)

    def job(item):
        index, _start, count = item
        gen = substream(master_seed, *labels, index)
        return kernel(gen, count)

    if threads <= 1:
        parts = [job(item) for item in slices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, slices))
    width = len(parts[0])
    return tuple(
        np.concatenate([p[i] for p in parts], axis=0) for i in range(width)
    )


# ---------------------------------------------------------------- digits

def draw_digits(gen, rows, cols, p_zero):
    """Boolean digit matrix; True is the digit 1, drawn with mass 1 - p_zero."""
    return gen.random((rows, cols)) >= p_zero


def window_from_digits(digits):
    """Pack (rows, 53) leading digits into the float window 0.b1...b53.

    Every partial sum of distinct powers 2^-1..2^-53 is representable, so
    the dot product is exact.
    """
    return digits.astype(np.float64) @ _POWERS


def _step_window(v, new_bit_float):
    # v <- (2 v mod 1) + b * 2^-53, all exact on the 2^-53 grid
    v *= 2.0
    v -= v >= 1.0
    v += new_bit_float * _SCALE


def _distances(pos, zeta, circle, out=None):
    d = np.abs(pos - zeta) if out is None else np.abs(pos - zeta, out=out)
    if circle:
        np.minimum(d, 1.0 - d, out=d)
    return d


def digit_window_min_distance(
    gen, count, *, n_steps, p_zero, tent, zeta, circle, chunk=256
):
    """min_{0 <= j < n_steps} dist(f^j x, zeta) for stationary digit starts.

    The minimum orbit distance is a sufficient statistic for every ball
    observable around zeta: the running maximum of phi is phi at the
    closest visit.
    """
    if n_steps < 1:
        raise DomainError("need at least one orbit point")
    v = window_from_digits(draw_digits(gen, count, WINDOW, p_zero))
    parity = np.zeros(count, dtype=bool)  # digit left of the window; b_0 = 0
    pos = np.where(parity, _TOP - v, v) if tent else v
    best = _distances(pos, zeta, circle)
    remaining = n_steps - 1
    while remaining > 0:
        cols = min(chunk, remaining)
        fresh = draw_digits(gen, count, cols, p_zero).astype(np.float64)
        for c in range(cols):
            if tent:
                parity = v >= 0.5  # the digit shifted out of the window
            _step_window(v, fresh[:, c])
            pos = np.where(parity, _TOP - v, v) if tent else v
            d = _distances(pos, zeta, circle)
            np.minimum(best, d, out=best)
        remaining -= cols
    return (best,)


def iid_min_distance_uniform(gen, count, *, n_draws, zeta, circle, chunk=512):
    """min distance to zeta over n iid uniform points per lane."""
    if n_draws < 1:
        raise DomainError("need at least one draw")
    best = np.full(count, np.inf)
    left = n_draws
    while left > 0:
        cols = min(chunk, left)
        d = _distances(gen.random((count, cols)), zeta, circle)
        np.minimum(best, d.min(axis=1), out=best)
        left -= cols
    return (best,)


def iid_min_distance_digits(gen, count, *, n_draws, p_zero, zeta, circle):
    """min distance over n iid draws from the digit-product measure.

    Each draw assembles a fresh 53-digit value, so this costs 53x the
    uniform version; it exists for comparison runs, not bulk sampling.
    """
    if n_draws < 1:
        raise DomainError("need at least one draw")
    best = np.full(count, np.inf)
    for _ in range(n_draws):
        x = window_from_digits(draw_digits(gen, count, WINDOW, p_zero))
        np.minimum(best, _distances(x, zeta, circle), out=best)
    return (best,)


# ----------------------------------------------------- word (cylinder) scans

def _word_parity(word_int, depth):
    """XOR of the word letters: the digit b_depth of a point whose first
    letters spell the word (tent letter algebra; b_0 = 0)."""
    return bin(word_int & ((1 << depth) - 1)).count("1") & 1


def word_first_hit(
    gen,
    count,
    *,
    word_int,
    depth,
    tent,
    p_zero,
    cap,
    start_j=1,
    preload=False,
    chunk=256,
):
    """First j in [start_j, cap) whose iterate lies in the target cylinder.

    The cylinder is the depth-``depth`` cell whose letters spell
    ``word_int`` (most significant bit = first letter).  With ``preload``
    the lane starts inside the cylinder (its first ``depth`` letters are
    the word) and only the free tail is drawn: that is exactly the
    conditional start used by return-time runs, because under the product
    measures the letters beyond a fixed prefix stay independent.

    Returns (times, hit): times[i] = cap and hit[i] = False when the lane
    never enters by cap - 1.

    Draws are always full ``chunk``-width matrices even when fewer columns
    remain, so two runs sharing a seed but holding different caps consume
    the generator identically up to the smaller cap: raising the cap only
    extends censored lanes, never rewrites observed times.
    """
    if not 1 <= depth <= 63:
        raise DomainError("cylinder register supports depths 1..63")
    if cap < 1 or start_j < 0 or start_j >= cap:
        raise DomainError("need 0 <= start_j < cap")
    if preload and start_j == 0:
        raise DomainError("a preloaded start is already inside at j = 0")
    mask = np.uint64((1 << depth) - 1)
    target = np.uint64(word_int)
    one = np.uint64(1)

    times = np.full(count, cap, dtype=np.int64)
    lane = np.arange(count)
    reg = np.zeros(count, dtype=np.uint64)
    prev = np.zeros(count, dtype=np.uint64)
    done = np.zeros(count, dtype=bool)
    consumed = 0
    if preload:
        reg[:] = target
        prev[:] = np.uint64(_word_parity(word_int, depth))
        consumed = depth
    total_letters = cap - 1 + depth  # letters l_0 .. l_{cap-2+depth}
    match_from = depth + start_j

    while consumed < total_letters and lane.size:
        cols = min(chunk, total_letters - consumed)
        digits = draw_digits(gen, lane.size, chunk, p_zero).astype(np.uint64)
        for c in range(cols):
            b = digits[:, c]
            if tent:
                letter = b ^ prev
                prev = b
            else:
                letter = b
            reg = ((reg << one) | letter) & mask
            consumed += 1
            if consumed >= match_from:
                hits = (reg == target) & ~done
                if hits.any():
                    times[lane[hits]] = consumed - depth
                    done |= hits
        if done.mean() > _COMPACT_AT:
            keep = ~done
            lane, reg, prev, done = lane[keep], reg[keep], prev[keep], done[keep]
    return times, times < cap


def word_hit_count(
    gen,
    count,
    *,
    word_int,
    depth,
    tent,
    p_zero,
    window,
    start_j=1,
    preload=False,
    chunk=256,
):
    """Number of j in [start_j, window] with the iterate in the cylinder.

    Inclusive right end: short-range recurrence estimators count entries
    in a window of fixed length.  No compaction: every lane runs the full
    window.
    """
    if not 1 <= depth <= 63:
        raise DomainError("cylinder register supports depths 1..63")
    if window < start_j:
        raise DomainError("window shorter than start_j")
    if preload and start_j == 0:
        raise DomainError("a preloaded start is already inside at j = 0")
    mask = np.uint64((1 << depth) - 1)
    target = np.uint64(word_int)
    one = np.uint64(1)
    counts = np.zeros(count, dtype=np.int64)
    reg = np.zeros(count, dtype=np.uint64)
    prev = np.zeros(count, dtype=np.uint64)
    consumed = 0
    if preload:
        reg[:] = target
        prev[:] = np.uint64(_word_parity(word_int, depth))
        consumed = depth
    total_letters = window + depth
    match_from = depth + start_j
    while consumed < total_letters:
        cols = min(chunk, total_letters - consumed)
        digits = draw_digits(gen, count, cols, p_zero).astype(np.uint64)
        for c in range(cols):
            b = digits[:, c]
            if tent:
                letter = b ^ prev
                prev = b
            else:
                letter = b
            reg = ((reg << one) | letter) & mask
            consumed += 1
            if consumed >= match_from:
                counts += reg == target
    return (counts,)


# ------------------------------------------------------------- ball scans

def ball_first_hit_digits(
    gen,
    count,
    *,
    eta,
    zeta,
    tent,
    p_zero,
    circle,
    cap,
    start_j=1,
    initial_digits=None,
    chunk=256,
):
    """First j in [start_j, cap) with dist(f^j x, zeta) < eta.

    ``initial_digits`` (lanes x 53, boolean) fixes the leading digits of
    the start point — used by conditional (return-time) starts drawn by
    inverse-CDF; the tail beyond 53 digits is drawn iid, which misstates
    the conditional law only on boundary cells of mass O(2^-53).

    As in ``word_first_hit``, chunks are drawn at full width regardless of
    how many columns remain, keeping shared-seed runs with different caps
    identical up to the smaller cap.
    """
    if cap < 1 or start_j < 0 or start_j >= cap:
        raise DomainError("need 0 <= start_j < cap")
    if initial_digits is None:
        initial_digits = draw_digits(gen, count, WINDOW, p_zero)
    v = window_from_digits(initial_digits)
    parity = np.zeros(count, dtype=bool)
    times = np.full(count, cap, dtype=np.int64)
    lane = np.arange(count)
    done = np.zeros(count, dtype=bool)

    if start_j == 0:
        pos = np.where(parity, _TOP - v, v) if tent else v
        hits = _distances(pos, zeta, circle) < eta
        if hits.any():
            times[lane[hits]] = 0
            done |= hits

    j = 0
    while j < cap - 1 and lane.size:
        cols = min(chunk, cap - 1 - j)
        fresh = draw_digits(gen, lane.size, chunk, p_zero).astype(np.float64)
        for c in range(cols):
            if tent:
                parity = v >= 0.5
            _step_window(v, fresh[:, c])
            j += 1
            if j < start_j:
                continue
            pos = np.where(parity, _TOP - v, v) if tent else v
            hits = (_distances(pos, zeta, circle) < eta) & ~done
            if hits.any():
                times[lane[hits]] = j
                done |= hits
        if done.mean() > _COMPACT_AT:
            keep = ~done
            lane, v, done = lane[keep], v[keep], done[keep]
            if tent:
                parity = parity[keep]
    return times, times < cap


# --------------------------------------------------------------- rotation

def rotation_starts(gen, count):
    """Stationary (uniform) fixed-point positions on the 2^63 grid."""
    return gen.integers(0, FIXED_ONE, size=count, dtype=np.uint64)


def rotation_first_hit(
    gen, count, *, step_fixed, lo, hi, cap, start_j=1, starts=None, chunk=64
):
    """First j in [start_j, cap) with the rotated position in [lo, hi).

    Positions are 63-bit integers; the step is the quantized angle, so
    the sweep is exact and matches the scalar map for every lane.
    """
    if cap < 1 or start_j < 0 or start_j >= cap:
        raise DomainError("need 0 <= start_j < cap")
    if not 0 <= lo < hi <= FIXED_ONE:
        raise DomainError("arc must satisfy 0 <= lo < hi <= 2^63")
    s = rotation_starts(gen, count) if starts is None else starts.copy()
    step = np.uint64(step_fixed)
    m = np.uint64(FIXED_ONE)
    lo_u, hi_u = np.uint64(lo), np.uint64(hi)
    times = np.full(count, cap, dtype=np.int64)
    lane = np.arange(count)
    done = np.zeros(count, dtype=bool)
    if start_j:
        jump = np.uint64((start_j * step_fixed) % FIXED_ONE)
        s += jump
        s[s >= m] -= m
    j = start_j
    steps_since_compact = 0
    while j < cap and lane.size:
        hits = (s >= lo_u) & (s < hi_u) & ~done
        if hits.any():
            times[lane[hits]] = j
            done |= hits
        s += step
        s[s >= m] -= m
        j += 1
        steps_since_compact += 1
        if steps_since_compact >= chunk:
            steps_since_compact = 0
            if done.mean() > _COMPACT_AT:
                keep = ~done
                lane, s, done = lane[keep], s[keep], done[keep]
    return times, times < cap


def rotation_min_distance(gen, count, *, step_fixed, zeta_fixed, checkpoints,
                          starts=None):
    """Circle distance minima dist(f^j x, zeta) over j < n for each n in
    ``checkpoints`` (ascending).  Returns one column per checkpoint."""
    if not checkpoints or any(
        b <= a for a, b in zip(checkpoints, checkpoints[1:])
    ):
        raise DomainError("checkpoints must be ascending and non-empty")
    s = rotation_starts(gen, count) if starts is None else starts.copy()
    s = s.astype(np.uint64)
    step = np.uint64(step_fixed)
    z = np.uint64(zeta_fixed)
    m = np.uint64(FIXED_ONE)  # fits in uint64, unlike in int64
    out = np.empty((count, len(checkpoints)), dtype=np.float64)
    best = np.full(count, FIXED_ONE, dtype=np.uint64)
    j = 0
    for col, n in enumerate(checkpoints):
        while j < n:
            diff = np.maximum(s, z) - np.minimum(s, z)
            np.minimum(diff, m - diff, out=diff)
            np.minimum(best, diff, out=best)
            s += step
            s[s >= m] -= m
            j += 1
        out[:, col] = best * (1.0 / FIXED_ONE)
    return (out,)


# ----------------------------------------------------------- intermittent

def mp_min_distance(gen, count, *, s_exp, zeta, n_steps, starts):
    """Minimum interval distance to zeta along intermittent-map orbits.

    ``starts`` come from the caller (stationary draws from the empirical
    invariant measure); the update matches the scalar map exactly.
    """
    if n_steps < 1:
        raise DomainError("need at least one orbit point")
    x = starts.copy()
    e = 1.0 + s_exp
    best = np.abs(x - zeta)
    for _ in range(n_steps - 1):
        x = x + x**e
        x -= x >= 1.0
        np.minimum(best, np.abs(x - zeta), out=best)
    return (best,)


def mp_first_hit(gen, count, *, s_exp, eta, zeta, cap, start_j, starts,
                 chunk=64):
    """First j in [start_j, cap) with |f^j x - zeta| < eta (intermittent)."""
    if cap < 1 or start_j < 0 or start_j >= cap:
        raise DomainError("need 0 <= start_j < cap")
    x = starts.copy()
    e = 1.0 + s_exp
    times = np.full(count, cap, dtype=np.int64)
    lane = np.arange(count)
    done = np.zeros(count, dtype=bool)
    j = 0
    steps_since_compact = 0
    while j < cap and lane.size:
        if j >= start_j:
            hits = (np.abs(x - zeta) < eta) & ~done
            if hits.any():
                times[lane[hits]] = j
                done |= hits
        x = x + x**e
        x -= x >= 1.0
        j += 1
        steps_since_compact += 1
        if steps_since_compact >= chunk:
            steps_since_compact = 0
            if done.mean() > _COMPACT_AT:
                keep = ~done
                lane, x, done = lane[keep], x[keep], done[keep]
    return times, times < cap


# ------------------------------------------------- conditional ball starts

def conditional_digit_starts(gen, count, *, arcs, p_zero):
    """Leading 53 digits of points drawn from the measure restricted to a
    union of intervals.

    ``arcs`` is a pair (cdf_lo, cdf_hi) of equal-length sequences giving
    the CDF values of each interval's endpoints.  Sampling picks an
    interval proportionally to its mass, draws a uniform CDF level inside
    it, and inverts one digit at a time: within any dyadic cell the digit
    measure splits mass p_zero : 1 - p_zero, so the split point of the
    current CDF bracket is linear for every digit-product measure
    (Lebesgue is the p = 1/2 case).
    """
    cdf_lo, cdf_hi = arcs
    cdf_lo = np.asarray(cdf_lo, dtype=np.float64)
    cdf_hi = np.asarray(cdf_hi, dtype=np.float64)
    widths = cdf_hi - cdf_lo
    if np.any(widths <= 0):
        raise DomainError("empty arc in conditional start table")
    total = widths.sum()
    # pick an arc per lane proportionally to mass, then a uniform CDF level
    u = gen.random(count) * total
    edges = np.concatenate(([0.0], np.cumsum(widths)))
    arc = np.clip(np.searchsorted(edges, u, side="right") - 1, 0,
                  len(widths) - 1)
    level = cdf_lo[arc] + (u - edges[arc])
    # invert digit by digit: lo/hi bracket the CDF of the current cell
    lo = np.zeros(count)
    hi = np.ones(count)
    digits = np.empty((count, WINDOW), dtype=bool)
    for i in range(WINDOW):
        split = lo + p_zero * (hi - lo)
        d = level >= split
        digits[:, i] = d
        lo = np.where(d, split, lo)
        hi = np.where(d, hi, split)
    return digits
