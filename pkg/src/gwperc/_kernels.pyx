# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Bit-for-bit twin of ``gwperc._fallback``: every random decision is a keyed
hash, so the two implementations produce identical output for identical
arguments.  Frontiers are plain growable C arrays; the GIL is released for
whole batches.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, calloc, realloc, free
from libc.math cimport pow, floor

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t LANE2 = 0xD1B54A32D192ED03ULL
cdef uint64_t TAG_TREE1 = 0x7472656531A5A5A5ULL
cdef uint64_t TAG_TREE2 = 0x74726565325A5A5AULL
cdef uint64_t TAG_OFFSPRING = 0x6F6666737072696EULL
cdef uint64_t TAG_PERC = 0x706572636F6C6174ULL
cdef uint64_t TAG_ANNEAL = 0x616E6E65616C6564ULL
cdef uint64_t TAG_IIC = 0x6969637370696E65ULL
cdef uint64_t TAG_SPINE = 0x7370696E65636878ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef double TWO_P53 = 9007199254740992.0

IMPLEMENTATION = "cython"


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t rotl(uint64_t x, int r) noexcept nogil:
    return (x << r) | (x >> (64 - r))


cdef inline uint64_t run_key(uint64_t master, int64_t idx, uint64_t tag) noexcept nogil:
    cdef uint64_t base = mix64(master ^ tag)
    return mix64(base + <uint64_t>(idx + 1) * GOLDEN)


cdef inline bint edge_open(uint64_t rkey, uint64_t h1, uint64_t h2, double thresh) noexcept nogil:
    return <double>(mix64(rkey ^ h1 ^ rotl(h2, 32)) >> 11) < thresh


cdef struct Sampler:
    int kind
    const double* table
    int64_t n
    double alpha


cdef inline int64_t zeta_far(double u, double alpha) noexcept nogil:
    cdef int64_t k = <int64_t>floor(pow(u, -1.0 / alpha))
    cdef int it
    cdef bint up, down
    for it in range(4):
        up = pow(<double>(k + 1), -alpha) >= u
        k += up
        down = pow(<double>k, -alpha) < u
        k -= down
        if not up and not down:
            break
    return k


cdef inline int64_t draw_offspring(const Sampler* s, uint64_t h1, uint64_t h2) noexcept nogil:
    cdef uint64_t bits = mix64(h1 ^ rotl(h2, 29) ^ TAG_OFFSPRING)
    cdef double u = <double>((bits >> 11) + 1) * TWO_M53
    cdef int64_t lo = 0, hi = s.n, mid
    if s.kind == 0:
        # first index with cdf >= u
        while lo < hi:
            mid = (lo + hi) >> 1
            if s.table[mid] < u:
                lo = mid + 1
            else:
                hi = mid
        lo += 1
        return lo if lo < s.n else s.n
    if u > s.table[s.n - 1]:
        # first index with tail < u (table decreasing)
        while lo < hi:
            mid = (lo + hi) >> 1
            if s.table[mid] >= u:
                lo = mid + 1
            else:
                hi = mid
        return lo
    return zeta_far(u, s.alpha)


cdef struct Buf:
    uint64_t* h1
    uint64_t* h2
    int64_t* aux
    int64_t n
    int64_t cap


cdef int buf_init(Buf* b, int64_t cap) noexcept nogil:
    if cap < 16:
        cap = 16
    b.h1 = <uint64_t*>malloc(cap * sizeof(uint64_t))
    b.h2 = <uint64_t*>malloc(cap * sizeof(uint64_t))
    b.aux = <int64_t*>malloc(cap * sizeof(int64_t))
    b.n = 0
    b.cap = cap
    if b.h1 == NULL or b.h2 == NULL or b.aux == NULL:
        return -1
    return 0


cdef void buf_free(Buf* b) noexcept nogil:
    free(b.h1)
    free(b.h2)
    free(b.aux)
    b.h1 = NULL
    b.h2 = NULL
    b.aux = NULL
    b.n = 0
    b.cap = 0


cdef inline int buf_push(Buf* b, uint64_t h1, uint64_t h2, int64_t aux) noexcept nogil:
    cdef int64_t cap
    if b.n == b.cap:
        cap = b.cap * 2
        b.h1 = <uint64_t*>realloc(b.h1, cap * sizeof(uint64_t))
        b.h2 = <uint64_t*>realloc(b.h2, cap * sizeof(uint64_t))
        b.aux = <int64_t*>realloc(b.aux, cap * sizeof(int64_t))
        if b.h1 == NULL or b.h2 == NULL or b.aux == NULL:
            return -1
        b.cap = cap
    b.h1[b.n] = h1
    b.h2[b.n] = h2
    b.aux[b.n] = aux
    b.n += 1
    return 0


cdef inline void swap_bufs(Buf* a, Buf* b) noexcept nogil:
    cdef Buf t = a[0]
    a[0] = b[0]
    b[0] = t


cdef Sampler make_sampler(int kind, const double[::1] table, double alpha):
    cdef Sampler s
    s.kind = kind
    s.table = &table[0]
    s.n = table.shape[0]
    s.alpha = alpha
    return s


# ---------------------------------------------------------------------------
# percolation runs

cdef int64_t one_run(const Sampler* s, double thresh, uint64_t rkey,
                     uint64_t h1, uint64_t h2, int n_max,
                     const int64_t* level_col, int64_t* counts_row,
                     int connector_level, int64_t node_cap,
                     Buf* cur, Buf* nxt, int64_t* connectors) noexcept nogil:
    """Returns the deepest populated level, -1 if aborted, -2 on OOM."""
    cdef int lev
    cdef int64_t j, i, x, visited = 1, c
    cdef uint64_t a, b, ja
    cur.n = 0
    nxt.n = 0
    if buf_push(cur, h1, h2, 0) < 0:
        return -2
    if level_col[0] >= 0:
        counts_row[level_col[0]] = 1
    for lev in range(n_max):
        nxt.n = 0
        for j in range(cur.n):
            x = draw_offspring(s, cur.h1[j], cur.h2[j])
            visited += x
            for i in range(x):
                ja = <uint64_t>(i + 1)
                a = mix64(cur.h1[j] + ja * GOLDEN)
                b = mix64(cur.h2[j] ^ (ja * LANE2))
                if edge_open(rkey, a, b, thresh):
                    if buf_push(nxt, a, b, cur.aux[j]) < 0:
                        return -2
        if visited > node_cap:
            return -1
        if nxt.n == 0:
            return lev
        swap_bufs(cur, nxt)
        if lev + 1 == connector_level:
            for j in range(cur.n):
                cur.aux[j] = j
        if level_col[lev + 1] >= 0:
            counts_row[level_col[lev + 1]] = cur.n
    if connector_level >= 0:
        c = 1
        for j in range(1, cur.n):
            if cur.aux[j] != cur.aux[j - 1]:
                c += 1
        connectors[0] = c
    return n_max


def cluster_batch(int kind, const double[::1] table, double alpha, double p,
                  bint annealed, uint64_t root_h1, uint64_t root_h2,
                  uint64_t master_seed, int64_t run_start, int64_t n_runs,
                  int n_max, const int64_t[::1] level_col, int n_levels,
                  int connector_level, int64_t node_cap):
    cdef Sampler s = make_sampler(kind, table, alpha)
    cdef cnp.ndarray[int64_t, ndim=2] counts = np.zeros((n_runs, n_levels), dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] depth = np.zeros(n_runs, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] conn = np.zeros(n_runs, dtype=np.int64)
    cdef int64_t[:, ::1] cv = counts
    cdef int64_t[::1] dv = depth
    cdef int64_t[::1] connv = conn
    cdef int64_t r, idx, d
    cdef uint64_t rkey, ts, h1, h2
    cdef double thresh = p * TWO_P53
    cdef Buf cur, nxt
    cdef int64_t dummy = 0
    cdef int err = 0
    if buf_init(&cur, 1024) < 0 or buf_init(&nxt, 1024) < 0:
        raise MemoryError()
    with nogil:
        for r in range(n_runs):
            idx = run_start + r
            rkey = run_key(master_seed, idx, TAG_PERC)
            if annealed:
                ts = run_key(master_seed, idx, TAG_ANNEAL)
                h1 = mix64(ts ^ TAG_TREE1)
                h2 = mix64(ts + TAG_TREE2)
            else:
                h1 = root_h1
                h2 = root_h2
            d = one_run(&s, thresh, rkey, h1, h2, n_max, &level_col[0],
                        &cv[r, 0] if n_levels > 0 else &dummy,
                        connector_level, node_cap, &cur, &nxt, &connv[r])
            if d == -2:
                err = 1
                break
            dv[r] = d
    buf_free(&cur)
    buf_free(&nxt)
    if err:
        raise MemoryError()
    return counts, depth, conn


# ---------------------------------------------------------------------------
# full-tree expansion

def subtree_counts(int kind, const double[::1] table, double alpha,
                   uint64_t h1, uint64_t h2, int depth, int64_t budget):
    """Generation sizes 0..depth below a node; ``None`` if the budget is hit."""
    cdef Sampler s = make_sampler(kind, table, alpha)
    cdef cnp.ndarray[int64_t, ndim=1] out = np.zeros(depth + 1, dtype=np.int64)
    cdef int64_t[::1] ov = out
    cdef Buf cur, nxt
    cdef int lev
    cdef int64_t j, i, x, visited = 1, total
    cdef uint64_t ja
    cdef int err = 0
    if buf_init(&cur, 1024) < 0 or buf_init(&nxt, 1024) < 0:
        raise MemoryError()
    ov[0] = 1
    with nogil:
        buf_push(&cur, h1, h2, 0)
        for lev in range(depth):
            nxt.n = 0
            total = 0
            for j in range(cur.n):
                x = draw_offspring(&s, cur.h1[j], cur.h2[j])
                total += x
                if lev + 1 < depth:
                    for i in range(x):
                        ja = <uint64_t>(i + 1)
                        if buf_push(&nxt, mix64(cur.h1[j] + ja * GOLDEN),
                                    mix64(cur.h2[j] ^ (ja * LANE2)), 0) < 0:
                            err = 2
                            break
                if err:
                    break
            visited += total
            ov[lev + 1] = total
            if err or visited > budget:
                err = err or 1
                break
            swap_bufs(&cur, &nxt)
    buf_free(&cur)
    buf_free(&nxt)
    if err == 2:
        raise MemoryError()
    if err == 1:
        return None
    return out


# ---------------------------------------------------------------------------
# IIC spine sampler
#
# Levels are kept by absolute depth.  Expanding parents in order keeps every
# subtree contiguous on each level, so the window below a spine vertex is a
# list of index ranges and descending to a child only narrows the ranges
# through the ``start`` (first-child offset) arrays.  The recursion at depth
# k owns level k + m + 2 and rewrites it for each chosen child in turn.

cdef struct Level:
    uint64_t* h1
    uint64_t* h2
    int64_t* start      # start[j] = offset in the next level of j's first child
    int64_t n
    int64_t cap


cdef int level_reserve(Level* L, int64_t need) noexcept nogil:
    cdef int64_t cap
    if need <= L.cap:
        return 0
    cap = L.cap * 2 if L.cap > 0 else 64
    while cap < need:
        cap *= 2
    L.h1 = <uint64_t*>realloc(L.h1, cap * sizeof(uint64_t))
    L.h2 = <uint64_t*>realloc(L.h2, cap * sizeof(uint64_t))
    L.start = <int64_t*>realloc(L.start, (cap + 1) * sizeof(int64_t))
    if L.h1 == NULL or L.h2 == NULL or L.start == NULL:
        return -1
    L.cap = cap
    return 0


cdef int expand_range(const Sampler* s, Level* src, int64_t lo, int64_t hi,
                      Level* dst) noexcept nogil:
    """dst := children of src[lo:hi] in order; fills src.start[lo..hi]."""
    cdef int64_t j, i, x
    cdef uint64_t ja, a1, a2
    dst.n = 0
    for j in range(lo, hi):
        src.start[j] = dst.n
        x = draw_offspring(s, src.h1[j], src.h2[j])
        if level_reserve(dst, dst.n + x) < 0:
            return -1
        a1 = src.h1[j]
        a2 = src.h2[j]
        for i in range(x):
            ja = <uint64_t>(i + 1)
            dst.h1[dst.n] = mix64(a1 + ja * GOLDEN)
            dst.h2[dst.n] = mix64(a2 ^ (ja * LANE2))
            dst.n += 1
    src.start[hi] = dst.n
    return 0


cdef struct IICCtx:
    const Sampler* s
    double thresh
    int n
    int m
    int64_t node_cap
    uint64_t* skeys
    int64_t* counts
    int64_t* aborted
    int* spines
    Buf cur
    Buf nxt
    Level* L           # absolute levels 0 .. n + m + 1
    int64_t* rlo       # (n + 1) x (m + 2) window ranges per spine depth
    int64_t* rhi


cdef int64_t cluster_count(const Sampler* s, double thresh, uint64_t rkey,
                           uint64_t h1, uint64_t h2, int depth, Buf* cur, Buf* nxt,
                           int64_t node_cap) noexcept nogil:
    """Level-``depth`` size of the percolation cluster of a node; -1 aborted, -2 OOM."""
    cdef int lev
    cdef int64_t j, i, x, visited = 1
    cdef uint64_t a, b, ja
    cur.n = 0
    if buf_push(cur, h1, h2, 0) < 0:
        return -2
    for lev in range(depth):
        nxt.n = 0
        for j in range(cur.n):
            x = draw_offspring(s, cur.h1[j], cur.h2[j])
            visited += x
            for i in range(x):
                ja = <uint64_t>(i + 1)
                a = mix64(cur.h1[j] + ja * GOLDEN)
                b = mix64(cur.h2[j] ^ (ja * LANE2))
                if edge_open(rkey, a, b, thresh):
                    if buf_push(nxt, a, b, 0) < 0:
                        return -2
        if visited > node_cap:
            return -1
        if nxt.n == 0:
            return 0
        swap_bufs(cur, nxt)
    return cur.n


cdef int iic_node(IICCtx* ctx, int k, int64_t* samples, int64_t ns) noexcept nogil:
    cdef int m = ctx.m, d
    cdef int64_t* lo = &ctx.rlo[k * (m + 2)]
    cdef int64_t* hi = &ctx.rhi[k * (m + 2)]
    cdef int64_t* clo
    cdef int64_t* chi
    cdef Level* l1 = &ctx.L[k + 1]
    cdef int64_t nchild = hi[1] - lo[1], e, total, sidx, target, i, j, cnt, got, a, b
    cdef int64_t* cum
    cdef int64_t* choice
    cdef int64_t* order
    cdef int64_t* starts
    cdef uint64_t skey, sbits
    cdef int rc = 0
    if k == ctx.n:
        for e in range(ns):
            ctx.counts[samples[e]] += 1
        return 0
    cum = <int64_t*>malloc((nchild + 1) * sizeof(int64_t))
    starts = <int64_t*>malloc((nchild + 2) * sizeof(int64_t))
    choice = <int64_t*>malloc((ns + 1) * sizeof(int64_t))
    order = <int64_t*>malloc((ns + 1) * sizeof(int64_t))
    if cum == NULL or starts == NULL or choice == NULL or order == NULL:
        free(cum); free(starts); free(choice); free(order)
        return -1
    # |T_m(w)| for each child w: follow start offsets down m levels
    total = 0
    for i in range(nchild):
        a = lo[1] + i
        b = a + 1
        for d in range(1, m + 1):
            a = ctx.L[k + d].start[a]
            b = ctx.L[k + d].start[b]
        total += b - a
        cum[i] = total
    # spine child w chosen with probability |T_m(w)| / |T_{m+1}(v)|
    for e in range(ns):
        sidx = samples[e]
        skey = ctx.skeys[sidx]
        sbits = mix64(skey ^ mix64(<uint64_t>k + TAG_SPINE))
        target = <int64_t>(<double>(sbits >> 11) * TWO_M53 * <double>total)
        i = 0
        while cum[i] <= target:
            i += 1
        choice[e] = i
        if ctx.spines != NULL:
            ctx.spines[sidx * ctx.n + k] = <int>i
        for j in range(nchild):
            if j == i:
                continue
            if edge_open(skey, l1.h1[lo[1] + j], l1.h2[lo[1] + j], ctx.thresh):
                got = cluster_count(ctx.s, ctx.thresh, skey, l1.h1[lo[1] + j],
                                    l1.h2[lo[1] + j], ctx.n - k - 1, &ctx.cur, &ctx.nxt,
                                    ctx.node_cap)
                if got == -2:
                    rc = -1
                elif got == -1:
                    ctx.aborted[sidx] = 1
                else:
                    ctx.counts[sidx] += got
    # stable counting sort of samples by chosen child
    for i in range(nchild + 2):
        starts[i] = 0
    for e in range(ns):
        starts[choice[e] + 1] += 1
    for i in range(nchild):
        starts[i + 1] += starts[i]
    for i in range(nchild):
        cum[i] = starts[i]
    for e in range(ns):
        order[cum[choice[e]]] = samples[e]
        cum[choice[e]] += 1
    clo = &ctx.rlo[(k + 1) * (m + 2)]
    chi = &ctx.rhi[(k + 1) * (m + 2)]
    for i in range(nchild):
        cnt = starts[i + 1] - starts[i]
        if cnt == 0 or rc < 0:
            continue
        clo[0] = lo[1] + i
        chi[0] = clo[0] + 1
        for d in range(1, m + 1):
            clo[d] = ctx.L[k + d].start[clo[d - 1]]
            chi[d] = ctx.L[k + d].start[chi[d - 1]]
        if k + 1 < ctx.n:
            if expand_range(ctx.s, &ctx.L[k + m + 1], clo[m], chi[m], &ctx.L[k + m + 2]) < 0:
                rc = -1
                break
            clo[m + 1] = 0
            chi[m + 1] = ctx.L[k + m + 2].n
        if iic_node(ctx, k + 1, &order[starts[i]], cnt) < 0:
            rc = -1
            break
    free(cum); free(starts); free(choice); free(order)
    return rc


def iic_batch(int kind, const double[::1] table, double alpha, double p,
              uint64_t root_h1, uint64_t root_h2, uint64_t master_seed,
              int64_t sample_start, int64_t n_samples, int n, int m_w,
              int64_t node_cap, bint record_spines):
    """Level-n IIC counts for a batch of samples (and optionally the spines)."""
    cdef Sampler s = make_sampler(kind, table, alpha)
    cdef cnp.ndarray[int64_t, ndim=1] counts = np.zeros(n_samples, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] aborted = np.zeros(n_samples, dtype=np.int64)
    cdef cnp.ndarray[uint64_t, ndim=1] skeys = np.empty(n_samples, dtype=np.uint64)
    cdef cnp.ndarray[int64_t, ndim=1] samples = np.arange(n_samples, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] rlo = np.zeros((n + 1) * (m_w + 2), dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] rhi = np.zeros((n + 1) * (m_w + 2), dtype=np.int64)
    cdef cnp.ndarray[int, ndim=2] spines
    cdef IICCtx ctx
    cdef int64_t e
    cdef int k, d, nlev = n + m_w + 2, rc = 0
    for e in range(n_samples):
        skeys[e] = run_key(master_seed, sample_start + e, TAG_IIC)
    ctx.s = &s
    ctx.thresh = p * TWO_P53
    ctx.n = n
    ctx.m = m_w
    ctx.node_cap = node_cap
    ctx.skeys = <uint64_t*>skeys.data
    ctx.counts = <int64_t*>counts.data
    ctx.aborted = <int64_t*>aborted.data
    ctx.rlo = <int64_t*>rlo.data
    ctx.rhi = <int64_t*>rhi.data
    if record_spines:
        spines = np.zeros((n_samples, max(n, 1)), dtype=np.intc)
        ctx.spines = <int*>spines.data
    else:
        spines = np.zeros((0, 0), dtype=np.intc)
        ctx.spines = NULL
    if buf_init(&ctx.cur, 1024) < 0 or buf_init(&ctx.nxt, 1024) < 0:
        raise MemoryError()
    ctx.L = <Level*>calloc(nlev, sizeof(Level))
    if ctx.L == NULL:
        raise MemoryError()
    with nogil:
        if n_samples > 0:
            # root window: levels 0..m+1 expanded in full
            if level_reserve(&ctx.L[0], 1) < 0:
                rc = -1
            else:
                ctx.L[0].h1[0] = root_h1
                ctx.L[0].h2[0] = root_h2
                ctx.L[0].n = 1
            d = 0
            while rc == 0 and d <= m_w:
                ctx.rlo[d] = 0
                ctx.rhi[d] = ctx.L[d].n
                if expand_range(&s, &ctx.L[d], 0, ctx.L[d].n, &ctx.L[d + 1]) < 0:
                    rc = -1
                d += 1
            ctx.rlo[m_w + 1] = 0
            ctx.rhi[m_w + 1] = ctx.L[m_w + 1].n
            if rc == 0 and iic_node(&ctx, 0, <int64_t*>samples.data, n_samples) < 0:
                rc = -1
    for k in range(nlev):
        free(ctx.L[k].h1)
        free(ctx.L[k].h2)
        free(ctx.L[k].start)
    free(ctx.L)
    buf_free(&ctx.cur)
    buf_free(&ctx.nxt)
    if rc < 0:
        raise MemoryError()
    return counts, aborted.astype(bool), (spines if record_spines else None)
