# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled evaluation kernel; semantics mirror _kernel_py exactly.

Every float op is the same IEEE double operation in the same order as the
numpy fallback, so both kernels return bit-identical results.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

KERNEL_NAME = "cython"

cdef int N_CONST = 0
cdef int N_VAL = 1
cdef int N_EDGE = 2
cdef int N_EQ = 3
cdef int N_APPLY = 4
cdef int N_MEAN = 5
cdef int N_LMEAN = 6
cdef int N_SUP = 7

cdef int OP_NEG = 0
cdef int OP_NOT = 1
cdef int OP_ADD = 2
cdef int OP_SUB = 3
cdef int OP_MIN = 4
cdef int OP_MAX = 5
cdef int OP_ABS = 6
cdef int OP_PROD2 = 7
cdef int OP_SCALE = 8
cdef int OP_SHIFT = 9
cdef int OP_CLIP = 10


cdef struct Prog:
    int* op
    int* a
    int* b
    int* c
    double* p0
    double* p1
    int* children


cdef struct Graph:
    Py_ssize_t n
    long* indptr
    long* indices
    double* feats
    Py_ssize_t d
    double* feat_lo
    double* feat_hi


cdef bint _has_edge(Graph* g, long u, long v) noexcept nogil:
    cdef long lo = g.indptr[u]
    cdef long hi = g.indptr[u + 1]
    cdef long mid
    while lo < hi:
        mid = (lo + hi) // 2
        if g.indices[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo < g.indptr[u + 1] and g.indices[lo] == v


cdef inline double _apply1(int opcode, double p0, double p1, double x) noexcept nogil:
    if opcode == OP_NEG:
        return -x
    if opcode == OP_NOT:
        return 1.0 - x
    if opcode == OP_ABS:
        return -x if x < 0 else x
    if opcode == OP_SCALE:
        return p0 * x
    if opcode == OP_SHIFT:
        return x + p0
    if opcode == OP_CLIP:
        x = p0 if x < p0 else x
        return p1 if x > p1 else x
    return x


cdef inline double _apply2(int opcode, double x, double y) noexcept nogil:
    if opcode == OP_ADD:
        return x + y
    if opcode == OP_SUB:
        return x - y
    if opcode == OP_MIN:
        return x if x < y else y
    if opcode == OP_MAX:
        return x if x > y else y
    if opcode == OP_PROD2:
        return x * y
    return x


cdef int _arity(int opcode) noexcept nogil:
    if opcode == OP_ADD or opcode == OP_SUB or opcode == OP_MIN \
            or opcode == OP_MAX or opcode == OP_PROD2:
        return 2
    return 1


cdef _eval_vec(Prog* P, int node, Graph* G, long[::1] env, long[::1] cand):
    cdef Py_ssize_t m = cand.shape[0]
    cdef Py_ssize_t k = env.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    cdef int op = P.op[node]
    cdef Py_ssize_t i
    cdef int sa, sb, idx, opcode
    cdef long u, v
    cdef double x
    if op == N_CONST:
        x = P.p0[node]
        for i in range(m):
            o[i] = x
        return out
    if op == N_VAL:
        sa = P.b[node]  # slot
        idx = P.a[node]
        if sa < k:
            x = G.feats[env[sa] * G.d + idx]
            for i in range(m):
                o[i] = x
        else:
            for i in range(m):
                o[i] = G.feats[cand[i] * G.d + idx]
        return out
    if op == N_EDGE or op == N_EQ:
        sa = P.a[node]
        sb = P.b[node]
        if sa == sb:
            x = 0.0 if op == N_EDGE else 1.0
            for i in range(m):
                o[i] = x
            return out
        if sa > sb:
            sa, sb = sb, sa
        if sb < k:
            u = env[sa]
            v = env[sb]
            if op == N_EQ:
                x = 1.0 if u == v else 0.0
            else:
                x = 1.0 if _has_edge(G, u, v) else 0.0
            for i in range(m):
                o[i] = x
            return out
        u = env[sa]
        if op == N_EQ:
            for i in range(m):
                o[i] = 1.0 if cand[i] == u else 0.0
        else:
            for i in range(m):
                o[i] = 1.0 if _has_edge(G, u, cand[i]) else 0.0
        return out
    # N_APPLY
    opcode = P.a[node]
    cdef int off = P.b[node]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x0 = _eval_vec(P, P.children[off], G, env, cand)
    cdef double[::1] v0 = x0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x1
    cdef double[::1] v1
    cdef double p0 = P.p0[node]
    cdef double p1 = P.p1[node]
    if _arity(opcode) == 2:
        x1 = _eval_vec(P, P.children[off + 1], G, env, cand)
        v1 = x1
        for i in range(m):
            o[i] = _apply2(opcode, v0[i], v1[i])
    else:
        for i in range(m):
            o[i] = _apply1(opcode, p0, p1, v0[i])
    return out


cdef _bound_vec(Prog* P, int node, Graph* G, long[::1] env, long[::1] cand):
    cdef Py_ssize_t m = cand.shape[0]
    cdef Py_ssize_t k = env.shape[0]
    cdef int op = P.op[node]
    cdef Py_ssize_t i
    cdef int sa, sb, idx, opcode, off
    cdef double x, y
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lo_a, hi_a
    if op == N_CONST or op == N_EDGE or op == N_EQ or op == N_VAL:
        if op == N_VAL:
            sa = P.b[node]
            idx = P.a[node]
            if sa > k:
                lo_a = np.full(m, G.feat_lo[idx])
                hi_a = np.full(m, G.feat_hi[idx])
                return lo_a, hi_a
        elif op == N_EDGE or op == N_EQ:
            sa = P.a[node]
            sb = P.b[node]
            if sa != sb and (sa if sa > sb else sb) > k:
                return np.zeros(m, dtype=np.float64), np.ones(m, dtype=np.float64)
        vals = _eval_vec(P, node, G, env, cand)
        return vals, vals.copy()
    if op == N_MEAN or op == N_SUP:
        return _bound_vec(P, P.a[node], G, env, cand)
    if op == N_LMEAN:
        lo, hi = _bound_vec(P, P.a[node], G, env, cand)
        return np.minimum(lo, 0.0), np.maximum(hi, 0.0)
    # N_APPLY: interval arithmetic
    opcode = P.a[node]
    off = P.b[node]
    l0, h0 = _bound_vec(P, P.children[off], G, env, cand)
    cdef double[::1] l0v = l0
    cdef double[::1] h0v = h0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rlo = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rhi = np.empty(m, dtype=np.float64)
    cdef double[::1] rl = rlo
    cdef double[::1] rh = rhi
    cdef double p0 = P.p0[node]
    cdef double p1 = P.p1[node]
    cdef double[::1] l1v, h1v
    cdef double a, b, c, d, q0, q1, q2, q3, mn, mx
    if _arity(opcode) == 2:
        l1, h1 = _bound_vec(P, P.children[off + 1], G, env, cand)
        l1v = l1
        h1v = h1
        if opcode == OP_ADD:
            for i in range(m):
                rl[i] = l0v[i] + l1v[i]
                rh[i] = h0v[i] + h1v[i]
        elif opcode == OP_SUB:
            for i in range(m):
                rl[i] = l0v[i] - h1v[i]
                rh[i] = h0v[i] - l1v[i]
        elif opcode == OP_MIN:
            for i in range(m):
                rl[i] = l0v[i] if l0v[i] < l1v[i] else l1v[i]
                rh[i] = h0v[i] if h0v[i] < h1v[i] else h1v[i]
        elif opcode == OP_MAX:
            for i in range(m):
                rl[i] = l0v[i] if l0v[i] > l1v[i] else l1v[i]
                rh[i] = h0v[i] if h0v[i] > h1v[i] else h1v[i]
        else:  # OP_PROD2
            for i in range(m):
                a = l0v[i]; b = h0v[i]; c = l1v[i]; d = h1v[i]
                q0 = a * c; q1 = a * d; q2 = b * c; q3 = b * d
                mn = q0
                if q1 < mn: mn = q1
                if q2 < mn: mn = q2
                if q3 < mn: mn = q3
                mx = q0
                if q1 > mx: mx = q1
                if q2 > mx: mx = q2
                if q3 > mx: mx = q3
                rl[i] = mn
                rh[i] = mx
        return rlo, rhi
    if opcode == OP_NEG:
        for i in range(m):
            rl[i] = -h0v[i]
            rh[i] = -l0v[i]
    elif opcode == OP_NOT:
        for i in range(m):
            rl[i] = 1.0 - h0v[i]
            rh[i] = 1.0 - l0v[i]
    elif opcode == OP_ABS:
        for i in range(m):
            a = l0v[i]; b = h0v[i]
            rl[i] = a if a > 0 else (-b if b < 0 else 0.0)
            rh[i] = -a if -a > b else b
    elif opcode == OP_SCALE:
        if p0 >= 0:
            for i in range(m):
                rl[i] = p0 * l0v[i]
                rh[i] = p0 * h0v[i]
        else:
            for i in range(m):
                rl[i] = p0 * h0v[i]
                rh[i] = p0 * l0v[i]
    elif opcode == OP_SHIFT:
        for i in range(m):
            rl[i] = l0v[i] + p0
            rh[i] = h0v[i] + p0
    else:  # OP_CLIP
        for i in range(m):
            a = l0v[i]
            a = p0 if a < p0 else a
            rl[i] = p1 if a > p1 else a
            b = h0v[i]
            b = p0 if b < p0 else b
            rh[i] = p1 if b > p1 else b
    return rlo, rhi


cdef double _eval_scalar(Prog* P, int node, Graph* G, long[::1] env) except? -1e308:
    cdef int op = P.op[node]
    cdef int sa, sb, opcode, off
    cdef long u, v
    cdef double x0, x1
    if op == N_CONST:
        return P.p0[node]
    if op == N_VAL:
        return G.feats[env[P.b[node]] * G.d + P.a[node]]
    if op == N_EDGE:
        u = env[P.a[node]]
        v = env[P.b[node]]
        if u == v:
            return 0.0
        return 1.0 if _has_edge(G, u, v) else 0.0
    if op == N_EQ:
        return 1.0 if env[P.a[node]] == env[P.b[node]] else 0.0
    # N_APPLY
    opcode = P.a[node]
    off = P.b[node]
    x0 = _eval_scalar(P, P.children[off], G, env)
    if _arity(opcode) == 2:
        x1 = _eval_scalar(P, P.children[off + 1], G, env)
        return _apply2(opcode, x0, x1)
    return _apply1(opcode, P.p0[node], P.p1[node], x0)


cdef (double, double) _bound_scalar(Prog* P, int node, Graph* G, long[::1] env):
    cdef Py_ssize_t k = env.shape[0]
    cdef int op = P.op[node]
    cdef int sa, sb, idx, opcode, off
    cdef double v, l0, h0, l1, h1, q0, q1, q2, q3, mn, mx, p0, p1
    if op == N_CONST:
        v = P.p0[node]
        return (v, v)
    if op == N_VAL:
        sa = P.b[node]
        idx = P.a[node]
        if sa < k:
            v = G.feats[env[sa] * G.d + idx]
            return (v, v)
        return (G.feat_lo[idx], G.feat_hi[idx])
    if op == N_EDGE or op == N_EQ:
        sa = P.a[node]
        sb = P.b[node]
        if sa == sb:
            v = 0.0 if op == N_EDGE else 1.0
            return (v, v)
        if (sa if sa > sb else sb) >= k:
            return (0.0, 1.0)
        v = _eval_scalar(P, node, G, env)
        return (v, v)
    if op == N_MEAN or op == N_SUP:
        return _bound_scalar(P, P.a[node], G, env)
    if op == N_LMEAN:
        l0, h0 = _bound_scalar(P, P.a[node], G, env)
        return (l0 if l0 < 0 else 0.0, h0 if h0 > 0 else 0.0)
    # N_APPLY
    opcode = P.a[node]
    off = P.b[node]
    p0 = P.p0[node]
    p1 = P.p1[node]
    l0, h0 = _bound_scalar(P, P.children[off], G, env)
    if _arity(opcode) == 2:
        l1, h1 = _bound_scalar(P, P.children[off + 1], G, env)
        if opcode == OP_ADD:
            return (l0 + l1, h0 + h1)
        if opcode == OP_SUB:
            return (l0 - h1, h0 - l1)
        if opcode == OP_MIN:
            return (l0 if l0 < l1 else l1, h0 if h0 < h1 else h1)
        if opcode == OP_MAX:
            return (l0 if l0 > l1 else l1, h0 if h0 > h1 else h1)
        q0 = l0 * l1; q1 = l0 * h1; q2 = h0 * l1; q3 = h0 * h1
        mn = q0
        if q1 < mn: mn = q1
        if q2 < mn: mn = q2
        if q3 < mn: mn = q3
        mx = q0
        if q1 > mx: mx = q1
        if q2 > mx: mx = q2
        if q3 > mx: mx = q3
        return (mn, mx)
    if opcode == OP_NEG:
        return (-h0, -l0)
    if opcode == OP_NOT:
        return (1.0 - h0, 1.0 - l0)
    if opcode == OP_ABS:
        if l0 > 0:
            return (l0, -l0 if -l0 > h0 else h0)
        if h0 < 0:
            return (-h0, -l0)
        return (0.0, -l0 if -l0 > h0 else h0)
    if opcode == OP_SCALE:
        if p0 >= 0:
            return (p0 * l0, p0 * h0)
        return (p0 * h0, p0 * l0)
    if opcode == OP_SHIFT:
        return (l0 + p0, h0 + p0)
    # OP_CLIP
    l1 = p0 if l0 < p0 else l0
    l1 = p1 if l1 > p1 else l1
    h1 = p0 if h0 < p0 else h0
    h1 = p1 if h1 > p1 else h1
    return (l1, h1)


cdef class _Views:
    """Keeps the array objects alive while raw pointers are used."""
    cdef object refs
    cdef Prog P
    cdef Graph G

    def __init__(self, prog, gd):
        op = np.ascontiguousarray(prog.op, dtype=np.int32)
        a = np.ascontiguousarray(prog.a, dtype=np.int32)
        b = np.ascontiguousarray(prog.b, dtype=np.int32)
        c = np.ascontiguousarray(prog.c, dtype=np.int32)
        p0 = np.ascontiguousarray(prog.p0, dtype=np.float64)
        p1 = np.ascontiguousarray(prog.p1, dtype=np.float64)
        ch = np.ascontiguousarray(prog.children, dtype=np.int32)
        if ch.shape[0] == 0:
            ch = np.zeros(1, dtype=np.int32)
        indptr = np.ascontiguousarray(gd.indptr, dtype=np.int64)
        indices = np.ascontiguousarray(gd.indices, dtype=np.int64)
        if indices.shape[0] == 0:
            indices = np.zeros(1, dtype=np.int64)
        feats = np.ascontiguousarray(gd.feats, dtype=np.float64)
        flo = np.ascontiguousarray(gd.feat_lo, dtype=np.float64)
        fhi = np.ascontiguousarray(gd.feat_hi, dtype=np.float64)
        if flo.shape[0] == 0:
            flo = np.zeros(1, dtype=np.float64)
            fhi = np.zeros(1, dtype=np.float64)
        self.refs = (op, a, b, c, p0, p1, ch, indptr, indices, feats, flo, fhi)
        self.P.op = <int*> cnp.PyArray_DATA(op)
        self.P.a = <int*> cnp.PyArray_DATA(a)
        self.P.b = <int*> cnp.PyArray_DATA(b)
        self.P.c = <int*> cnp.PyArray_DATA(c)
        self.P.p0 = <double*> cnp.PyArray_DATA(p0)
        self.P.p1 = <double*> cnp.PyArray_DATA(p1)
        self.P.children = <int*> cnp.PyArray_DATA(ch)
        self.G.n = gd.n
        self.G.indptr = <long*> cnp.PyArray_DATA(indptr)
        self.G.indices = <long*> cnp.PyArray_DATA(indices)
        self.G.feats = <double*> cnp.PyArray_DATA(feats)
        self.G.d = feats.shape[1] if feats.ndim == 2 else 0
        self.G.feat_lo = <double*> cnp.PyArray_DATA(flo)
        self.G.feat_hi = <double*> cnp.PyArray_DATA(fhi)


def _views(prog, gd):
    cache = getattr(gd, "_cy_views", None)
    if cache is None:
        cache = {}
        gd._cy_views = cache
    v = cache.get(prog)
    if v is None:
        v = _Views(prog, gd)
        cache[prog] = v
    return v


def _env(env):
    return np.ascontiguousarray(env, dtype=np.int64)


def eval_vec(prog, node, gd, env, cand):
    cdef _Views V = _views(prog, gd)
    return _eval_vec(&V.P, node, &V.G, _env(env), _env(cand))


def bound_vec(prog, node, gd, env, cand):
    cdef _Views V = _views(prog, gd)
    return _bound_vec(&V.P, node, &V.G, _env(env), _env(cand))


def eval_scalar(prog, node, gd, env):
    cdef _Views V = _views(prog, gd)
    return _eval_scalar(&V.P, node, &V.G, _env(env))


def bound_scalar(prog, node, gd, env):
    cdef _Views V = _views(prog, gd)
    return _bound_scalar(&V.P, node, &V.G, _env(env))
