"""Pure numpy implementations of the hot kernels.

These define the reference semantics; ``_kernels.pyx`` mirrors them
operation for operation.

Random numbers are counter based: the normal draw for (seed, path, block,
mode) is a pure function of those integers, so results do not depend on how
paths are chunked or scheduled across threads.  Each path owns a SplitMix64
stream keyed by ``(seed, path)``; the draw at counter ``c`` is output number
``c`` of that stream.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SEED_SALT = np.uint64(0x632BE59BD9B4E019)
_TWO_NEG53 = 2.0**-53
MODE_BITS = 16
ATTEMPT_BITS = 8


def _mix(z):
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def path_keys(seed, paths):
    seed = np.asarray([int(seed) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    k0 = _mix(seed * GOLDEN + _SEED_SALT)
    paths = np.asarray(paths, dtype=np.int64).astype(np.uint64)
    return _mix(k0 ^ ((paths + np.uint64(1)) * GOLDEN))


def _uniform(keys, ctr):
    bits = _mix(keys + (ctr + np.uint64(1)) * GOLDEN)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_NEG53


def _normals_from_keys(keys, block, D):
    """Marsaglia polar pairs: modes 2m and 2m+1 come from pair m.

    Attempt ``a`` of pair ``m`` in ``block`` reads counters
    ``((block << MODE_BITS | m) << ATTEMPT_BITS | a) * 2 + {0, 1}``.
    """
    npairs = (D + 1) // 2
    n = keys.shape[0]
    out = np.empty((n, 2 * npairs))
    pair = np.arange(npairs, dtype=np.uint64)
    stem = ((np.uint64(block) << np.uint64(MODE_BITS)) + pair) << np.uint64(ATTEMPT_BITS)
    kk = np.broadcast_to(keys[:, None], (n, npairs)).ravel()
    stem = np.broadcast_to(stem[None, :], (n, npairs)).ravel()
    flat_out = out.reshape(n * npairs, 2)
    todo = np.arange(n * npairs)
    for attempt in range(1 << ATTEMPT_BITS):
        ctr = (stem[todo] + np.uint64(attempt)) * np.uint64(2)
        u = 2.0 * _uniform(kk[todo], ctr) - 1.0
        v = 2.0 * _uniform(kk[todo], ctr + np.uint64(1)) - 1.0
        s = u * u + v * v
        ok = (s < 1.0) & (s > 0.0)
        idx = todo[ok]
        so = s[ok]
        f = np.sqrt(-2.0 * np.log(so) / so)
        flat_out[idx, 0] = u[ok] * f
        flat_out[idx, 1] = v[ok] * f
        todo = todo[~ok]
        if todo.size == 0:
            break
    else:  # pragma: no cover - probability (1 - pi/4)**256
        raise RuntimeError("polar sampler exhausted its attempts")
    return out[:, :D]


def counter_normals(seed, paths, block, D):
    """``(len(paths), D)`` standard normals addressed by (seed, path, block, mode)."""
    return _normals_from_keys(path_keys(seed, paths), block, D)


def em_linear(z, mux, cy, sig, h, seed, paths, block0):
    """Euler-Maruyama for ``dz = (mux_k z + cy_k) dt + sig dW`` in place.

    Step ``k`` uses the noise block ``block0 + k``.
    """
    keys = path_keys(seed, paths)
    D = z.shape[1]
    for k in range(mux.shape[0]):
        xi = _normals_from_keys(keys, block0 + k, D)
        z += (mux[k] * z + cy[k]) * h + sig * xi
    return z
