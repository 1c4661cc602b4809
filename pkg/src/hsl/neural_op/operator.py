"""A small Fourier neural operator for the amortized conditional score.

Pointwise lifting of ``(time features, s, y(s), x_t(s))`` to ``width``
channels, a stack of spectral layers (truncated DFT filter plus pointwise
skip), then a two-layer pointwise projection to one output channel.  The
network output is an estimate of the normalized noise; the score is that
value divided by ``sqrt(1 - e^{-t})``.

All parameter shapes depend on the architecture only, never on the grid
size, so the same parameters evaluate on any grid.  Gradients are derived
by hand (``op_backward``) and checked against finite differences in the
test suite.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

N_TIME_FEATURES = 8


@dataclass(frozen=True)
class OperatorArch:
    lift_width: int = 128
    n_spectral_layers: int = 5
    n_modes_kept: int = 5
    proj_width: int = 128
    transform: str = "physical"  # or "index": DFT of the samples as if equispaced

    @property
    def in_channels(self) -> int:
        return N_TIME_FEATURES + 3

    def shapes(self) -> dict[str, tuple[int, ...]]:
        W, m, P = self.lift_width, self.n_modes_kept, self.proj_width
        out = {"lift.W": (self.in_channels, W), "lift.b": (W,)}
        for l in range(self.n_spectral_layers):
            out[f"spec{l}.Rre"] = (m, W, W)
            out[f"spec{l}.Rim"] = (m, W, W)
            out[f"spec{l}.W"] = (W, W)
            out[f"spec{l}.b"] = (W,)
        out.update({"proj1.W": (W, P), "proj1.b": (P,), "proj2.W": (P, 1), "proj2.b": (1,)})
        return out

    def n_params(self) -> int:
        return int(sum(np.prod(s) for s in self.shapes().values()))

    def to_dict(self):
        return asdict(self)


@dataclass
class Standardization:
    """Affine maps for the ``s`` and ``y`` input channels, plus the data map.

    ``x_shift``/``x_scale`` do not touch the operator input: they map data
    values to the units the diffusion runs in (``(x0 - x_shift) / x_scale``),
    and the stylized sampler undoes them on its output.
    """

    s_shift: float = 0.0
    s_scale: float = 1.0
    y_shift: float = 0.0
    y_scale: float = 1.0
    x_shift: float = 0.0
    x_scale: float = 1.0

    def to_dict(self):
        return asdict(self)


@dataclass
class OperatorParams:
    arch: OperatorArch
    arrays: dict[str, np.ndarray]
    norm: Standardization = field(default_factory=Standardization)

    @classmethod
    def init(cls, arch: OperatorArch, rng: np.random.Generator, norm: Standardization | None = None):
        W, P = arch.lift_width, arch.proj_width
        arrays = {}
        for name, shape in arch.shapes().items():
            if name.endswith(".b"):
                arrays[name] = np.zeros(shape)
            elif name == "lift.W":
                arrays[name] = rng.standard_normal(shape) / np.sqrt(arch.in_channels)
            elif name.endswith(".Rre") or name.endswith(".Rim"):
                arrays[name] = rng.standard_normal(shape) / W
            elif name.startswith("spec"):
                arrays[name] = rng.standard_normal(shape) / np.sqrt(W)
            elif name == "proj1.W":
                arrays[name] = rng.standard_normal(shape) * np.sqrt(2.0 / W)
            else:
                arrays[name] = rng.standard_normal(shape) / np.sqrt(P)
        return cls(arch, arrays, norm or Standardization())

    @classmethod
    def zeros(cls, arch: OperatorArch, norm: Standardization | None = None):
        return cls(arch, {k: np.zeros(s) for k, s in arch.shapes().items()}, norm or Standardization())

    def astype(self, dtype) -> "OperatorParams":
        """Working copy in another float precision (float32 for training speed)."""
        return OperatorParams(self.arch, {k: v.astype(dtype) for k, v in self.arrays.items()}, self.norm)

    def copy(self) -> "OperatorParams":
        return OperatorParams(self.arch, {k: v.copy() for k, v in self.arrays.items()}, Standardization(**self.norm.to_dict()))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.arrays[k].ravel() for k in self.arch.shapes()])

    def n_params(self) -> int:
        return sum(v.size for v in self.arrays.values())


def time_features(t) -> np.ndarray:
    """Sinusoidal features of the log noise variance ``log(1 - e^{-t})``."""
    t = np.asarray(t, dtype=float)
    v = np.log(-np.expm1(-t)) / 10.0
    freqs = np.pi * 2.0 ** np.arange(N_TIME_FEATURES // 2) / 2.0
    ang = v[..., None] * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


def noise_scale(t) -> np.ndarray:
    return np.sqrt(-np.expm1(-np.asarray(t, dtype=float)))


def _dft_mats(pts: np.ndarray, m: int, transform: str):
    """Forward (m, N) and inverse (N, m) real Fourier factors for the kept modes.

    ``"physical"``: trapezoid-rule Fourier coefficients on the period
    ``pts[-1] - pts[0]``, synthesized back at the actual point locations, so
    every grid approximates the same continuous operator.  ``"index"``:
    the plain DFT of the samples as if they were equispaced.  Modes above
    the grid's Nyquist index are zeroed so the parameter count stays fixed.
    """
    N = pts.size
    k = np.arange(m)[:, None]
    c = np.where(k == 0, 1.0, 2.0)
    c = np.where(2 * k == N, 1.0, c)
    c = np.where(2 * k > N, 0.0, c)
    if transform == "physical":
        length = pts[-1] - pts[0]
        if not length > 0:
            raise ValueError("grid points must be increasing")
        ang = 2 * np.pi * k * (pts[None, :] - pts[0]) / length
        gaps = np.diff(pts)
        quad = np.zeros(N)
        quad[:-1] += 0.5 * gaps
        quad[1:] += 0.5 * gaps
        fwd = quad / length
        inv = 1.0
    elif transform == "index":
        ang = 2 * np.pi * k * np.arange(N)[None, :] / N
        fwd = 1.0
        inv = 1.0 / N
    else:
        raise ValueError(f"unknown spectral transform {transform!r}")
    keep = c > 0
    Fr = np.cos(ang) * fwd * keep
    Fi = -np.sin(ang) * fwd * keep
    Cr = (c * np.cos(ang) * inv).T
    Ci = (-c * np.sin(ang) * inv).T
    return Fr, Fi, Cr, Ci


def _lmm(M, a):
    """``M @ a`` over the first axis of ``a`` as one 2-D matrix product."""
    return (M @ a.reshape(a.shape[0], -1)).reshape((M.shape[0],) + a.shape[1:])


def _mm(a, w):
    """``a @ w`` over the last axis as one 2-D matrix product."""
    return (a.reshape(-1, a.shape[-1]) @ w).reshape(a.shape[:-1] + (w.shape[-1],))


def _silu(z):
    sig = np.tanh(0.5 * z)
    sig += 1.0
    sig *= 0.5
    return z * sig, sig


def _inputs(params: OperatorParams, t, y_vals, x_vals, grid_pts):
    """Input channels in the internal ``(N, B, C)`` layout."""
    nm = params.norm
    B, N = x_vals.shape
    tf = np.broadcast_to(time_features(t)[None, :, :], (N, B, N_TIME_FEATURES))
    s = (np.broadcast_to(grid_pts, (B, N)).T - nm.s_shift) / nm.s_scale
    y = (y_vals.T - nm.y_shift) / nm.y_scale
    x = x_vals.T
    return np.concatenate([tf, s[..., None], y[..., None], x[..., None]], axis=-1)


def _as_batch(t, y_vals, x_vals, grid_pts):
    x_vals = np.asarray(x_vals, dtype=float)
    single = x_vals.ndim == 1
    x_vals = np.atleast_2d(x_vals)
    B, N = x_vals.shape
    y_vals = np.asarray(y_vals, dtype=float)
    grid_pts = np.asarray(grid_pts, dtype=float)
    if grid_pts.ndim != 1:
        raise ValueError("all functions in a batch share one 1-D grid")
    if grid_pts.shape[-1] != N or y_vals.shape[-1] != N:
        raise ValueError("y_vals, x_vals and grid must have the same length")
    y_vals = np.broadcast_to(y_vals, (B, N))
    t = np.broadcast_to(np.asarray(t, dtype=float), (B,))
    return single, t, y_vals, x_vals, grid_pts


def _forward(params: OperatorParams, t, y_vals, x_vals, grid_pts, keep: bool):
    # Activations are stored as (N, B, W) so every DFT is a single matrix product.
    A = params.arrays
    arch = params.arch
    dtype = A["lift.W"].dtype
    inp = _inputs(params, t, y_vals, x_vals, grid_pts).astype(dtype)
    N = inp.shape[0]
    Fr, Fi, Cr, Ci = _dft_mats(grid_pts, arch.n_modes_kept, arch.transform)
    # real and imaginary parts stacked: one product per transform direction
    F = np.concatenate([Fr, Fi]).astype(dtype)  # (2m, N)
    C = np.concatenate([Cr, Ci], axis=1).astype(dtype)  # (N, 2m)
    m = arch.n_modes_kept
    cache = {"inp": inp, "dft": (F, C), "layers": []}
    h = _mm(inp, A["lift.W"]) + A["lift.b"]
    L = arch.n_spectral_layers
    for l in range(L):
        Rr, Ri = A[f"spec{l}.Rre"], A[f"spec{l}.Rim"]
        H = _lmm(F, h)  # (2m, B, W)
        Hr, Hi = H[:m], H[m:]
        G = np.concatenate([Hr @ Rr - Hi @ Ri, Hr @ Ri + Hi @ Rr])
        pre = _lmm(C, G)
        pre += _mm(h, A[f"spec{l}.W"])
        pre += A[f"spec{l}.b"]
        if l < L - 1:
            out, sig = _silu(pre)
        else:
            out, sig = pre, None
        if keep:
            cache["layers"].append((h, Hr, Hi, pre, sig))
        h = out
    z1 = _mm(h, A["proj1.W"]) + A["proj1.b"]
    a1 = np.maximum(z1, 0.0)
    net = _mm(a1, A["proj2.W"])[..., 0].T + A["proj2.b"][0]
    scale = noise_scale(t)[:, None].astype(dtype)
    if keep:
        cache.update(h_last=h, z1=z1, a1=a1, scale=scale)
    return net / scale, cache


def op_forward(params: OperatorParams, t, y_vals, x_vals, grid) -> np.ndarray:
    """Score values at the grid points.

    Accepts one function (1-D ``x_vals``) or a batch ``(B, N)`` sharing the
    grid; ``t`` is a scalar or one time per batch element.
    """
    pts = getattr(grid, "points", grid)
    single, t, y_vals, x_vals, pts = _as_batch(t, y_vals, x_vals, pts)
    out, _ = _forward(params, t, y_vals, x_vals, pts, keep=False)
    return out[0] if single else out


def op_backward(params: OperatorParams, t, y_vals, x_vals, grid, target_vals, weights=None):
    """Loss and exact gradients of the weighted mean squared residual.

    ``loss = mean_b( w_b * mean_n (s_bn - target_bn)^2 )``.  The mean over grid
    points keeps the loss comparable across grid sizes.  Returns
    ``(loss, grads)`` with ``grads`` keyed like ``params.arrays``.
    """
    pts = getattr(grid, "points", grid)
    _, t, y_vals, x_vals, pts = _as_batch(t, y_vals, x_vals, pts)
    target = np.broadcast_to(np.asarray(target_vals, dtype=float), x_vals.shape)
    B, N = x_vals.shape
    w = np.ones(B) if weights is None else np.broadcast_to(np.asarray(weights, dtype=float), (B,))
    A = params.arrays
    arch = params.arch
    s, cache = _forward(params, t, y_vals, x_vals, pts, keep=True)
    resid = s - target
    loss = float(np.mean(w * np.mean(resid**2, axis=1)))

    g = {}
    ds = (2.0 * (w[:, None] * resid) / (B * N)).astype(s.dtype)
    dnet = (ds / cache["scale"]).T  # (N, B)
    a1, z1, h = cache["a1"], cache["z1"], cache["h_last"]
    W_ = arch.lift_width
    g["proj2.W"] = a1.reshape(-1, a1.shape[-1]).T @ dnet.reshape(-1, 1)
    g["proj2.b"] = np.array([dnet.sum()])
    dz1 = (dnet[..., None] * A["proj2.W"][:, 0]) * (z1 > 0)
    g["proj1.W"] = h.reshape(-1, W_).T @ dz1.reshape(-1, dz1.shape[-1])
    g["proj1.b"] = dz1.sum(axis=(0, 1))
    dh = _mm(dz1, A["proj1.W"].T)

    F, C = cache["dft"]
    m = arch.n_modes_kept
    for l in reversed(range(arch.n_spectral_layers)):
        h_in, Hr, Hi, pre, sig = cache["layers"][l]
        if sig is not None:
            dpre = dh * (sig * (1.0 + pre * (1.0 - sig)))
        else:
            dpre = dh
        Rr, Ri = A[f"spec{l}.Rre"], A[f"spec{l}.Rim"]
        g[f"spec{l}.W"] = h_in.reshape(-1, W_).T @ dpre.reshape(-1, W_)
        g[f"spec{l}.b"] = dpre.sum(axis=(0, 1))
        dG = _lmm(C.T, dpre)  # (2m, B, W)
        dGr, dGi = dG[:m], dG[m:]
        HrT = Hr.transpose(0, 2, 1)
        HiT = Hi.transpose(0, 2, 1)
        g[f"spec{l}.Rre"] = HrT @ dGr + HiT @ dGi
        g[f"spec{l}.Rim"] = HrT @ dGi - HiT @ dGr
        RrT = Rr.transpose(0, 2, 1)
        RiT = Ri.transpose(0, 2, 1)
        dHr = dGr @ RrT + dGi @ RiT
        dHi = dGi @ RrT - dGr @ RiT
        dh = _mm(dpre, A[f"spec{l}.W"].T)
        dh += _lmm(F.T, np.concatenate([dHr, dHi]))

    inp = cache["inp"]
    g["lift.W"] = inp.reshape(-1, inp.shape[-1]).T @ dh.reshape(-1, W_)
    g["lift.b"] = dh.sum(axis=(0, 1))
    return loss, g
