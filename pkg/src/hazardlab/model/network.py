"""Toy attention-MIL / GRU hazard network with an explicit reverse pass.

Pipeline for a bag of ``P`` instance vectors::

    x_p --tanh MLP--> z_p --(+ self-attention across instances)--> z_p
    u_p = [z_p, binary feature]
    GRU over j = 1..k with input [u_p, j/k]           -> g_{p,j}
    o_{p,j} = w_out . g_{p,j} + b_out                   (per-instance logit)
    a = softmax_p(w . tanh(V mean_j g_{p,j}))            (MIL attention)
    h_j = sigmoid(sum_p a_p o_{p,j})                     (bag hazard)

Everything runs batched over ``(B, P)`` with a boolean instance mask so
bags of different sizes share one pass.  Parameters are a plain
``dict[str, ndarray]`` and are never mutated in place.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from ..errors import InvalidInputError, NumericError

POOL_LOGIT = "logit"
POOL_HAZARD = "hazard"


@dataclass(frozen=True)
class ModelConfig:
    feature_dim: int = 8
    interval_count: int = 28
    encoder_hidden: int = 16
    embed_dim: int = 16
    gru_hidden: int = 16
    attention_hidden: int = 8
    use_self_attention: bool = True
    use_mil: bool = True
    use_binary_feature: bool = True
    pretrain_encoder: bool = True
    pool: str = POOL_LOGIT
    seed: int = 0

    def __post_init__(self):
        for name in ("feature_dim", "interval_count", "encoder_hidden", "embed_dim", "gru_hidden", "attention_hidden"):
            if int(getattr(self, name)) < 1:
                raise InvalidInputError(f"{name} must be a positive integer")
        if self.pool not in (POOL_LOGIT, POOL_HAZARD):
            raise InvalidInputError(f"pool must be {POOL_LOGIT!r} or {POOL_HAZARD!r}")

    @property
    def gru_input(self) -> int:
        return self.embed_dim + int(self.use_binary_feature) + 1

    def to_dict(self) -> dict:
        return asdict(self)


# Ablation ladder, from a plain GRU head up to the full model.
VARIANTS = {
    "base": dict(pretrain_encoder=False, use_mil=False, use_binary_feature=False, use_self_attention=False),
    "pretr": dict(pretrain_encoder=True, use_mil=False, use_binary_feature=False, use_self_attention=False),
    "mil": dict(pretrain_encoder=True, use_mil=True, use_binary_feature=False, use_self_attention=False),
    "mil-bin": dict(pretrain_encoder=True, use_mil=True, use_binary_feature=True, use_self_attention=False),
    "full": dict(pretrain_encoder=True, use_mil=True, use_binary_feature=True, use_self_attention=True),
}


def variant_config(name: str, cfg: ModelConfig) -> ModelConfig:
    try:
        return replace(cfg, **VARIANTS[name])
    except KeyError:
        raise InvalidInputError(f"unknown model variant {name!r}; choose from {sorted(VARIANTS)}") from None


def param_shapes(cfg: ModelConfig) -> dict:
    d, H, e, g, a = cfg.feature_dim, cfg.encoder_hidden, cfg.embed_dim, cfg.gru_hidden, cfg.attention_hidden
    n_in = cfg.gru_input
    return {
        "enc_W1": (d, H), "enc_b1": (H,),
        "enc_W2": (H, e), "enc_b2": (e,),
        "sa_Wq": (e, e), "sa_Wk": (e, e), "sa_Wv": (e, e),
        "gru_Wz": (n_in, g), "gru_Wr": (n_in, g), "gru_Wn": (n_in, g),
        "gru_Uz": (g, g), "gru_Ur": (g, g), "gru_Un": (g, g),
        "gru_bz": (g,), "gru_br": (g,), "gru_bn": (g,),
        "mil_V": (a, g), "mil_w": (a,),
        "out_w": (g,), "out_b": (),
    }


def _fans(name, shape):
    if name == "mil_V":
        return shape[1], shape[0]
    if len(shape) == 1:
        return shape[0], 1
    return shape


def init_params(cfg: ModelConfig) -> dict:
    """Glorot-uniform weights, zero biases, update-gate bias +1."""
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.startswith(("enc_b", "gru_b")) or name == "out_b":
            arr = np.zeros(shape)
        else:
            fan_in, fan_out = _fans(name, shape)
            s = np.sqrt(6.0 / (fan_in + fan_out))
            arr = rng.uniform(-s, s, size=shape)
        params[name] = arr
    params["gru_bz"] = np.ones(cfg.gru_hidden)
    return params


def check_params(params: dict, cfg: ModelConfig) -> None:
    shapes = param_shapes(cfg)
    if set(params) != set(shapes):
        raise InvalidInputError("parameter set does not match the model config")
    for name, shape in shapes.items():
        if np.shape(params[name]) != shape:
            raise InvalidInputError(f"parameter {name} has shape {np.shape(params[name])}, expected {shape}")


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _masked_softmax(scores, mask, axis=-1):
    s = np.where(mask, scores, -np.inf)
    s = s - s.max(axis=axis, keepdims=True)
    ex = np.where(mask, np.exp(s), 0.0)
    return ex / ex.sum(axis=axis, keepdims=True)


def pad_bags(bags, feature_dim=None):
    """Stack ragged ``(P_i, d)`` bags into ``(B, Pmax, d)`` plus an instance mask."""
    bags = [np.asarray(b, dtype=np.float64) for b in bags]
    if not bags:
        raise InvalidInputError("no bags given")
    d = bags[0].shape[1] if feature_dim is None else feature_dim
    pmax = max(b.shape[0] for b in bags)
    X = np.zeros((len(bags), pmax, d))
    mask = np.zeros((len(bags), pmax), dtype=bool)
    for i, b in enumerate(bags):
        if b.ndim != 2 or b.shape[1] != d or b.shape[0] == 0:
            raise InvalidInputError(f"bag {i} has shape {b.shape}; expected (P>0, {d})")
        X[i, : b.shape[0]] = b
        mask[i, : b.shape[0]] = True
    return X, mask


def forward_batch(X, mask, binary_feature, params, cfg: ModelConfig, keep_cache=True):
    """Bag hazards ``(B, k)`` and MIL attention ``(B, P)`` for padded bags.

    Returns ``(hazard, attention, cache)``; ``cache`` is ``None`` unless
    ``keep_cache``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != cfg.feature_dim:
        raise InvalidInputError(f"instance dim {X.shape[-1]} != feature_dim {cfg.feature_dim}")
    B, P, _ = X.shape
    mask = np.asarray(mask, dtype=bool)
    k = cfg.interval_count
    p = params

    H1 = np.tanh(X @ p["enc_W1"] + p["enc_b1"])
    Z0 = np.tanh(H1 @ p["enc_W2"] + p["enc_b2"])

    if cfg.use_self_attention:
        scale = 1.0 / np.sqrt(cfg.embed_dim)
        Q = Z0 @ p["sa_Wq"]
        K = Z0 @ p["sa_Wk"]
        Vv = Z0 @ p["sa_Wv"]
        att_sa = _masked_softmax(Q @ K.transpose(0, 2, 1) * scale, mask[:, None, :])
        Z = Z0 + att_sa @ Vv
    else:
        Q = K = Vv = att_sa = None
        Z = Z0

    if cfg.use_binary_feature:
        bf = np.broadcast_to(np.asarray(binary_feature, dtype=np.float64).reshape(-1, 1, 1), (B, P, 1))
        U = np.concatenate([Z, bf], axis=2)
    else:
        U = Z

    Wz, Wr, Wn = p["gru_Wz"], p["gru_Wr"], p["gru_Wn"]
    xz = U @ Wz[:-1] + p["gru_bz"]
    xr = U @ Wr[:-1] + p["gru_br"]
    xn = U @ Wn[:-1] + p["gru_bn"]
    tau = np.arange(1, k + 1) / k

    g = cfg.gru_hidden
    hs = np.zeros((k + 1, B, P, g))
    zs = np.empty((k, B, P, g))
    rs = np.empty_like(zs)
    ns = np.empty_like(zs)
    h = hs[0]
    for j in range(k):
        z = _sigmoid(xz + tau[j] * Wz[-1] + h @ p["gru_Uz"])
        r = _sigmoid(xr + tau[j] * Wr[-1] + h @ p["gru_Ur"])
        n = np.tanh(xn + tau[j] * Wn[-1] + (r * h) @ p["gru_Un"])
        h = z * h + (1.0 - z) * n
        zs[j], rs[j], ns[j], hs[j + 1] = z, r, n, h

    G = hs[1:].transpose(1, 2, 0, 3)  # (B, P, k, g)
    O = G @ p["out_w"] + p["out_b"]  # (B, P, k)

    if cfg.use_mil:
        gbar = G.mean(axis=2)
        T = np.tanh(gbar @ p["mil_V"].T)
        s = T @ p["mil_w"]
        a = _masked_softmax(s, mask)
    else:
        gbar = T = None
        a = mask / mask.sum(axis=1, keepdims=True)

    if cfg.pool == POOL_LOGIT:
        L = np.einsum("bp,bpk->bk", a, O)
        haz = _sigmoid(L)
        sO = None
    else:
        sO = _sigmoid(O)
        haz = np.einsum("bp,bpk->bk", a, sO)

    if not np.all(np.isfinite(haz)) or not np.all(np.isfinite(a)):
        raise NumericError("non-finite activations in forward pass")

    cache = None
    if keep_cache:
        cache = dict(
            params=params, cfg=cfg, X=X, mask=mask, H1=H1, Z0=Z0, Q=Q, K=K, Vv=Vv, att_sa=att_sa,
            U=U, hs=hs, zs=zs, rs=rs, ns=ns, tau=tau, G=G, O=O, gbar=gbar, T=T, a=a, sO=sO, haz=haz,
        )
    return haz, a, cache


def backward_batch(cache, upstream, params, cfg: ModelConfig) -> dict:
    """Gradients of ``sum(upstream * hazard)`` w.r.t. every parameter."""
    if cache is None or cache["params"] is not params or cache["cfg"] != cfg:
        raise InvalidInputError("cache does not belong to these parameters / config")
    p = params
    c = cache
    dH = np.asarray(upstream, dtype=np.float64)
    if dH.shape != c["haz"].shape:
        raise InvalidInputError(f"upstream shape {dH.shape} != hazard shape {c['haz'].shape}")
    B, P, k, g = c["G"].shape
    a, O, G, mask = c["a"], c["O"], c["G"], c["mask"]
    grads = {name: np.zeros_like(v, dtype=np.float64) for name, v in p.items()}

    if cfg.pool == POOL_LOGIT:
        haz = c["haz"]
        dL = dH * haz * (1.0 - haz)
        dO = a[:, :, None] * dL[:, None, :]
        da = np.einsum("bpk,bk->bp", O, dL)
    else:
        sO = c["sO"]
        dO = a[:, :, None] * dH[:, None, :] * sO * (1.0 - sO)
        da = np.einsum("bpk,bk->bp", sO, dH)

    grads["out_b"] = np.asarray(dO.sum())
    grads["out_w"] = np.einsum("bpk,bpkg->g", dO, G)
    dG = dO[..., None] * p["out_w"]

    if cfg.use_mil:
        ds = a * (da - (a * da).sum(axis=1, keepdims=True))
        ds = np.where(mask, ds, 0.0)
        T = c["T"]
        grads["mil_w"] = np.einsum("bpa,bp->a", T, ds)
        dTpre = ds[..., None] * p["mil_w"] * (1.0 - T * T)
        grads["mil_V"] = np.einsum("bpa,bpg->ag", dTpre, c["gbar"])
        dgbar = dTpre @ p["mil_V"]
        dG = dG + dgbar[:, :, None, :] / k

    # backpropagation through time
    hs, zs, rs, ns, tau = c["hs"], c["zs"], c["rs"], c["ns"], c["tau"]
    Uz, Ur, Un = p["gru_Uz"], p["gru_Ur"], p["gru_Un"]
    dxz = np.zeros((B, P, g))
    dxr = np.zeros_like(dxz)
    dxn = np.zeros_like(dxz)
    dtz = np.zeros(g)
    dtr = np.zeros(g)
    dtn = np.zeros(g)
    dUz = np.zeros((g, g))
    dUr = np.zeros_like(dUz)
    dUn = np.zeros_like(dUz)
    dh_next = np.zeros((B, P, g))
    for j in range(k - 1, -1, -1):
        h_prev, z, r, n = hs[j], zs[j], rs[j], ns[j]
        dh = dG[:, :, j, :] + dh_next
        dz = dh * (h_prev - n)
        dn = dh * (1.0 - z)
        dh_prev = dh * z
        dan = dn * (1.0 - n * n)
        rh = r * h_prev
        drh = dan @ Un.T
        dr = drh * h_prev
        dh_prev += drh * r
        daz = dz * z * (1.0 - z)
        dar = dr * r * (1.0 - r)
        dh_prev += daz @ Uz.T + dar @ Ur.T

        hp2 = h_prev.reshape(-1, g)
        dUz += hp2.T @ daz.reshape(-1, g)
        dUr += hp2.T @ dar.reshape(-1, g)
        dUn += rh.reshape(-1, g).T @ dan.reshape(-1, g)
        dxz += daz
        dxr += dar
        dxn += dan
        dtz += tau[j] * daz.sum(axis=(0, 1))
        dtr += tau[j] * dar.sum(axis=(0, 1))
        dtn += tau[j] * dan.sum(axis=(0, 1))
        dh_next = dh_prev

    U = c["U"]
    n_u = U.shape[2]
    U2 = U.reshape(-1, n_u)
    for gate, dx, dt, dU in (("z", dxz, dtz, dUz), ("r", dxr, dtr, dUr), ("n", dxn, dtn, dUn)):
        dW = np.empty_like(p[f"gru_W{gate}"])
        dW[:-1] = U2.T @ dx.reshape(-1, g)
        dW[-1] = dt
        grads[f"gru_W{gate}"] = dW
        grads[f"gru_U{gate}"] = dU
        grads[f"gru_b{gate}"] = dx.sum(axis=(0, 1))
    dUin = dxz @ p["gru_Wz"][:-1].T + dxr @ p["gru_Wr"][:-1].T + dxn @ p["gru_Wn"][:-1].T
    dZ = dUin[:, :, : cfg.embed_dim]

    Z0 = c["Z0"]
    dZ0 = dZ
    if cfg.use_self_attention:
        att, Q, K, Vv = c["att_sa"], c["Q"], c["K"], c["Vv"]
        scale = 1.0 / np.sqrt(cfg.embed_dim)
        dAtt = dZ @ Vv.transpose(0, 2, 1)
        dVv = att.transpose(0, 2, 1) @ dZ
        dSc = att * (dAtt - (att * dAtt).sum(axis=2, keepdims=True)) * scale
        dQ = dSc @ K
        dK = dSc.transpose(0, 2, 1) @ Q
        Z02 = Z0.reshape(-1, cfg.embed_dim)
        grads["sa_Wq"] = Z02.T @ dQ.reshape(-1, cfg.embed_dim)
        grads["sa_Wk"] = Z02.T @ dK.reshape(-1, cfg.embed_dim)
        grads["sa_Wv"] = Z02.T @ dVv.reshape(-1, cfg.embed_dim)
        dZ0 = dZ + dQ @ p["sa_Wq"].T + dK @ p["sa_Wk"].T + dVv @ p["sa_Wv"].T

    dA2 = dZ0 * (1.0 - Z0 * Z0)
    H1 = c["H1"]
    grads["enc_W2"] = H1.reshape(-1, H1.shape[2]).T @ dA2.reshape(-1, dA2.shape[2])
    grads["enc_b2"] = dA2.sum(axis=(0, 1))
    dA1 = (dA2 @ p["enc_W2"].T) * (1.0 - H1 * H1)
    X = c["X"]
    grads["enc_W1"] = X.reshape(-1, X.shape[2]).T @ dA1.reshape(-1, dA1.shape[2])
    grads["enc_b1"] = dA1.sum(axis=(0, 1))
    return grads


def forward(bag, binary_feature, grid, params, cfg: ModelConfig):
    """Single-bag convenience wrapper: ``(hazard (k,), attention (P,), cache)``."""
    if grid is not None and grid.interval_count != cfg.interval_count:
        raise InvalidInputError("grid length differs from the model's interval_count")
    X, mask = pad_bags([bag], cfg.feature_dim)
    haz, a, cache = forward_batch(X, mask, np.array([binary_feature], dtype=np.float64), params, cfg)
    return haz[0], a[0], cache


def backward(cache, upstream, params, cfg: ModelConfig) -> dict:
    return backward_batch(cache, np.atleast_2d(upstream), params, cfg)


def encode_instances(X, params):
    """Encoder output for a flat ``(N, d)`` instance matrix plus its hidden layer."""
    H1 = np.tanh(X @ params["enc_W1"] + params["enc_b1"])
    Z0 = np.tanh(H1 @ params["enc_W2"] + params["enc_b2"])
    return H1, Z0


def encoder_backward(X, H1, Z0, dZ0, params):
    dA2 = dZ0 * (1.0 - Z0 * Z0)
    dA1 = (dA2 @ params["enc_W2"].T) * (1.0 - H1 * H1)
    return {
        "enc_W2": H1.T @ dA2, "enc_b2": dA2.sum(axis=0),
        "enc_W1": X.T @ dA1, "enc_b1": dA1.sum(axis=0),
    }


def active_parameters(cfg: ModelConfig) -> set:
    """Parameter names that can receive a nonzero gradient under ``cfg``."""
    names = set(param_shapes(cfg))
    if not cfg.use_self_attention:
        names -= {"sa_Wq", "sa_Wk", "sa_Wv"}
    if not cfg.use_mil:
        names -= {"mil_V", "mil_w"}
    return names

