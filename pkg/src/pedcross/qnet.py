"""Dueling Q-network: a two-hidden-layer ReLU MLP with value and advantage
heads, written directly in numpy with manual backpropagation."""
from __future__ import annotations

import numpy as np

PARAM_NAMES = ("w1", "b1", "w2", "b2", "wv", "bv", "wa", "ba")
N_ACTIONS = 2


def _shapes(in_dim: int, h1: int, h2: int) -> dict[str, tuple[int, ...]]:
    return {"w1": (in_dim, h1), "b1": (h1,), "w2": (h1, h2), "b2": (h2,),
            "wv": (h2, 1), "bv": (1,), "wa": (h2, N_ACTIONS), "ba": (N_ACTIONS,)}


def _views(flat: np.ndarray, shapes) -> dict[str, np.ndarray]:
    out, i = {}, 0
    for k in PARAM_NAMES:
        n = int(np.prod(shapes[k]))
        out[k] = flat[i:i + n].reshape(shapes[k])
        i += n
    return out


class QNet:
    """All weights live in one flat vector ``theta``; ``w1``, ``b1``, ...
    are views into it, so optimisers update a single array."""

    def __init__(self, w1, b1, w2, b2, wv, bv, wa, ba, variant: str = ""):
        arrays = dict(w1=w1, b1=b1, w2=w2, b2=b2, wv=wv, bv=bv, wa=wa, ba=ba)
        in_dim, h1 = np.shape(w1)
        h2 = np.shape(w2)[1]
        self.shapes = _shapes(in_dim, h1, h2)
        for k in PARAM_NAMES:
            if np.shape(arrays[k]) != self.shapes[k]:
                raise ValueError(f"{k} has shape {np.shape(arrays[k])}, expected {self.shapes[k]}")
        self.theta = np.concatenate([np.asarray(arrays[k], dtype=float).ravel()
                                     for k in PARAM_NAMES])
        self.__dict__.update(_views(self.theta, self.shapes))
        self.variant = variant

    @classmethod
    def init(cls, in_dim: int, hidden=(512, 256), rng: np.random.Generator | None = None,
             variant: str = "") -> "QNet":
        rng = rng or np.random.default_rng(0)
        h1, h2 = hidden

        def layer(n_in, n_out):
            lim = 1.0 / np.sqrt(n_in)
            return rng.uniform(-lim, lim, (n_in, n_out)), rng.uniform(-lim, lim, n_out)

        w1, b1 = layer(in_dim, h1)
        w2, b2 = layer(h1, h2)
        wv, bv = layer(h2, 1)
        wa, ba = layer(h2, N_ACTIONS)
        return cls(w1, b1, w2, b2, wv, bv, wa, ba, variant)

    @classmethod
    def zeros(cls, in_dim: int, hidden=(8, 8), variant: str = "") -> "QNet":
        sh = _shapes(in_dim, *hidden)
        return cls(*(np.zeros(sh[k]) for k in PARAM_NAMES), variant=variant)

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> tuple[int, int]:
        return self.w1.shape[1], self.w2.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def copy(self) -> "QNet":
        return QNet(*(getattr(self, k) for k in PARAM_NAMES), variant=self.variant)

    def load_from(self, other: "QNet") -> None:
        self.theta[...] = other.theta

    def forward(self, obs: np.ndarray, cache: bool = False):
        x = np.asarray(obs, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.in_dim:
            raise ValueError(f"observation has {x.shape[1]} features, net expects {self.in_dim}")
        z1 = x @ self.w1
        z1 += self.b1
        h1 = np.maximum(z1, 0.0)
        z2 = h1 @ self.w2
        z2 += self.b2
        h2 = np.maximum(z2, 0.0)
        v = h2 @ self.wv + self.bv
        a = h2 @ self.wa + self.ba
        # two actions: mean advantage is their midpoint
        q = a + (v - 0.5 * (a[:, :1] + a[:, 1:]))
        if cache:
            return q, (x, z1, h1, z2, h2)
        return q

    def backward(self, dq: np.ndarray, cache) -> np.ndarray:
        """Flat gradient of a scalar loss given ``dq = dL/dQ`` (batch x actions).
        Use ``unflatten`` for per-layer views."""
        x, z1, h1, z2, h2 = cache
        g = np.empty_like(self.theta)
        gv = _views(g, self.shapes)
        dv = dq.sum(axis=1, keepdims=True)
        da = dq - 0.5 * dv
        np.matmul(h2.T, dv, out=gv["wv"])
        gv["bv"][...] = dv.sum(0)
        np.matmul(h2.T, da, out=gv["wa"])
        gv["ba"][...] = da.sum(0)
        dz2 = dv @ self.wv.T + da @ self.wa.T
        dz2 *= z2 > 0
        np.matmul(h1.T, dz2, out=gv["w2"])
        gv["b2"][...] = dz2.sum(0)
        dz1 = dz2 @ self.w2.T
        dz1 *= z1 > 0
        np.matmul(x.T, dz1, out=gv["w1"])
        gv["b1"][...] = dz1.sum(0)
        return g

    def unflatten(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        return _views(flat, self.shapes)


def q_forward(net: QNet, obs) -> tuple[float, float]:
    q = net.forward(obs)[0]
    return float(q[0]), float(q[1])


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, net: QNet, grad: np.ndarray) -> None:
        net.theta -= self.lr * grad


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, net: QNet, grad: np.ndarray) -> None:
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grad * grad
        step = self.lr * np.sqrt(1 - self.beta2 ** self.t) / (1 - self.beta1 ** self.t)
        net.theta -= step * self.m / (np.sqrt(self.v) + self.eps)


def make_optimizer(name: str, lr: float):
    if name == "sgd":
        return SGD(lr)
    if name == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {name!r}")


# ---- text weight format ---------------------------------------------------
# line 1: variant,in_dim,h1,h2
# then one line per matrix row (biases are single rows), in PARAM_NAMES order

def dumps_weights(net: QNet) -> str:
    h1, h2 = net.hidden
    lines = [f"{net.variant},{net.in_dim},{h1},{h2}"]
    for k in PARAM_NAMES:
        arr = np.atleast_2d(getattr(net, k))
        for row in arr:
            lines.append(",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def loads_weights(text: str) -> QNet:
    lines = text.strip("\n").split("\n")
    head = lines[0].split(",")
    if len(head) != 4:
        raise ValueError("weight header must be variant,in_dim,h1,h2")
    variant = head[0]
    in_dim, h1, h2 = (int(x) for x in head[1:])
    shapes = _shapes(in_dim, h1, h2)
    rows = iter(lines[1:])
    arrays = {}
    for k in PARAM_NAMES:
        shape = shapes[k]
        n_rows = shape[0] if len(shape) == 2 else 1
        data = [[float(x) for x in next(rows).split(",")] for _ in range(n_rows)]
        arrays[k] = np.array(data).reshape(shape)
    if next(rows, None) is not None:
        raise ValueError("trailing data in weight file")
    return QNet(**arrays, variant=variant)
