"""Gated fully connected displacement networks.

Each half maps a 2-D coordinate to one displacement component::

    A = tanh(X W1 + b1)          B = tanh(X W2 + b2)
    H = tanh(X Wz_in + bz_in)
    for k in 1..L:
        Z = tanh(H Wz_k + bz_k)
        H = (1 - Z) * A + Z * B
    psi = H W_out + b_out

The input lift ``Wz_in`` (2 x width) and the gates ``Wz_k`` (width x width)
are separate parameters because their shapes differ.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Dual, ParamLayout, ParamVector, Var, seed_inputs, tanh
from .autodiff.jet import jet_affine, jet_from_dual, jet_tanh, jet_tanh_gate
from .errors import ConfigurationError, EvaluationError

CHECKPOINT_FORMAT = "pinnray-checkpoint"
CHECKPOINT_VERSION = 1
INPUT_DIM = 2


@dataclass(frozen=True)
class NetworkConfig:
    layers: int = 4
    width: int = 64
    activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.width < 1:
            raise ConfigurationError(f"layers and width must be >= 1 (got {self.layers}, {self.width})")
        if self.activation != "tanh":
            raise ConfigurationError(f"unsupported activation {self.activation!r}")


def half_layout(config: NetworkConfig) -> ParamLayout:
    w = config.width
    shapes = {
        "W1": (INPUT_DIM, w), "b1": (w,),
        "W2": (INPUT_DIM, w), "b2": (w,),
        "Wz_in": (INPUT_DIM, w), "bz_in": (w,),
    }
    for k in range(1, config.layers + 1):
        shapes[f"Wz_{k}"] = (w, w)
        shapes[f"bz_{k}"] = (w,)
    shapes["W_out"] = (w, 1)
    shapes["b_out"] = (1,)
    return ParamLayout.from_shapes(shapes)


def param_count(layers: int, width: int) -> int:
    """Closed-form parameter count of one half (input dim 2, output dim 1)."""
    return 3 * (INPUT_DIM * width + width) + layers * (width * width + width) + width + 1


def _glorot(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    fan_in, fan_out = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_half(config: NetworkConfig, rng: np.random.Generator) -> ParamVector:
    layout = half_layout(config)
    arrays = {}
    for name, shape in layout.shapes().items():
        arrays[name] = _glorot(rng, shape) if name.startswith("W") else np.zeros(shape)
    return ParamVector.flatten(layout, arrays)


def _finite(x) -> bool:
    if isinstance(x, Dual):
        return _finite(x.val) and _finite(x.tan)
    v = x.value if isinstance(x, Var) else x
    return bool(np.isfinite(np.sum(v)))


def gated_forward(p, X, layers: int):
    """Forward pass of one half.

    ``p`` maps parameter names to arrays or tape Vars; ``X`` is an ``(n, 2)``
    array, Var, or Dual.  Returns an ``(n,)`` result of the same kind.
    """
    A = tanh(X @ p["W1"] + p["b1"])
    B = tanh(X @ p["W2"] + p["b2"])
    H = tanh(X @ p["Wz_in"] + p["bz_in"])
    if not (_finite(A) and _finite(B) and _finite(H)):
        raise EvaluationError("non-finite activation in input layer")
    D = B - A
    for k in range(1, layers + 1):
        Z = tanh(H @ p[f"Wz_{k}"] + p[f"bz_{k}"])
        H = A + Z * D
        if not _finite(H):
            raise EvaluationError(f"non-finite activation in gated layer {k}")
    out = H @ p["W_out"] + p["b_out"]
    if not _finite(out):
        raise EvaluationError("non-finite network output")
    return out[:, 0]


def gated_forward_jet(p, J, layers: int):
    """Same network on a stacked jet ``(3, n, 2)``; returns a ``(3, n)`` jet.

    Uses the fused primitives, so it is the fast path for training.
    """
    A = jet_tanh(jet_affine(J, p["W1"], p["b1"]))
    B = jet_tanh(jet_affine(J, p["W2"], p["b2"]))
    H = jet_tanh(jet_affine(J, p["Wz_in"], p["bz_in"]))
    if not (_finite(A) and _finite(B) and _finite(H)):
        raise EvaluationError("non-finite activation in input layer")
    D = B - A
    for k in range(1, layers + 1):
        H = jet_tanh_gate(jet_affine(H, p[f"Wz_{k}"], p[f"bz_{k}"]), A, D)
        if not _finite(H):
            raise EvaluationError(f"non-finite activation in gated layer {k}")
    out = jet_affine(H, p["W_out"], p["b_out"])
    if not _finite(out):
        raise EvaluationError("non-finite network output")
    return out[:, :, 0]


def seed_jet(points, center, scale) -> np.ndarray:
    d = seed_inputs(points, center, scale)
    return jet_from_dual(d.val, d.tan)


@dataclass
class DisplacementNet:
    """Two independent gated networks for u and v, in millimetres.

    Inputs are mapped to ``(x - center) / scale`` before the first layer.
    """

    config: NetworkConfig
    params_u: ParamVector
    params_v: ParamVector
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    scale: np.ndarray = field(default_factory=lambda: np.ones(2))

    @classmethod
    def init(cls, config: NetworkConfig, bbox=None) -> "DisplacementNet":
        """Glorot-uniform weights, zero biases; ``bbox`` = (xmin, ymin, xmax, ymax)."""
        rng = np.random.default_rng(config.seed)
        pu = init_half(config, rng)
        pv = init_half(config, rng)
        net = cls(config, pu, pv)
        if bbox is not None:
            net.set_normalization(bbox)
        return net

    @classmethod
    def zeros(cls, config: NetworkConfig, bbox=None) -> "DisplacementNet":
        lay = half_layout(config)
        net = cls(config, ParamVector(lay), ParamVector(lay))
        if bbox is not None:
            net.set_normalization(bbox)
        return net

    def set_normalization(self, bbox) -> None:
        xmin, ymin, xmax, ymax = (float(b) for b in bbox)
        self.center = np.array([(xmin + xmax) / 2, (ymin + ymax) / 2])
        half = np.array([(xmax - xmin) / 2, (ymax - ymin) / 2])
        self.scale = np.where(half > 0, half, 1.0)

    @property
    def layout(self) -> ParamLayout:
        """Layout of the joint vector [u-params, v-params]."""
        lay = self.params_u.layout
        return ParamLayout.concat(lay.prefixed("u."), lay.prefixed("v."))

    def flat_params(self) -> ParamVector:
        return ParamVector(self.layout, np.concatenate([self.params_u.data, self.params_v.data]))

    def set_flat_params(self, flat: np.ndarray) -> None:
        n = len(self.params_u)
        flat = np.asarray(flat, dtype=np.float64)
        self.params_u = ParamVector(self.params_u.layout, flat[:n].copy())
        self.params_v = ParamVector(self.params_v.layout, flat[n:].copy())

    def copy(self) -> "DisplacementNet":
        return DisplacementNet(self.config, self.params_u.copy(), self.params_v.copy(),
                               self.center.copy(), self.scale.copy())

    # evaluation -----------------------------------------------------------
    def _normalize(self, pts: np.ndarray) -> np.ndarray:
        return (pts - self.center) / self.scale

    def forward_half(self, which: str, points) -> np.ndarray:
        pv = self.params_u if which == "u" else self.params_v
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return gated_forward(pv.unflatten(), self._normalize(pts), self.config.layers)

    def displacement(self, x, y):
        """(u, v) at scalar or array coordinates."""
        scalar = np.ndim(x) == 0
        pts = np.column_stack([np.ravel(x), np.ravel(y)]).astype(np.float64)
        u = self.forward_half("u", pts)
        v = self.forward_half("v", pts)
        if scalar:
            return float(u[0]), float(v[0])
        return u, v

    def eval_half_with_input_derivs(self, which: str, points):
        """Values and exact d/dx, d/dy of one half at ``points`` (n, 2)."""
        pv = self.params_u if which == "u" else self.params_v
        X = seed_inputs(points, self.center, self.scale)
        d = gated_forward(pv.unflatten(), X, self.config.layers)
        return d.val, d.tan[0], d.tan[1]

    def jacobian(self, points):
        """u, v and the displacement gradient at ``points``."""
        u, ux, uy = self.eval_half_with_input_derivs("u", points)
        v, vx, vy = self.eval_half_with_input_derivs("v", points)
        return u, v, ux, uy, vx, vy

    # persistence ------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "normalization": {"center": self.center.tolist(), "scale": self.scale.tolist()},
            "params_u": self.params_u.data.tolist(),
            "params_v": self.params_v.data.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DisplacementNet":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ConfigurationError("not a pinnray checkpoint")
        if d.get("version") != CHECKPOINT_VERSION:
            raise ConfigurationError(f"unsupported checkpoint version {d.get('version')}")
        config = NetworkConfig(**d["config"])
        lay = half_layout(config)
        return cls(
            config,
            ParamVector(lay, np.array(d["params_u"], dtype=np.float64)),
            ParamVector(lay, np.array(d["params_v"], dtype=np.float64)),
            np.array(d["normalization"]["center"], dtype=np.float64),
            np.array(d["normalization"]["scale"], dtype=np.float64),
        )

    def save(self, path) -> None:
        # json writes floats with repr, which round-trips float64 exactly
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "DisplacementNet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def eval_with_input_derivs(net: DisplacementNet, which: str, point) -> tuple[float, float, float]:
    """psi(x, y) and both first spatial partials at a single point."""
    val, dx, dy = net.eval_half_with_input_derivs(which, np.asarray(point, dtype=np.float64).reshape(1, 2))
    return float(val[0]), float(dx[0]), float(dy[0])
