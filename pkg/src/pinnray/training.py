"""Energy loss, boundary/assimilation penalties and Adam training.

Total loss::

    L = L_pde + lambda_bc * L_bc + lambda_asm * L_asm

``L_pde`` is the mean strain-energy density over the collocation points (no
external work term: the actuation enters as a prescribed displacement inside
``L_bc``).  ``L_bc`` is the mean squared displacement on the fixed set plus
the mean squared residual on the forced set; ``L_asm`` is the mean squared
residual at the assimilated markers.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from ._alloc import tune_allocator
from .autodiff import NonFiniteError, ParamVector, grad_params
from .elasticity import MaterialModel, energy_density, strain_from_jacobian, stress_from_strain
from .errors import ConfigurationError, DivergenceError, EvaluationError
from .network import DisplacementNet, gated_forward, gated_forward_jet, seed_jet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossWeights:
    lambda_bc: float = 1000.0
    lambda_asm: float = 1000.0

    def __post_init__(self):
        for name in ("lambda_bc", "lambda_asm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigurationError(f"{name} must be finite and non-negative, got {v}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60000
    learning_rate: float = 1e-3
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    assimilation_enabled: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    log_every: int = 100
    area_scaling: bool = False

    def __post_init__(self):
        if isinstance(self.weights, dict):
            object.__setattr__(self, "weights", LossWeights(**self.weights))
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.log_every < 1:
            raise ConfigurationError("log_every must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls.from_dict(json.loads(text))


def _pts(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float64).reshape(-1, 2)


@dataclass
class PointSets:
    collocation: np.ndarray
    fixed: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    forced: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    forced_disp: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    assimilation: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    assimilation_disp: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    domain_area: float | None = None

    def __post_init__(self):
        for name in ("collocation", "fixed", "forced", "forced_disp", "assimilation", "assimilation_disp"):
            arr = _pts(getattr(self, name))
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"{name} contains non-finite values")
            setattr(self, name, arr)
        if len(self.forced) != len(self.forced_disp):
            raise ConfigurationError("one target displacement per forced point is required")
        if len(self.assimilation) != len(self.assimilation_disp):
            raise ConfigurationError("one measured displacement per assimilation point is required")


@dataclass(frozen=True)
class LossRecord:
    epoch: int
    l_pde: float
    l_bc: float
    l_asm: float
    l_total: float


def _split(params: dict) -> tuple[dict, dict]:
    pu = {k[2:]: v for k, v in params.items() if k.startswith("u.")}
    pv = {k[2:]: v for k, v in params.items() if k.startswith("v.")}
    return pu, pv


def _mean_sq_residual(u, v, target):
    """mean over points of (tu - u)^2 + (tv - v)^2."""
    du = target[:, 0] - u
    dv = target[:, 1] - v
    return (du * du + dv * dv).mean()


def _loss_terms(pu, pv, net: DisplacementNet, sets: PointSets, mat: MaterialModel,
                use_bc: bool, use_asm: bool, area_scaling: bool = False):
    """(l_pde, l_bc, l_asm) built from arrays or tape Vars; absent terms are 0.0."""
    layers = net.config.layers
    l_pde = 0.0
    if len(sets.collocation):
        J = seed_jet(sets.collocation, net.center, net.scale)
        ju = gated_forward_jet(pu, J, layers)
        jv = gated_forward_jet(pv, J, layers)
        eps = strain_from_jacobian(ju[1], ju[2], jv[1], jv[2])
        l_pde = energy_density(stress_from_strain(eps, mat), eps).mean()
        if area_scaling:
            if sets.domain_area is None:
                raise ConfigurationError("area scaling requires PointSets.domain_area")
            l_pde = l_pde * sets.domain_area

    groups = []
    if use_bc:
        groups += [("fixed", sets.fixed, None), ("forced", sets.forced, sets.forced_disp)]
    if use_asm:
        groups.append(("asm", sets.assimilation, sets.assimilation_disp))
    groups = [g for g in groups if len(g[1])]
    terms = {"fixed": 0.0, "forced": 0.0, "asm": 0.0}
    if groups:
        pts = np.concatenate([g[1] for g in groups])
        Xb = (pts - net.center) / net.scale
        ub = gated_forward(pu, Xb, layers)
        vb = gated_forward(pv, Xb, layers)
        start = 0
        for name, p, target in groups:
            sl = slice(start, start + len(p))
            start += len(p)
            if target is None:
                uu, vv = ub[sl], vb[sl]
                terms[name] = (uu * uu + vv * vv).mean()
            else:
                terms[name] = _mean_sq_residual(ub[sl], vb[sl], target)
    return l_pde, terms["fixed"] + terms["forced"], terms["asm"]


def _scalar(x) -> float:
    return float(getattr(x, "value", x))


def _params_arrays(net: DisplacementNet):
    return net.params_u.unflatten(), net.params_v.unflatten()


def loss_pde(net: DisplacementNet, collocation, mat: MaterialModel) -> float:
    if len(_pts(collocation)) == 0:
        raise ConfigurationError("collocation set is empty")
    pu, pv = _params_arrays(net)
    sets = PointSets(collocation)
    return _scalar(_loss_terms(pu, pv, net, sets, mat, False, False)[0])


def loss_bc(net: DisplacementNet, fixed, forced=None, forced_disp=None) -> float:
    fixed = _pts(fixed)
    forced = _pts(forced if forced is not None else np.zeros((0, 2)))
    forced_disp = _pts(forced_disp if forced_disp is not None else np.zeros((0, 2)))
    if len(fixed) == 0 and len(forced) == 0:
        raise ConfigurationError("boundary loss needs fixed or forced points")
    pu, pv = _params_arrays(net)
    sets = PointSets(np.zeros((0, 2)), fixed, forced, forced_disp)
    return _scalar(_loss_terms(pu, pv, net, sets, MaterialModel(), True, False)[1])


def loss_asm(net: DisplacementNet, points, measured) -> float:
    points = _pts(points)
    if len(points) == 0:
        raise ConfigurationError("assimilation is enabled but no marker data was given")
    pu, pv = _params_arrays(net)
    sets = PointSets(np.zeros((0, 2)), assimilation=points, assimilation_disp=measured)
    return _scalar(_loss_terms(pu, pv, net, sets, MaterialModel(), False, True)[2])


def combine(l_pde: float, l_bc: float, l_asm: float, weights: LossWeights,
            assimilation_enabled: bool, epoch: int = 0) -> LossRecord:
    total = l_pde + weights.lambda_bc * l_bc
    if assimilation_enabled:
        total = total + weights.lambda_asm * l_asm
    return LossRecord(epoch, float(l_pde), float(l_bc), float(l_asm), float(total))


def _check_sets(sets: PointSets, assimilation_enabled: bool) -> None:
    if len(sets.collocation) == 0:
        raise ConfigurationError("collocation set is empty")
    if len(sets.fixed) == 0 and len(sets.forced) == 0:
        raise ConfigurationError("boundary loss needs fixed or forced points")
    if assimilation_enabled and len(sets.assimilation) == 0:
        raise ConfigurationError("assimilation is enabled but no marker data was given")


def total_loss(net: DisplacementNet, sets: PointSets, mat: MaterialModel, weights: LossWeights,
               assimilation_enabled: bool, area_scaling: bool = False) -> LossRecord:
    _check_sets(sets, assimilation_enabled)
    pu, pv = _params_arrays(net)
    l_pde, l_bc, l_asm = _loss_terms(pu, pv, net, sets, mat, True, assimilation_enabled, area_scaling)
    return combine(_scalar(l_pde), _scalar(l_bc), _scalar(l_asm), weights, assimilation_enabled)


def loss_and_grad(net: DisplacementNet, sets: PointSets, mat: MaterialModel, weights: LossWeights,
                  assimilation_enabled: bool, area_scaling: bool = False):
    """(LossRecord, gradient ParamVector over the joint [u, v] layout)."""
    parts = {}

    def fn(params):
        pu, pv = _split(params)
        l_pde, l_bc, l_asm = _loss_terms(pu, pv, net, sets, mat, True, assimilation_enabled, area_scaling)
        parts.update(l_pde=_scalar(l_pde), l_bc=_scalar(l_bc), l_asm=_scalar(l_asm))
        total = l_pde + weights.lambda_bc * l_bc
        if assimilation_enabled:
            total = total + weights.lambda_asm * l_asm
        return total

    _, grad = grad_params(fn, net.flat_params())
    rec = combine(parts["l_pde"], parts["l_bc"], parts["l_asm"], weights, assimilation_enabled)
    return rec, grad


def term_gradients(net: DisplacementNet, sets: PointSets, mat: MaterialModel,
                   area_scaling: bool = False) -> dict[str, tuple[float, ParamVector]]:
    """Value and parameter gradient of each unweighted loss term separately."""
    out = {}
    for k, name in enumerate(("l_pde", "l_bc", "l_asm")):
        if name == "l_asm" and len(sets.assimilation) == 0:
            continue

        def fn(params, k=k):
            pu, pv = _split(params)
            return _loss_terms(pu, pv, net, sets, mat, k == 1, k == 2, area_scaling)[k]

        out[name] = grad_params(fn, net.flat_params())
    return out


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> np.ndarray:
    """One bias-corrected Adam update; updates ``state`` in place, returns new params."""
    grad = np.asarray(grad, dtype=np.float64)
    if state.m.shape != params.shape or grad.shape != params.shape:
        raise ValueError("optimizer state, gradient and parameters must have the same shape")
    if not np.all(np.isfinite(grad)):
        bad = int(np.flatnonzero(~np.isfinite(grad))[0])
        raise NonFiniteError(f"non-finite gradient at parameter index {bad}")
    state.step += 1
    state.m *= beta1
    state.m += (1.0 - beta1) * grad
    state.v *= beta2
    state.v += (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.step)
    v_hat = state.v / (1.0 - beta2 ** state.step)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps)


def train(net: DisplacementNet, sets: PointSets, mat: MaterialModel, config: TrainConfig,
          callback=None) -> tuple[DisplacementNet, list[LossRecord]]:
    """Full-batch Adam: one gradient step per epoch over every point.

    Records a :class:`LossRecord` at epoch 0 (before any step), every
    ``log_every`` epochs, and after the final step.  The input network is not
    modified.
    """
    _check_sets(sets, config.assimilation_enabled)
    tune_allocator()
    net = net.copy()
    theta = net.flat_params().data.copy()
    state = AdamState.zeros(theta.size)
    layout = net.layout
    history: list[LossRecord] = []
    last_finite = None
    t0 = time.perf_counter()
    for epoch in range(config.epochs + 1):
        net.set_flat_params(theta)
        try:
            rec, grad = loss_and_grad(net, sets, mat, config.weights, config.assimilation_enabled,
                                      config.area_scaling)
        except (NonFiniteError, EvaluationError) as e:
            raise DivergenceError(f"training diverged at epoch {epoch}: {e}", last_finite, history) from e
        rec = LossRecord(epoch, rec.l_pde, rec.l_bc, rec.l_asm, rec.l_total)
        if not math.isfinite(rec.l_total):
            raise DivergenceError(f"non-finite loss at epoch {epoch}", last_finite, history)
        last_finite = epoch
        if epoch % config.log_every == 0 or epoch == config.epochs:
            history.append(rec)
            log.debug("epoch %d total %.6g pde %.6g bc %.6g asm %.6g (%.1fs)", epoch, rec.l_total,
                      rec.l_pde, rec.l_bc, rec.l_asm, time.perf_counter() - t0)
            if callback is not None:
                callback(rec)
        if epoch == config.epochs:
            break
        try:
            theta = adam_step(theta, grad.data, state, config.learning_rate,
                              config.beta1, config.beta2, config.eps)
        except NonFiniteError as e:
            name, idx = layout.locate(int(str(e).rsplit(" ", 1)[-1]))
            raise DivergenceError(f"non-finite gradient for {name}{list(idx)} at epoch {epoch}",
                                  last_finite, history) from e
    net.set_flat_params(theta)
    return net, history


def write_history(history: Sequence[LossRecord], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "l_pde", "l_bc", "l_asm", "l_total"])
        for r in history:
            w.writerow([r.epoch, repr(r.l_pde), repr(r.l_bc), repr(r.l_asm), repr(r.l_total)])


def read_history(path) -> list[LossRecord]:
    with Path(path).open(newline="") as fh:
        return [LossRecord(int(r["epoch"]), float(r["l_pde"]), float(r["l_bc"]), float(r["l_asm"]),
                           float(r["l_total"])) for r in csv.DictReader(fh)]


@dataclass
class GridResult:
    learning_rate: float
    weight: float
    terminal_loss: float | None
    mae: float | None
    failed: bool = False
    error: str | None = None


def grid_search(net0: DisplacementNet, sets: PointSets, mat: MaterialModel, base_config: TrainConfig,
                lr_exponents: Sequence[int] = (-4, -3, -2), weight_exponents: Sequence[int] = (-1, 0, 1, 2, 3),
                markers=None, marker_disp=None) -> list[GridResult]:
    """Train one model per (learning rate, weight) cell, both weights set to 10^k.

    Rows come back sorted by terminal total loss (failed cells last).  ``mae``
    is the displacement MAE at the markers when marker data is given.
    """
    from .evaluation import mean_absolute_error

    if not lr_exponents or not weight_exponents:
        raise ConfigurationError("grid exponent lists must be non-empty")
    rows = []
    for ke in lr_exponents:
        for kw in weight_exponents:
            lr, w = 10.0 ** ke, 10.0 ** kw
            cfg = TrainConfig(**{**asdict(base_config), "learning_rate": lr,
                                 "weights": LossWeights(w, w)})
            try:
                net, hist = train(net0, sets, mat, cfg)
            except DivergenceError as e:
                rows.append(GridResult(lr, w, None, None, True, str(e)))
                continue
            mae = None
            if markers is not None and marker_disp is not None:
                u, v = net.displacement(np.asarray(markers)[:, 0], np.asarray(markers)[:, 1])
                mae = mean_absolute_error(np.column_stack([u, v]), marker_disp, "disp")
            rows.append(GridResult(lr, w, hist[-1].l_total, mae))
    rows.sort(key=lambda r: (r.failed, r.terminal_loss if r.terminal_loss is not None else math.inf,
                             r.learning_rate, r.weight))
    return rows
