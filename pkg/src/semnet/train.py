"""Adam training loop, model persistence and banded evaluation."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import checkpoint
from .blocks import SemNet, SemNetConfig, composite, masked_input
from .masks import MaskSpec, generate_mask
from .metrics import l1_error, masked_l1_loss, psnr, ssim
from .tensor import Tensor, no_grad

EVAL_BANDS = ((0.0, 0.2), (0.2, 0.4), (0.4, 0.6))


class Adam:
    def __init__(self, params: Sequence[Tensor], lr: float = 2e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(p.shape) for p in self.params]
        self.v = [np.zeros(p.shape) for p in self.params]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainState:
    model: SemNet
    optimizer: Adam
    seed: int = 0
    w_hole: float = 6.0
    w_valid: float = 1.0
    losses: list[float] = field(default_factory=list)

    @classmethod
    def create(cls, config: SemNetConfig, seed: int = 0, lr: float = 2e-4, **kw) -> "TrainState":
        model = SemNet(config, seed=seed)
        return cls(model, Adam(model.parameters(), lr=lr), seed=seed, **kw)

    @property
    def step(self) -> int:
        return self.optimizer.t


def train_step(state: TrainState, batch: tuple[np.ndarray, np.ndarray]) -> tuple[TrainState, float]:
    """One forward/backward/Adam update on ``(images (B,3,H,W), masks (B,1,H,W))``."""
    images, masks = batch
    images = np.asarray(images, dtype=np.float64)
    masks = np.asarray(masks, dtype=np.float64)
    if images.ndim != 4 or masks.shape != (images.shape[0], 1) + images.shape[2:]:
        raise ValueError(f"train_step: images {images.shape} and masks {masks.shape} are inconsistent")
    model = state.model
    model.zero_grad()
    pred = model(masked_input(Tensor(images), Tensor(masks)))
    loss = masked_l1_loss(pred, images, masks, state.w_hole, state.w_valid)
    value = loss.item()
    if not math.isfinite(value):
        raise FloatingPointError(f"non-finite loss at step {state.step}")
    loss.backward()
    state.optimizer.step()
    state.losses.append(value)
    return state, value


# ---------------------------------------------------------------------------
# persistence


def model_arrays(model: SemNet) -> dict[str, np.ndarray]:
    return {k: p.data for k, p in model.named_parameters()}


def save_model(path, model: SemNet) -> None:
    checkpoint.save(path, {"kind": "model", **model.config.to_items()}, model_arrays(model))


def load_model(path) -> SemNet:
    config, arrays = checkpoint.load(path)
    model = SemNet(SemNetConfig.from_items(config))
    # train-state files carry optimizer moments alongside the weights
    checkpoint.assign(model_arrays(model), {k: v for k, v in arrays.items() if not k.startswith("adam.")})
    return model


def save_train_state(path, state: TrainState) -> None:
    opt = state.optimizer
    meta = {"kind": "train_state", **state.model.config.to_items(), "step": str(opt.t),
            "lr": repr(opt.lr), "beta1": repr(opt.beta1), "beta2": repr(opt.beta2), "eps": repr(opt.eps),
            "seed": str(state.seed), "w_hole": repr(state.w_hole), "w_valid": repr(state.w_valid)}
    arrays = model_arrays(state.model)
    names = list(arrays)
    for name, m, v in zip(names, opt.m, opt.v):
        arrays[f"adam.m.{name}"] = m
        arrays[f"adam.v.{name}"] = v
    checkpoint.save(path, meta, arrays)


def load_train_state(path) -> TrainState:
    meta, arrays = checkpoint.load(path)
    model = SemNet(SemNetConfig.from_items(meta))
    named = model_arrays(model)
    checkpoint.assign(named, {k: v for k, v in arrays.items() if not k.startswith("adam.")})
    opt = Adam(model.parameters(), lr=float(meta["lr"]), beta1=float(meta["beta1"]),
               beta2=float(meta["beta2"]), eps=float(meta["eps"]))
    opt.t = int(meta["step"])
    for name, m, v in zip(named, opt.m, opt.v):
        checkpoint.assign({name: m}, {name: arrays[f"adam.m.{name}"]})
        checkpoint.assign({name: v}, {name: arrays[f"adam.v.{name}"]})
    return TrainState(model, opt, seed=int(meta["seed"]),
                      w_hole=float(meta["w_hole"]), w_valid=float(meta["w_valid"]))


# ---------------------------------------------------------------------------
# evaluation


def generator_band(band: tuple[float, float]) -> tuple[float, float]:
    """Open band used for mask generation; a zero lower edge becomes 0.01%."""
    lo, hi = band
    return (max(lo, 1e-4), hi)


def inpaint_array(model: SemNet, image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Composited (3, H, W) output for one image and (1, H, W) mask."""
    with no_grad():
        out = model.inpaint(Tensor(image[None]), Tensor(mask[None]))
    return out.data[0]


@dataclass
class BandMetrics:
    band: tuple[float, float]
    psnr: float
    ssim: float
    l1: float
    count: int

    @property
    def label(self) -> str:
        lo, hi = self.band
        return f"{lo:g}-{hi:g}"


def evaluate(model: SemNet | None, images: Sequence[np.ndarray], bands=EVAL_BANDS, seed: int = 0,
             mask_kind: str = "random-walk-strokes", predictor=None) -> list[BandMetrics]:
    """Per-band mean PSNR/SSIM/L1(x100) of composited outputs.

    Image ``i`` in band ``b`` gets the mask seeded by ``(seed, b, i)``.  A
    custom ``predictor(image, mask) -> output`` replaces the model.
    """
    if len(images) == 0:
        raise ValueError("evaluate: empty dataset")
    if predictor is None:
        if model is None:
            raise ValueError("evaluate: need a model or a predictor")
        predictor = lambda img, m: inpaint_array(model, img, m)  # noqa: E731
    rows = []
    for b, band in enumerate(bands):
        ps, ss, ls = [], [], []
        for i, img in enumerate(images):
            spec = MaskSpec(mask_kind, generator_band(band), seed=int(np.random.SeedSequence([seed, b, i]).generate_state(1)[0]))
            mask = generate_mask(spec, img.shape[1], img.shape[2])[None]
            out = predictor(img, mask)
            ps.append(psnr(out, img))
            ss.append(ssim(out, img))
            ls.append(l1_error(out, img))
        rows.append(BandMetrics(band, float(np.mean(ps)), float(np.mean(ss)), float(np.mean(ls)), len(images)))
    return rows


def write_metrics_csv(path, rows: Sequence[BandMetrics]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["band", "psnr", "ssim", "l1", "count"])
        for r in rows:
            w.writerow([r.label, repr(r.psnr), repr(r.ssim), repr(r.l1), r.count])
