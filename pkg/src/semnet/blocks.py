"""Snake Mamba block, spatially-enhanced feedforward network, SEM block and
the U-shaped inpainting network built from them."""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from . import functional as F
from .nn import Conv2d, LayerNorm, Module
from .sbdm import PositionalEmbedding, SnakeSequence, pe_apply, sbdm_fuse, snake_flatten, snake_unflatten
from .ssm import MambaBlock
from .tensor import Tensor


@dataclass
class SemNetConfig:
    stages: int = 4
    base_channels: int = 16
    blocks_per_stage: list[int] = field(default_factory=lambda: [1, 1, 1, 2])
    ssm_state: int = 16
    expansion: int = 2
    input_channels: int = 4
    output_channels: int = 3
    pool_factor: int = 4
    use_pe: bool = True

    def __post_init__(self):
        self.blocks_per_stage = [int(b) for b in self.blocks_per_stage]
        if self.stages < 1:
            raise ValueError("stages must be >= 1")
        if len(self.blocks_per_stage) != self.stages:
            raise ValueError(f"blocks_per_stage has {len(self.blocks_per_stage)} entries, "
                             f"expected one per stage ({self.stages})")
        if self.base_channels < 2 or self.base_channels % 2:
            raise ValueError("base_channels must be an even number >= 2")
        if min(self.blocks_per_stage) < 0 or self.ssm_state < 1 or self.expansion < 1:
            raise ValueError("blocks, state size and expansion must be positive")

    @classmethod
    def for_stages(cls, stages: int, **kw) -> "SemNetConfig":
        """Config with the default block layout: one per stage, two at the latent."""
        kw.setdefault("blocks_per_stage", [1] * (stages - 1) + [2])
        return cls(stages=stages, **kw)

    @property
    def divisor(self) -> int:
        return 2 ** (self.stages - 1)

    def stage_width(self, k: int) -> int:
        return self.base_channels * 2 ** k

    def stage_pool(self, k: int) -> int:
        return max(1, self.pool_factor >> k)

    def to_items(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                out[f.name] = ",".join(str(i) for i in v)
            elif isinstance(v, bool):
                out[f.name] = "1" if v else "0"
            else:
                out[f.name] = str(v)
        return out

    @classmethod
    def from_items(cls, items: dict[str, str]) -> "SemNetConfig":
        kw = {}
        for f in fields(cls):
            if f.name not in items:
                continue
            raw = items[f.name]
            if f.name == "blocks_per_stage":
                kw[f.name] = [int(s) for s in raw.split(",") if s.strip()]
            elif f.name == "use_pe":
                kw[f.name] = raw.strip().lower() in ("1", "true", "yes")
            else:
                kw[f.name] = int(raw)
        return cls(**kw)


class SnakeMambaBlock(Module):
    """Horizontal and vertical snake sequences, each with its own Mamba mixer,
    restored to 2-D and summed."""

    def __init__(self, rng: np.random.Generator, width: int, state: int = 16,
                 expansion: int = 2, use_pe: bool = True):
        self.mamba_h = MambaBlock(rng, width, expansion, state)
        self.mamba_v = MambaBlock(rng, width, expansion, state)
        self.use_pe = use_pe

    def _branch(self, h: Tensor, direction: str, mixer) -> Tensor:
        seq = snake_flatten(h, direction)
        if self.use_pe:
            seq = pe_apply(seq, PositionalEmbedding(len(seq), h.shape[1]))
        mixed = mixer(seq.values)
        return snake_unflatten(SnakeSequence(mixed, direction, seq.origin_shape))

    def forward(self, h: Tensor) -> Tensor:
        return sbdm_fuse(self._branch(h, "horizontal", self.mamba_h),
                         self._branch(h, "vertical", self.mamba_v))


def smb_forward(h_in: Tensor, block: SnakeMambaBlock) -> Tensor:
    return block(h_in)


class SEFN(Module):
    """Gated feedforward whose gate also sees a pooled view of the block input.

    ``h1 = dw(pw(LN(h_after)))`` and ``h2 = dw'(pw'(LN(h_after)))``;
    ``gamma = up(f(pool(h_before)))`` with ``f`` two conv-LN-relu stages;
    ``out = gelu(dw_g(pw_g([gamma, h1]))) * h2``.
    """

    def __init__(self, rng: np.random.Generator, width: int, pool: int = 4):
        self.norm = LayerNorm(width)
        self.pw1 = Conv2d(rng, width, width, 1)
        self.dw1 = Conv2d(rng, width, width, 3, depthwise=True)
        self.pw2 = Conv2d(rng, width, width, 1)
        self.dw2 = Conv2d(rng, width, width, 3, depthwise=True)
        self.f_conv1 = Conv2d(rng, width, width, 3)
        self.f_norm1 = LayerNorm(width)
        self.f_conv2 = Conv2d(rng, width, width, 3)
        self.f_norm2 = LayerNorm(width)
        self.gate_pw = Conv2d(rng, 2 * width, width, 1)
        self.gate_dw = Conv2d(rng, width, width, 3, depthwise=True)
        self.pool = pool

    def _effective_pool(self, H: int, W: int) -> int:
        p = self.pool
        while p > 1 and (H % p or W % p):
            p //= 2
        return p

    def spatial_indicator(self, h_before: Tensor) -> Tensor:
        p = self._effective_pool(*h_before.shape[2:])
        g = F.avg_pool2d(h_before, p)
        g = F.relu(self.f_norm1(self.f_conv1(g)))
        g = F.relu(self.f_norm2(self.f_conv2(g)))
        return F.upsample_nearest(g, p)

    def forward(self, h_after: Tensor, h_before: Tensor) -> Tensor:
        if h_after.shape != h_before.shape:
            raise ValueError(f"SEFN: h_after {h_after.shape} and h_before {h_before.shape} differ")
        n = self.norm(h_after)
        h1 = self.dw1(self.pw1(n))
        h2 = self.dw2(self.pw2(n))
        gamma = self.spatial_indicator(h_before)
        gate = F.gelu(self.gate_dw(self.gate_pw(F.concat([gamma, h1], axis=1))))
        return F.mul(gate, h2)


def sefn_forward(h_after: Tensor, h_before: Tensor, params: SEFN) -> Tensor:
    return params(h_after, h_before)


class SEMBlock(Module):
    """Pre-norm residual pair: ``a = h + SMB(LN(h))``, ``out = a + SEFN(a, h)``."""

    def __init__(self, rng: np.random.Generator, width: int, state: int = 16,
                 expansion: int = 2, pool: int = 4, use_pe: bool = True):
        self.norm = LayerNorm(width)
        self.smb = SnakeMambaBlock(rng, width, state, expansion, use_pe)
        self.sefn = SEFN(rng, width, pool)

    def forward(self, h: Tensor) -> Tensor:
        h_after = F.add(h, self.smb(self.norm(h)))
        return F.add(h_after, self.sefn(h_after, h))


def sem_block_forward(h: Tensor, block: SEMBlock) -> Tensor:
    return block(h)


class Stage(Module):
    def __init__(self, blocks: list[SEMBlock]):
        self.blocks = blocks

    def forward(self, h: Tensor) -> Tensor:
        for b in self.blocks:
            h = b(h)
        return h


class SemNet(Module):
    """U-shaped network: 3x3 stem, SEM-block encoder stages with pixel-unshuffle
    downsampling, latent stage, pixel-shuffle decoder with concatenated skips
    halved by 1x1 convs, and a 3x3 output projection."""

    def __init__(self, config: SemNetConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        c = config
        S = c.stages

        def stage(k: int) -> Stage:
            return Stage([SEMBlock(rng, c.stage_width(k), c.ssm_state, c.expansion, c.stage_pool(k), c.use_pe)
                          for _ in range(c.blocks_per_stage[k])])

        self.stem = Conv2d(rng, c.input_channels, c.base_channels, 3)
        self.encoders = []
        self.downs = []
        for k in range(S - 1):
            w = c.stage_width(k)
            self.encoders.append(stage(k))
            self.downs.append(Conv2d(rng, w, w // 2, 3, bias=False))
        self.latent = stage(S - 1)
        self.ups = []
        self.reduces = []
        self.decoders = []
        for k in reversed(range(S - 1)):
            w = c.stage_width(k)
            self.ups.append(Conv2d(rng, 2 * w, 4 * w, 3, bias=False))
            self.reduces.append(Conv2d(rng, 2 * w, w, 1))
            self.decoders.append(stage(k))
        self.head = Conv2d(rng, c.base_channels, c.output_channels, 3)

    def check_input(self, x: Tensor) -> None:
        c = self.config
        if x.ndim != 4 or x.shape[1] != c.input_channels:
            raise ValueError(f"SemNet: expected (B, {c.input_channels}, H, W) input, got {x.shape}")
        H, W = x.shape[2:]
        if H % c.divisor or W % c.divisor:
            raise ValueError(f"SemNet: spatial size {(H, W)} not divisible by {c.divisor}")

    def forward(self, x: Tensor, features: dict | None = None) -> Tensor:
        """Raw prediction for a (B, 4, H, W) masked input.

        When ``features`` is a dict it receives the encoder outputs, the latent
        and the decoder inputs (after skip fusion) keyed by stage.
        """
        self.check_input(x)
        h = self.stem(x)
        skips = []
        for k, (enc, down) in enumerate(zip(self.encoders, self.downs)):
            h = enc(h)
            skips.append(h)
            if features is not None:
                features[f"encoder{k}"] = h
            h = F.pixel_unshuffle(down(h), 2)
        h = self.latent(h)
        if features is not None:
            features["latent"] = h
        S = self.config.stages
        for i, (up, red, dec) in enumerate(zip(self.ups, self.reduces, self.decoders)):
            k = S - 2 - i
            h = F.pixel_shuffle(up(h), 2)
            h = red(F.concat([h, skips[k]], axis=1))
            if features is not None:
                features[f"decoder{k}"] = h
            h = dec(h)
        return self.head(h)

    def inpaint(self, image: Tensor, mask: Tensor) -> Tensor:
        """Composite output for images (B, 3, H, W) and masks (B, 1, H, W), 1 = known."""
        return composite(self(masked_input(image, mask)), image, mask)


def masked_input(image: Tensor, mask: Tensor) -> Tensor:
    return F.concat([F.mul(image, mask), mask], axis=1)


def composite(pred: Tensor, image: Tensor, mask: Tensor) -> Tensor:
    """Keep known pixels from ``image``; fill holes from ``pred``."""
    return F.add(F.mul(pred, F.sub(1.0, mask)), F.mul(image, mask))


def semnet_forward(i_in: Tensor, model: SemNet) -> Tensor:
    return model(i_in)
