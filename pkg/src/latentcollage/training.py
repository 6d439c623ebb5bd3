"""Encoder training against a frozen generator.

Each step samples latents, renders targets with the generator, draws a
training mask with some probability, and updates only the encoder.
Checkpoints capture encoder weights, optimizer moments, and RNG states,
so a resumed run continues bit-for-bit identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import nn, rngs
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import TrainingDivergedError
from .generators import GeneratorHandle
from .latent import sample_latent_rng
from .masking import sample_mask_rng
from .regressor import EncoderConfig, EncoderHandle, build_encoder, total_loss_t


class Ablation(str, Enum):
    FULL = "FULL"
    NO_LATENT = "NO_LATENT"
    NO_PERCEPTUAL = "NO_PERCEPTUAL"
    NO_MASK = "NO_MASK"


@dataclass
class TrainConfig:
    steps: int
    batch_size: int = 16
    learning_rate: float = 1e-4
    mask_probability: float = 0.5
    seed: int = 0
    ablation: Ablation = Ablation.FULL
    patch_size: int = 6
    threshold_range: tuple = (0.3, 1.0)
    checkpoint_every: int = 0  # 0 = final checkpoint only
    base_channels: int = 16
    backbone_depth: int = 0  # 0 = derive from image size

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.mask_probability <= 1.0:
            raise ValueError("mask_probability must lie in [0, 1]")

    def to_json(self) -> dict:
        d = {**vars(self)}
        d["ablation"] = self.ablation.value
        d["threshold_range"] = list(self.threshold_range)
        return d

    @staticmethod
    def from_json(d: dict) -> "TrainConfig":
        d = dict(d)
        d["ablation"] = Ablation(d["ablation"])
        d["threshold_range"] = tuple(d["threshold_range"])
        return TrainConfig(**d)


@dataclass
class TrainState:
    encoder: EncoderHandle
    optimizer: nn.Adam
    config: TrainConfig
    step: int = 0
    loss_history: list = field(default_factory=list)
    rng_z: np.random.Generator = None
    rng_mask: np.random.Generator = None


def encoder_config_for(G: GeneratorHandle, config: TrainConfig) -> EncoderConfig:
    """Default encoder layout for a generator, honoring the ablation switch."""
    size = G.output_shape[1]
    depth = config.backbone_depth or max(2, int(np.log2(size)) - 2)
    weights = {"image_mse": 1.0, "perceptual": 1.0, "latent": 1.0}
    channels = 4
    if config.ablation == Ablation.NO_LATENT:
        weights["latent"] = 0.0
    elif config.ablation == Ablation.NO_PERCEPTUAL:
        weights["perceptual"] = 0.0
    elif config.ablation == Ablation.NO_MASK:
        channels = 3
    return EncoderConfig(
        latent_spec=G.latent_spec,
        image_size=size,
        input_channels=channels,
        backbone_depth=depth,
        base_channels=config.base_channels,
        loss_weights=weights,
    )


def init_train_state(
    G: GeneratorHandle, config: TrainConfig, encoder_config: EncoderConfig | None = None
) -> TrainState:
    if encoder_config is None:
        encoder_config = encoder_config_for(G, config)
    init_seed = int(rngs.stream(config.seed, "encoder-init").integers(0, 2**31 - 1))
    encoder = build_encoder(encoder_config, seed=init_seed)
    optimizer = nn.Adam(encoder.module.parameters(), lr=config.learning_rate)
    return TrainState(
        encoder=encoder,
        optimizer=optimizer,
        config=config,
        rng_z=rngs.stream(config.seed, "train-z"),
        rng_mask=rngs.stream(config.seed, "train-mask"),
    )


def train_step(state: TrainState, G: GeneratorHandle, config: TrainConfig) -> TrainState:
    """One optimizer update on the encoder; the generator stays untouched."""
    enc = state.encoder
    _, h, w = G.output_shape
    b = config.batch_size

    z = sample_latent_rng(G.latent_spec, b, state.rng_z)
    with_mask = (
        enc.config.input_channels == 4
        and config.mask_probability > 0.0
        and config.ablation != Ablation.NO_MASK
    )
    if with_mask:
        masks = sample_mask_rng(
            h, w, b, state.rng_mask, config.patch_size, config.threshold_range
        )
        gate = state.rng_mask.uniform(size=b) < config.mask_probability
        m_arr = np.where(gate[:, None, None, None], masks.values, 1.0).astype(np.float32)
    else:
        m_arr = np.ones((b, 1, h, w), dtype=np.float32)

    with ad.no_grad():
        x = G.forward_tensor(Tensor(z.flat())).data

    loss, breakdown = total_loss_t(
        enc.module,
        G,
        Tensor(x),
        Tensor(z.flat()),
        Tensor(m_arr),
        enc.config.loss_weights,
        enc.config.input_channels,
        enc.config.latent_spec.kind,
    )
    if not np.isfinite(breakdown["total"]):
        raise TrainingDivergedError(
            f"non-finite training loss at step {state.step}", step=state.step
        )
    enc.module.zero_grad()
    loss.backward()
    state.optimizer.step()
    enc.module.zero_grad()

    state.step += 1
    enc.step_count = state.step
    state.loss_history.append({"step": state.step, **breakdown})
    return state


def save_train_checkpoint(state: TrainState, path) -> None:
    arrays = state.encoder.module.export_arrays()
    arrays.update(state.optimizer.export_arrays())
    meta = {
        "step": state.step,
        "adam_t": state.optimizer.t,
        "train_config": state.config.to_json(),
        "encoder_config": state.encoder.config.to_json(),
        "rng_z": rngs.state_of(state.rng_z),
        "rng_mask": rngs.state_of(state.rng_mask),
    }
    save_checkpoint(path, arrays, meta)
    with open(Path(path) / "history.jsonl", "w") as f:
        for row in state.loss_history:
            f.write(json.dumps(row) + "\n")


def load_train_checkpoint(path) -> TrainState:
    meta, arrays = load_checkpoint(path)
    config = TrainConfig.from_json(meta["train_config"])
    encoder_config = EncoderConfig.from_json(meta["encoder_config"])
    encoder = build_encoder(encoder_config, seed=0)
    encoder_arrays = {k: v for k, v in arrays.items() if not k.startswith("adam.")}
    encoder.module.load_arrays(encoder_arrays)
    encoder.step_count = int(meta["step"])
    optimizer = nn.Adam(encoder.module.parameters(), lr=config.learning_rate)
    optimizer.load_arrays(arrays, t=int(meta["adam_t"]))
    history = []
    hist_path = Path(path) / "history.jsonl"
    if hist_path.is_file():
        with open(hist_path) as f:
            history = [json.loads(line) for line in f if line.strip()]
    return TrainState(
        encoder=encoder,
        optimizer=optimizer,
        config=config,
        step=int(meta["step"]),
        loss_history=history,
        rng_z=rngs.restore(meta["rng_z"]),
        rng_mask=rngs.restore(meta["rng_mask"]),
    )


def _run(state: TrainState, G: GeneratorHandle, out_dir) -> TrainState:
    config = state.config
    out_dir = Path(out_dir) if out_dir is not None else None
    history_f = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        mode = "a" if state.step else "w"
        history_f = open(out_dir / "loss_history.jsonl", mode)
    checksum_before = G.checksum()
    try:
        while state.step < config.steps:
            train_step(state, G, config)
            if history_f is not None:
                history_f.write(json.dumps(state.loss_history[-1]) + "\n")
            if (
                out_dir is not None
                and config.checkpoint_every
                and state.step % config.checkpoint_every == 0
                and state.step < config.steps
            ):
                save_train_checkpoint(
                    state, out_dir / "checkpoints" / f"step_{state.step:06d}"
                )
    finally:
        if history_f is not None:
            history_f.close()
    if G.checksum() != checksum_before:
        raise TrainingDivergedError("generator parameters changed during training")
    if out_dir is not None:
        save_train_checkpoint(state, out_dir / "checkpoints" / "final")
        state.encoder.save(out_dir / "encoder")
    return state


def train(
    G: GeneratorHandle,
    config: TrainConfig,
    out_dir=None,
    encoder_config: EncoderConfig | None = None,
) -> tuple[EncoderHandle, list]:
    """Train an encoder from scratch; returns (handle, loss history)."""
    state = init_train_state(G, config, encoder_config)
    state = _run(state, G, out_dir)
    return state.encoder, state.loss_history


def resume(checkpoint_path, G: GeneratorHandle, out_dir=None, steps: int | None = None):
    """Continue a checkpointed run; identical seeds yield identical weights."""
    state = load_train_checkpoint(checkpoint_path)
    if steps is not None:
        state.config = replace(state.config, steps=steps)
    state = _run(state, G, out_dir)
    return state.encoder, state.loss_history
