"""Training loop and versioned model artifacts."""

import json
import time
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .dataset import NUM_BANDS, NoiseRangeSpec, PatchDataset, synthesize_colored_noise
from .model import DESK_DEPTH, DESK_FEATURES, PIXEL_SCALE, ColoredDnCNN

ARTIFACT_VERSION = 1

DESK_EPOCHS = 5
DESK_BATCH = 64
DESK_LR = 1e-3


@dataclass
class ModelArtifact:
    model: ColoredDnCNN
    range_spec: NoiseRangeSpec
    meta: dict

    def save(self, path):
        torch.save(
            {"state_dict": self.model.state_dict(), "meta": self.meta}, path
        )

    @classmethod
    def load(cls, path):
        payload = torch.load(path, map_location="cpu", weights_only=True)
        meta = payload["meta"]
        if meta.get("version") != ARTIFACT_VERSION:
            raise ValueError(f"unsupported artifact version in {path}")
        model = ColoredDnCNN(depth=meta["depth"], features=meta["features"])
        model.load_state_dict(payload["state_dict"])
        model.eval()
        spec = NoiseRangeSpec(meta["range"]["lower"], meta["range"]["upper"])
        return cls(model=model, range_spec=spec, meta=meta)


def _make_noisy_batch(clean, range_spec, rng):
    """Add freshly synthesized colored noise to a batch of clean patches."""
    size = clean.shape[-1]
    sds = np.stack([range_spec.sample_band_sds(rng) for _ in clean])
    noise = np.stack(
        [synthesize_colored_noise(s, rng, size=size) for s in sds]
    )
    noisy = clean + noise.astype(np.float32)
    return (
        torch.from_numpy(noisy[:, None] / PIXEL_SCALE),
        torch.from_numpy(clean[:, None] / PIXEL_SCALE),
        torch.from_numpy(sds.astype(np.float32) / PIXEL_SCALE),
    )


def _psnr(mse):
    return float(10.0 * np.log10(PIXEL_SCALE**2 / max(mse, 1e-12)))


def train_colored_dncnn(
    dataset: PatchDataset,
    range_spec: NoiseRangeSpec,
    epochs=DESK_EPOCHS,
    lr=DESK_LR,
    batch_size=DESK_BATCH,
    depth=DESK_DEPTH,
    features=DESK_FEATURES,
    seed=0,
    val_fraction=0.1,
    log=None,
):
    """Train one noise-range bucket; returns a ModelArtifact.

    Noise is synthesized on the fly (fresh per epoch), per-band sds drawn
    uniformly from the bucket. A held-out split is evaluated after training;
    its PSNRs (noisy and denoised) are stored in the artifact metadata.
    A non-finite loss aborts with a state dump in the exception message.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    n_val = max(1, int(len(dataset) * val_fraction))
    patches = dataset.patches
    val, train = patches[:n_val], patches[n_val:]
    if len(train) == 0:
        raise ValueError("dataset too small for the validation split")

    model = ColoredDnCNN(depth=depth, features=features)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.MSELoss()
    t0 = time.perf_counter()
    for epoch in range(epochs):
        model.train()
        order = rng.permutation(len(train))
        epoch_loss = 0.0
        batches = 0
        for start in range(0, len(train), batch_size):
            clean = train[order[start:start + batch_size]]
            noisy_t, clean_t, sds_t = _make_noisy_batch(clean, range_spec, rng)
            optimizer.zero_grad()
            loss = loss_fn(model(noisy_t, sds_t), clean_t)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    "training diverged: non-finite loss at epoch "
                    f"{epoch}, batch {batches}; state: "
                    + json.dumps(
                        {
                            "epoch": epoch,
                            "batch": batches,
                            "lr": lr,
                            "range": [range_spec.lower, range_spec.upper],
                            "grad_norms": [
                                float(p.grad.norm()) if p.grad is not None else None
                                for p in model.parameters()
                            ][:4],
                        }
                    )
                )
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
            batches += 1
        if log:
            log(f"epoch {epoch + 1}/{epochs}: mean loss {epoch_loss / batches:.6f}")

    # held-out evaluation with a fixed noise draw
    model.eval()
    eval_rng = np.random.default_rng(seed + 1)
    noisy_t, clean_t, sds_t = _make_noisy_batch(val, range_spec, eval_rng)
    with torch.no_grad():
        out = model(noisy_t, sds_t)
    mse_noisy = float(torch.mean((noisy_t - clean_t) ** 2)) * PIXEL_SCALE**2
    mse_denoised = float(torch.mean((out - clean_t) ** 2)) * PIXEL_SCALE**2

    meta = {
        "version": ARTIFACT_VERSION,
        "range": {"lower": range_spec.lower, "upper": range_spec.upper},
        "depth": depth,
        "features": features,
        "epochs": epochs,
        "lr": lr,
        "batch_size": batch_size,
        "seed": seed,
        "patch_count": len(dataset),
        "dataset_hash": dataset.content_hash(),
        "train_seconds": time.perf_counter() - t0,
        "val_psnr_noisy_db": _psnr(mse_noisy),
        "val_psnr_denoised_db": _psnr(mse_denoised),
    }
    return ModelArtifact(model=model, range_spec=range_spec, meta=meta)
