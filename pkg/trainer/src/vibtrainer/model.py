"""Network construction, weight loading, freezing, and integrity digests.

The classifier is a DenseNet-121 topology whose feature extractor
(``net.features``) is the backbone and whose final fully-connected layer
(``net.classifier``) is the classification head. Partial fine-tuning trains
the head only; the backbone is frozen and its bytes are digested before and
after training so immutability is checkable, not assumed.
"""

from __future__ import annotations

import hashlib
import itertools
from pathlib import Path

import torch
from torch import nn
from torchvision.models import densenet121

from .errors import SchemaMismatch

ARCHIVE_FORMAT = "vibtrainer-weights-v1"


def build_network(num_classes: int, imagenet_weights: str | Path | None = None) -> nn.Module:
    """Fresh DenseNet-121 with a ``num_classes``-way head.

    With ``imagenet_weights`` set, the file must hold a state dict for the
    stock 1000-class topology (a locally stored copy of the published
    pretrained weights); it is loaded before the head is replaced. Without
    it, all weights keep their fresh random initialization, which is seeded
    by the caller via ``torch.manual_seed``.
    """
    if num_classes < 2:
        raise ValueError("a classifier needs at least 2 classes")
    net = densenet121(weights=None)
    if imagenet_weights is not None:
        imagenet_weights = Path(imagenet_weights)
        if not imagenet_weights.is_file():
            raise FileNotFoundError(str(imagenet_weights))
        state = torch.load(imagenet_weights, map_location="cpu", weights_only=True)
        if isinstance(state, dict) and "state_dict" in state:
            state = state["state_dict"]
        try:
            net.load_state_dict(state)
        except (RuntimeError, TypeError) as exc:
            raise SchemaMismatch(
                f"{imagenet_weights}: weight file does not match the expected "
                f"network topology: {exc}"
            ) from None
    net.classifier = nn.Linear(net.classifier.in_features, num_classes)
    return net


def save_weight_archive(net: nn.Module, classes: tuple[str, ...], path: str | Path) -> None:
    """Persist weights plus the class order they were trained with."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format": ARCHIVE_FORMAT,
            "classes": list(classes),
            "state_dict": net.state_dict(),
        },
        path,
    )


def load_archive_backbone(net: nn.Module, archive: str | Path) -> tuple[str, ...]:
    """Copy a weight archive's backbone into ``net``, keeping ``net``'s head.

    The archive's head was trained for its own class set, so only
    non-``classifier.*`` entries transfer. Returns the archive's class order
    for the trace. Raises SchemaMismatch when the archive is not one of ours
    or its backbone does not fit the network.
    """
    archive = Path(archive)
    if not archive.is_file():
        raise FileNotFoundError(str(archive))
    payload = torch.load(archive, map_location="cpu", weights_only=True)
    if (
        not isinstance(payload, dict)
        or payload.get("format") != ARCHIVE_FORMAT
        or "state_dict" not in payload
    ):
        raise SchemaMismatch(f"{archive}: not a recognized weight archive")
    backbone_state = {
        key: value
        for key, value in payload["state_dict"].items()
        if not key.startswith("classifier.")
    }
    result = net.load_state_dict(backbone_state, strict=False)
    stray_missing = [k for k in result.missing_keys if not k.startswith("classifier.")]
    if result.unexpected_keys or stray_missing:
        raise SchemaMismatch(
            f"{archive}: archive backbone does not match the network "
            f"(unexpected: {result.unexpected_keys[:3]}, missing: {stray_missing[:3]})"
        )
    return tuple(payload.get("classes", ()))


def freeze_backbone(net: nn.Module) -> None:
    """Stop gradient flow into everything outside the classification head."""
    for name, param in net.named_parameters():
        if not name.startswith("classifier."):
            param.requires_grad_(False)


def backbone_digest(net: nn.Module) -> str:
    """SHA-256 over every backbone parameter and buffer, bound to its name.

    Buffers are included deliberately: normalization layers update running
    statistics whenever they run in training mode, so a digest over
    parameters alone could miss a backbone that silently drifted.
    """
    digest = hashlib.sha256()
    entries = sorted(
        itertools.chain(net.named_parameters(), net.named_buffers()),
        key=lambda item: item[0],
    )
    for name, tensor in entries:
        if name.startswith("classifier."):
            continue
        digest.update(name.encode("utf-8"))
        digest.update(str(tuple(tensor.shape)).encode("utf-8"))
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()
