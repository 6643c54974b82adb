"""JSON checkpoints: networks, optimizer moments, and run metadata.

Floats serialize through repr and round-trip exactly, so a save/load
cycle reproduces forward passes bit for bit. The `created` stamp
honors SOURCE_DATE_EPOCH for byte-reproducible artifacts.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone

import numpy as np

from ..errors import ConfigurationError
from .net import Critic, GaussianActor
from .optim import Adam


def _canonical(obj) -> str:
    if is_dataclass(obj) and not isinstance(obj, type):
        obj = asdict(obj)
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=list)


def config_hash(config) -> str:
    """Stable digest of a config dataclass/dict for provenance checks."""
    return hashlib.sha256(_canonical(config).encode("utf-8")).hexdigest()


def _created_stamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    ts = int(epoch) if epoch is not None else int(time.time())
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


def _net_doc(mlp_owner) -> dict:
    mlp = mlp_owner.mlp
    return {
        "sizes": list(mlp.sizes),
        "weights": [w.tolist() for w in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
    }


def save_checkpoint(
    path,
    actor: GaussianActor,
    critic: Critic,
    opt_actor: Adam,
    opt_critic: Adam,
    episode: int,
    config,
) -> None:
    doc = {
        "meta": {
            "created": _created_stamp(),
            "config_hash": config_hash(config),
            "episode": int(episode),
        },
        "actor": {**_net_doc(actor), "log_std": actor.log_std.tolist()},
        "critic": _net_doc(critic),
        "optimizer": {
            "actor": opt_actor.state_dict(),
            "critic": opt_critic.state_dict(),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ": "), indent=1)
        fh.write("\n")


def _fill_mlp(mlp, doc: dict, what: str) -> None:
    if tuple(doc["sizes"]) != mlp.sizes:
        raise ConfigurationError(
            f"{what} checkpoint sizes {doc['sizes']} do not match network {list(mlp.sizes)}"
        )
    for target, source in ((mlp.weights, doc["weights"]), (mlp.biases, doc["biases"])):
        for arr, data in zip(target, source):
            data = np.asarray(data, dtype=np.float64)
            if data.shape != arr.shape:
                raise ConfigurationError(f"{what} checkpoint has a mis-shaped array {data.shape}")
            arr[...] = data


def load_checkpoint(path) -> dict:
    """Rebuild actor/critic/optimizers from a checkpoint document.

    Returns {"actor", "critic", "opt_actor", "opt_critic", "meta"}.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"checkpoint {path}: invalid JSON ({exc})") from exc
    for key in ("meta", "actor", "critic", "optimizer"):
        if key not in doc:
            raise ConfigurationError(f"checkpoint {path} is missing section {key!r}")
    sizes = doc["actor"]["sizes"]
    hidden = tuple(sizes[1:-1])
    rng = np.random.default_rng(0)  # placeholder init, overwritten below
    actor = GaussianActor(sizes[0], hidden, rng)
    _fill_mlp(actor.mlp, doc["actor"], "actor")
    actor.log_std[...] = np.asarray(doc["actor"]["log_std"], dtype=np.float64)
    c_sizes = doc["critic"]["sizes"]
    critic = Critic(c_sizes[0], tuple(c_sizes[1:-1]), rng)
    _fill_mlp(critic.mlp, doc["critic"], "critic")
    opt_actor = Adam.from_state(actor.params, doc["optimizer"]["actor"])
    opt_critic = Adam.from_state(critic.params, doc["optimizer"]["critic"])
    return {
        "actor": actor,
        "critic": critic,
        "opt_actor": opt_actor,
        "opt_critic": opt_critic,
        "meta": doc["meta"],
    }
