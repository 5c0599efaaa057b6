"""Checkpoint files: policy and value tables as JSON with float.hex numbers.

Keys are nested tuples of ints (and -1 placeholders); they are written as
nested lists and restored as tuples, so a save/load round trip is exact.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from curiosity_lab.errors import ConfigError
from curiosity_lab.trainer import Checkpoint, PolicyTable, ValueTable, history_key

FORMAT = "curiosity-lab-checkpoint"
VERSION = 1


def _key_out(key: Any) -> Any:
    if isinstance(key, tuple):
        return [_key_out(k) for k in key]
    return key


def _key_in(rec: Any) -> Any:
    if isinstance(rec, list):
        return tuple(_key_in(k) for k in rec)
    return rec


def _sorted_items(d: dict) -> list:
    return sorted(((json.dumps(_key_out(k)), k, v) for k, v in d.items()), key=lambda t: t[0])


def checkpoint_to_record(ckpt: Checkpoint, experiment: dict) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "step": ckpt.step,
        "eval_extrinsic": float.hex(float(ckpt.eval_extrinsic)),
        "experiment": experiment,
        "policy": {
            "num_actions": ckpt.policy.num_actions,
            "entries": [[_key_out(k), [float.hex(x) for x in row]] for _, k, row in _sorted_items(ckpt.policy.logits)],
        },
        "value": {
            "entries": [[_key_out(k), float.hex(v)] for _, k, v in _sorted_items(ckpt.value.values)],
        },
    }


def save_checkpoint(path: str | Path, ckpt: Checkpoint, experiment: dict) -> None:
    Path(path).write_text(json.dumps(checkpoint_to_record(ckpt, experiment), separators=(",", ":")) + "\n")


def checkpoint_from_record(rec: dict, key_fn=history_key) -> tuple[Checkpoint, dict]:
    if rec.get("format") != FORMAT:
        raise ConfigError("not a checkpoint file")
    if rec.get("version") != VERSION:
        raise ConfigError(f"unsupported checkpoint version {rec.get('version')}")
    pol = rec["policy"]
    logits = {_key_in(k): [float.fromhex(x) for x in row] for k, row in pol["entries"]}
    values = {_key_in(k): float.fromhex(v) for k, v in rec["value"]["entries"]}
    ckpt = Checkpoint(
        step=int(rec["step"]),
        eval_extrinsic=float.fromhex(rec["eval_extrinsic"]),
        policy=PolicyTable(int(pol["num_actions"]), logits, key_fn),
        value=ValueTable(values, key_fn),
    )
    return ckpt, rec["experiment"]


def load_checkpoint(path: str | Path, key_fn=history_key) -> tuple[Checkpoint, dict]:
    """Checkpoint plus the experiment record it embeds."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"checkpoint {path} does not exist")
    try:
        rec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse checkpoint {path}: {exc}") from None
    return checkpoint_from_record(rec, key_fn)
