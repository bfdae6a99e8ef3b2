"""Checkpoint container: named parameter arrays, JSON config and Adam state in one ``.npz``."""

import io
import json
import logging
import zipfile
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from .optim import AdamState

logger = logging.getLogger(__name__)

_CONFIG_KEY = "__config__"
_STEP_KEY = "__adam_step__"
# fixed member timestamp so identical arrays give identical bytes
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def write_npz(path: Union[str, Path], arrays: Dict[str, np.ndarray]) -> Path:
    """``np.savez`` layout written with sorted members and a constant timestamp."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", compression=zipfile.ZIP_STORED) as archive:
        for name in sorted(arrays):
            member = io.BytesIO()
            np.lib.format.write_array(member, np.asanyarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_EPOCH)
            info.external_attr = 0o644 << 16
            archive.writestr(info, member.getvalue())
    path.write_bytes(buffer.getvalue())
    return path


def save_checkpoint(
    path: Union[str, Path],
    params: Dict[str, np.ndarray],
    config: Dict[str, Any],
    optimizer: Optional[AdamState] = None,
) -> Path:
    """Write parameters, config and optional optimizer moments; floats round-trip bit-exactly."""
    arrays = {f"param::{name}": np.asarray(value, dtype=np.float64) for name, value in params.items()}
    arrays[_CONFIG_KEY] = np.array(json.dumps(config, sort_keys=True))
    if optimizer is not None:
        arrays[_STEP_KEY] = np.array(optimizer.step, dtype=np.int64)
        arrays.update({f"adam_m::{name}": value for name, value in optimizer.m.items()})
        arrays.update({f"adam_v::{name}": value for name, value in optimizer.v.items()})
    path = write_npz(path, arrays)
    logger.info("Saved checkpoint with %d tensors to %s", len(params), path)
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any], Optional[AdamState]]:
    """Inverse of ``save_checkpoint``."""
    with np.load(Path(path), allow_pickle=False) as archive:
        params, state = {}, None
        config = json.loads(str(archive[_CONFIG_KEY]))
        if _STEP_KEY in archive.files:
            state = AdamState(step=int(archive[_STEP_KEY]))
        for key in archive.files:
            kind, _, name = key.partition("::")
            if kind == "param":
                params[name] = archive[key]
            elif kind == "adam_m" and state is not None:
                state.m[name] = archive[key]
            elif kind == "adam_v" and state is not None:
                state.v[name] = archive[key]
    return params, config, state
