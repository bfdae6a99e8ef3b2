"""Artifact bookkeeping: content hashes, ``.meta.json`` sidecars and freshness checks."""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Optional, Sequence, Union

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

META_SUFFIX = ".meta.json"
_BLOCK = 1 << 20


def file_hash(path: PathLike) -> str:
    """SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with Path(path).open("rb") as f:
        for block in iter(lambda: f.read(_BLOCK), b""):
            digest.update(block)
    return digest.hexdigest()


def meta_path(output: PathLike) -> Path:
    output = Path(output)
    return output.with_name(output.name + META_SUFFIX)


def ensure_parent(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


@dataclass
class ArtifactMeta:
    """What produced an artifact: the command, its parameters and the hashes of its inputs."""
    command: str
    config_hash: str
    inputs: Dict[str, str] = field(default_factory=dict)
    params: Dict[str, Any] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def read(cls, path: PathLike) -> Optional["ArtifactMeta"]:
        path = Path(path)
        if not path.exists():
            return None
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            return cls(**data)
        except (ValueError, TypeError):
            logger.warning("Ignoring unreadable metadata %s", path)
            return None

    def same_recipe(self, other: "ArtifactMeta") -> bool:
        return (
            self.command == other.command
            and self.config_hash == other.config_hash
            and self.inputs == other.inputs
            and _canonical(self.params) == _canonical(other.params)
        )


def _canonical(value: Any) -> str:
    return json.dumps(value, sort_keys=True, default=str)


def hash_inputs(inputs: Iterable[PathLike]) -> Dict[str, str]:
    """Content hash per input path; a missing path raises ``MissingInputError``."""
    from config.loader import MissingInputError

    hashes = {}
    for path in inputs:
        path = Path(path)
        if not path.exists():
            raise MissingInputError(f"input {path} does not exist")
        hashes[str(path)] = file_hash(path)
    return hashes


def is_fresh(outputs: Sequence[PathLike], recipe: ArtifactMeta) -> bool:
    """True when every output exists with its recorded hash and was produced by ``recipe``."""
    if not outputs:
        return False
    recorded = ArtifactMeta.read(meta_path(outputs[0]))
    if recorded is None or not recorded.same_recipe(recipe):
        return False
    for output in outputs:
        output = Path(output)
        if not output.exists() or recorded.outputs.get(str(output)) != file_hash(output):
            return False
    return True


def write_meta(outputs: Sequence[PathLike], recipe: ArtifactMeta, summary: Optional[Dict[str, Any]] = None) -> Path:
    """Record output hashes next to the first output."""
    recipe.outputs = {str(Path(o)): file_hash(o) for o in outputs}
    if summary is not None:
        recipe.summary = summary
    path = ensure_parent(meta_path(outputs[0]))
    path.write_text(recipe.to_json(), encoding="utf-8")
    return path


def cached_step(
    command: str,
    config_hash: str,
    inputs: Sequence[PathLike],
    outputs: Sequence[PathLike],
    produce: Callable[[], Optional[Dict[str, Any]]],
    params: Optional[Dict[str, Any]] = None,
    force: bool = False,
) -> Dict[str, Any]:
    """Run ``produce`` unless the outputs are fresh for the same inputs, config and params.

    ``produce`` writes every path in ``outputs`` and returns a JSON-able summary,
    which is stored in the metadata and returned on later cache hits.
    """
    recipe = ArtifactMeta(command=command, config_hash=config_hash, inputs=hash_inputs(inputs), params=dict(params or {}))
    if not force and is_fresh(outputs, recipe):
        recorded = ArtifactMeta.read(meta_path(outputs[0]))
        logger.info("%s: outputs are up to date, skipping", command)
        return {"skipped": True, "outputs": [str(o) for o in outputs], **recorded.summary}
    for output in outputs:
        ensure_parent(output)
    summary = produce() or {}
    missing = [str(o) for o in outputs if not Path(o).exists()]
    if missing:
        raise RuntimeError(f"{command} did not write {missing[0]}")
    write_meta(outputs, recipe, summary)
    logger.info("%s: wrote %s", command, ", ".join(str(o) for o in outputs))
    return {"skipped": False, "outputs": [str(o) for o in outputs], **summary}
