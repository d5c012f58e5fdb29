import json
import logging
from typing import Any, Dict, Optional, Union

from src.state.triangulation_state import AlmostCausalTriangulation, CausalTriangulation
from src.utils.errors import DomainError, NotGrowthRepresentableError
from src.utils.io import write_json


logger = logging.getLogger(__name__)


def causal_to_dict(ct: CausalTriangulation) -> dict:
    """
    Export schema of a causal triangulation:
    ``{m0, height, slice_sizes, strips: [{down_degrees, shift}], root}``.
    """
    return ct.model_dump(mode="json")


def save_triangulation(
    path: str,
    tri: Union[AlmostCausalTriangulation, CausalTriangulation],
    config: Optional[Dict[str, Any]] = None,
) -> str:
    """
    Persist a triangulation as JSON.

    Almost-causal triangulations carry their source moves, so the import side
    can rebuild and compare them. ``config`` is echoed under its own key and
    ignored on load.
    """
    kind = "causal" if isinstance(tri, CausalTriangulation) else "almost_causal"
    payload: Dict[str, Any] = {"kind": kind, **tri.model_dump(mode="json")}
    if config is not None:
        payload["config"] = config
    return write_json(path, payload)


def load_causal_triangulation(path: str) -> CausalTriangulation:
    """
    Load a causal triangulation and check it against every invariant.

    Raises:
        DomainError: if the file describes an invalid causal triangulation.
    """
    from src.tools.triangulation import validate_causal

    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    raw.pop("kind", None)
    raw.pop("config", None)
    ct = CausalTriangulation.model_validate(raw)
    report = validate_causal(ct)
    if not report.ok:
        logger.warning("[State] rejected causal triangulation", extra={"path": path, "reason": report.reason})
        raise DomainError(f"{path}: {report.reason}")
    return ct


def load_almost_causal_triangulation(path: str) -> AlmostCausalTriangulation:
    """Load a grown triangulation; it must be reproducible from its own move sequence."""
    from src.tools.triangulation import moves_from_triangulation, validate_almost_causal

    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    raw.pop("kind", None)
    raw.pop("config", None)
    tri = AlmostCausalTriangulation.model_validate(raw)
    report = validate_almost_causal(tri)
    if not report.ok:
        raise DomainError(f"{path}: {report.reason}")
    try:
        moves = moves_from_triangulation(tri)
    except NotGrowthRepresentableError as exc:
        raise DomainError(f"{path}: {exc}") from exc
    if moves != tri.source_moves:
        raise DomainError(f"{path}: source_moves disagree with the triangles")
    return tri
