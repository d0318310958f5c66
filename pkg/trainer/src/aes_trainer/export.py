"""Write member prediction files in the scoring pipeline's format."""

from __future__ import annotations

from pathlib import Path

from .data import DataError
from .model import Checkpoint
from .train import predict_scores

MEMBER_HEADER = "essay_id,prediction"
MANIFEST_HEADER = "model_id,source_tag,path"


def export_predictions(checkpoint: Checkpoint, texts: dict[int, str],
                       split: dict[int, str], out_path: str | Path,
                       manifest_path: str | Path | None = None,
                       splits: tuple[str, ...] = ("val", "test")) -> Path:
    """Score the requested splits and write `essay_id,prediction` rows.

    Appends a manifest row when manifest_path is given, creating the
    manifest with its header if absent. The default splits cover both
    validation and test because the ensemble stage needs both.
    """
    essay_ids = sorted(e for e, s in split.items() if s in splits)
    if not essay_ids:
        raise DataError(f"no essays in splits {splits}")
    predictions = predict_scores(checkpoint, texts, essay_ids)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        fh.write(MEMBER_HEADER + "\n")
        for essay_id in essay_ids:
            fh.write(f"{essay_id},{predictions[essay_id]:.4f}\n")

    if manifest_path is not None:
        manifest_path = Path(manifest_path)
        row = (f"{checkpoint.spec.model_family},"
               f"{checkpoint.spec.input_source},{out_path.name}")
        if manifest_path.exists():
            existing = manifest_path.read_text().splitlines()
        else:
            existing = [MANIFEST_HEADER]
        if row not in existing:
            existing.append(row)
        manifest_path.write_text("\n".join(existing) + "\n")
    return out_path
