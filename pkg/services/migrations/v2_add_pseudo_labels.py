from typing import Any, Dict

from . import Migration


class V2AddPseudoLabels(Migration):
    version = 2
    description = "Add semi-pseudo-label flags, confidences and provenance"

    def upgrade_manifest(self, manifest: Dict[str, Any]) -> None:
        manifest.setdefault('provenance', [])

    def upgrade_frame(self, record: Dict[str, Any]) -> None:
        for annotation in record.get('annotations', []):
            # version 1 stored detection-only boxes as annotations without a cuboid
            annotation.setdefault('is_pseudo', annotation.get('cuboid') is None)
            annotation.setdefault('confidence', 1.0)
