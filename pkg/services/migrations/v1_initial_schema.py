from typing import Any, Dict

from . import Migration


class V1InitialSchema(Migration):
    version = 1
    description = "Initial schema: frames with 3D annotations and detection-only boxes"

    def upgrade_manifest(self, manifest: Dict[str, Any]) -> None:
        manifest.setdefault('categories', [])

    def upgrade_frame(self, record: Dict[str, Any]) -> None:
        record.setdefault('annotations', [])
