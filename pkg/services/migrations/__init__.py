from typing import Any, Dict, Protocol


class Migration(Protocol):
    """Dataset schema migration protocol"""
    version: int
    description: str

    def upgrade_manifest(self, manifest: Dict[str, Any]) -> None:
        """Upgrade the manifest dict in place"""
        ...

    def upgrade_frame(self, record: Dict[str, Any]) -> None:
        """Upgrade one frame record dict in place"""
        ...
