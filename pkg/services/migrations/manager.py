import logging
from typing import Any, Dict, List, Optional, Type

from services.migrations.v1_initial_schema import V1InitialSchema
from services.migrations.v2_add_pseudo_labels import V2AddPseudoLabels
from common import CURRENT_SCHEMA_VERSION
from models.errors import SchemaMismatch

from . import Migration

logger = logging.getLogger(__name__)

ALL_MIGRATIONS = [
    {
        'version': 1,
        'migration': V1InitialSchema,
    },
    {
        'version': 2,
        'migration': V2AddPseudoLabels,
    },
]


class MigrationManager:
    def check_version(self, version: Any, path: Optional[str] = None) -> int:
        """Validate a manifest schema version against the supported ones"""
        supported = [m['version'] for m in ALL_MIGRATIONS]
        if not isinstance(version, int) or isinstance(version, bool) or version not in supported:
            raise SchemaMismatch(
                f"unsupported schema version {version!r} (supported: {supported[0]}..{CURRENT_SCHEMA_VERSION})", path)
        return version

    def get_migrations_to_apply(self, current_version: int, target_version: int) -> List[Type[Migration]]:
        """Get list of migrations to apply"""
        return [m['migration'] for m in ALL_MIGRATIONS
                if current_version < m['version'] <= target_version]

    def migrate_manifest(self, manifest: Dict[str, Any], from_version: int,
                         to_version: int = CURRENT_SCHEMA_VERSION) -> Dict[str, Any]:
        for migration_class in self.get_migrations_to_apply(from_version, to_version):
            migration = migration_class()
            logger.info("applying dataset migration %d: %s", migration.version, migration.description)
            migration.upgrade_manifest(manifest)
            manifest['schema_version'] = migration.version
        return manifest

    def migrate_frame(self, record: Dict[str, Any], from_version: int,
                      to_version: int = CURRENT_SCHEMA_VERSION) -> Dict[str, Any]:
        for migration_class in self.get_migrations_to_apply(from_version, to_version):
            migration_class().upgrade_frame(record)
        return record


migration_manager = MigrationManager()
