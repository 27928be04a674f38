import os

CURRENT_SCHEMA_VERSION = 2
DEFAULT_SEED = int(os.environ.get('SPL3D_SEED', 0))

MANIFEST_FILE = 'manifest.json'
FRAMES_FILE = 'frames.jsonl'
RASTER_DIR = 'rasters'
DETECTIONS_FILE = 'detections.jsonl'
PREDICTIONS_FILE = 'predictions.jsonl'
