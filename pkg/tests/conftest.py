import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# the vacuous-conditioning warning fires on every tiny first refit
logging.getLogger("steerbo").setLevel(logging.ERROR)
