import sys
from pathlib import Path

# tools/ holds the weight converter imported by the encoder tests.
sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "tools"))
