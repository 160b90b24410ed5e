import sys
from pathlib import Path

# make sibling test helpers (qp_oracle, test_nets utilities) importable
sys.path.insert(0, str(Path(__file__).parent))
