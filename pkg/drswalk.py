"""Run the drswalk command line.

Usage:
  python drswalk.py optimize --preset caseA
  python drswalk.py simulate --preset caseA --steps 20 --dt 5e-4
  python drswalk.py verify
"""

from __future__ import annotations

import sys

from app.cli import main


if __name__ == "__main__":
    sys.exit(main())
