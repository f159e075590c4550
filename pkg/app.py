"""
Attitude density propagator - command-line entry point.
"""

import sys

from src.app import main

if __name__ == "__main__":
    sys.exit(main())
