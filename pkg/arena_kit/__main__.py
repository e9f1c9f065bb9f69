"""Allow running with ``python -m arena_kit``."""

import sys

from .cli import main

sys.exit(main())
