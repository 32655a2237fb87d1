"""Entry point for ``python -m pswe``."""

import sys

from .cli import main

sys.exit(main())
