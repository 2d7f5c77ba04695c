"""Module entry point: ``python -m buckstokes`` runs the CLI."""

import sys

from .cli import main

sys.exit(main())
