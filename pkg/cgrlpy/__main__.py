"""Run the command line."""
import sys

from cgrlpy.cli import main

sys.exit(main())
