import sys

from freejacobi.cli import main

sys.exit(main())
