import sys

from pdcr.cli import main

sys.exit(main())
