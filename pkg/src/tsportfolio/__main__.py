import sys

from tsportfolio.cli import main

sys.exit(main())
