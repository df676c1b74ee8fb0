import sys

from margin_paths.cli import main

sys.exit(main())
