import sys

from copyspace.cli import main

sys.exit(main())
