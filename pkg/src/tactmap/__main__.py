import sys

from tactmap.cli import main

sys.exit(main())
