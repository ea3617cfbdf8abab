import sys

from comptrack.cli import main

sys.exit(main())
