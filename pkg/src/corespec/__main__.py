import sys

from corespec.cli import main

sys.exit(main())
