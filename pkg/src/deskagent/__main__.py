import sys

from deskagent.cli import main

sys.exit(main())
