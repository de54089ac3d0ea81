import sys

from dbsi.cli import main

sys.exit(main())
