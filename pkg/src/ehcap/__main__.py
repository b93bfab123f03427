import sys

from ehcap.cli import main

sys.exit(main())
