import sys

from ebipla.cli import main

sys.exit(main())
