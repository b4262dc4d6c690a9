import sys

from .driver_io import main

sys.exit(main())
