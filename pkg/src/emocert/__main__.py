import sys

from emocert.cli import main

sys.exit(main())
