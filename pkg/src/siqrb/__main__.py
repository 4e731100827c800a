import sys

from siqrb.cli import main

sys.exit(main())
