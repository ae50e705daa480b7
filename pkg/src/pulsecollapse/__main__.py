import sys

from pulsecollapse.cli import main

sys.exit(main())
