import sys

from monotone_peridynamics.app import main

sys.exit(main())
