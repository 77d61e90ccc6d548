import sys

from graph_fcn.cli import main

sys.exit(main())
