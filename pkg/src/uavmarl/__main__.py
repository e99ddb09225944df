import sys

from uavmarl.harness.cli import main

sys.exit(main())
