import sys

from fairclust.cli import main

sys.exit(main())
