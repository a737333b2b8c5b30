import sys

from .labcli import main

sys.exit(main())
