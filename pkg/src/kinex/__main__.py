"""Allow ``python -m kinex`` as an alternative to the ``kinex`` script."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
