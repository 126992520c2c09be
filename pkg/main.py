import sys

from ifpt2d.main import main

if __name__ == "__main__":
    sys.exit(main())
