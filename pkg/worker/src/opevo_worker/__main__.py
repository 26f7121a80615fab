import sys

from opevo_worker.host import serve

if __name__ == "__main__":
    sys.exit(serve())
