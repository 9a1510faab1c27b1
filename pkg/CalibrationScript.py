import sys
import time

from abmcalib.cli import main

if len(sys.argv) < 2:
    print("Usage: %s <simulate|calibrate|sanity-check|suite|sobol-dump> [options]" % (sys.argv[0]))
    sys.exit(1)

st = time.time()
code = main(sys.argv[1:])
ed = time.time()
print("elapsed", ed - st)
sys.exit(code)
