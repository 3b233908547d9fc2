import os
import sys

# Tests import the tool packages the way sfs_tools.py does: from the repo root.
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
