# main.py

import os
import sys

# Garante que os módulos do projeto possam ser importados corretamente.
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from src.cli import main

if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
