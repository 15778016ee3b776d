import sys

from seq2vec.cli import main

sys.exit(main())
