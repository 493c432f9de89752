from cmcscreen.cli import main
import sys

sys.exit(main())
