import logging
import sys
from typing import List, Optional

from app.cli.router import build_parser
from app.config import settings
from app.exceptions import UpliftError

# Configure logging; stderr keeps stdout free for reports
logging.basicConfig(
    level=settings.log_level,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.handler(args)
    except UpliftError as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e.code}: {' '.join(e.detail.split())}", file=sys.stderr)
        return 2
    except OSError as e:
        logger.debug("I/O failure", exc_info=True)
        print(f"error: io: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
