import json
import sys
from typing import List, Optional

from pydantic import ValidationError

from experiments import build_parser
from helper.custom_errors import GenericError
from helper.exporters import dumps
from models.base import json_safe
from settings.logger import logger

###/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\###
###/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\###

## COMMAND LINE - START ##


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    payload = args.handler(args)
    sys.stdout.write(dumps(payload) + "\n")
    return 0


## COMMAND LINE - END ##

###/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\###
###/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\###

## ERROR HANDLING - START ##


def failure(error_message: str, **extra) -> dict:
    return {
        "response": None,
        "error": {"errorMessage": error_message, **extra},
        "status": "failure",
    }


def main(argv: Optional[List[str]] = None) -> int:
    try:
        return run(argv)
    except SystemExit as exc:
        # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else 2
    except GenericError as exc:
        logger.error(f"[DELAYFLOCK] {type(exc).__name__}: {exc.error_message}")
        sys.stderr.write(json.dumps(json_safe(exc.error_detail), sort_keys=True, default=str) + "\n")
        return exc.exit_code
    except ValidationError as exc:
        fields = [".".join(str(part) for part in e["loc"]) for e in exc.errors()]
        logger.error(f"[DELAYFLOCK] Invalid arguments: {fields}")
        sys.stderr.write(json.dumps(failure("Invalid arguments", fields=fields), sort_keys=True) + "\n")
        return 2
    # Catch all other exceptions
    except Exception as exc:
        logger.exception(f"[DELAYFLOCK] Unexpected failure: {exc}")
        sys.stderr.write(json.dumps(failure("Internal error"), sort_keys=True) + "\n")
        return 1


## ERROR HANDLING - END ##

###/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\###
###/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\/\###

if __name__ == "__main__":
    sys.exit(main())
