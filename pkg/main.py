import asyncio
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from dotenv import load_dotenv

from config.settings import get_settings
from imcflab.app.factories.build_services import build_core_services
from imcflab.dal import run_dal
from imcflab.errors import ConfigError, ImcfLabError
from imcflab.handlers import dispatch
from imcflab.routers import parse_args

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


async def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    settings = get_settings()
    logging.getLogger().setLevel(settings.log_level_value)

    try:
        config = parse_args(argv, settings)
    except ConfigError as e:
        logging.error(f"Invalid configuration, {e.message}")
        print(f"error: {e.message}", file=sys.stderr)
        return EXIT_CONFIG

    services = build_core_services(settings)
    try:
        outcome = await dispatch(config, settings, services)
    except ConfigError as e:
        logging.error(f"Invalid configuration, {e.message}")
        print(f"error: {e.message}", file=sys.stderr)
        return EXIT_CONFIG
    except ImcfLabError as e:
        logging.error(f"{config.command} failed: {e.message}")
        path = run_dal.write_error(Path(config.output), e.to_dict())
        print(f"error: {e.message} (details in {path})", file=sys.stderr)
        return EXIT_FAILURE

    return EXIT_OK if outcome.passed else EXIT_FAILURE


if __name__ == "__main__":
    logging.basicConfig(
        level=logging.INFO,
        stream=sys.stdout,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    try:
        sys.exit(asyncio.run(main()))
    except KeyboardInterrupt:
        logging.info("Run stopped manually")
    except Exception as e_global:
        logging.critical(f"Global unhandled exception in main: {e_global}",
                         exc_info=True)
        sys.exit(1)
