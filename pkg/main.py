import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

# Load environment variables (CONFIG_PATH, USER_DATA_DIR) before the services read them
from dotenv import load_dotenv
load_dotenv()

import click
import typer
from rich.console import Console
from rich.logging import RichHandler

from models.errors import Spl3dError
from routers import augment_router, eval_router, fuse_router, losscheck_router, report_router, synth_router

logger = logging.getLogger("spl3d")

app = typer.Typer(
    help="Semi-pseudo-label fusion, 3D-consistent augmentation and 2D/BEV evaluation for monocular 3D detection.",
    no_args_is_help=True,
    add_completion=False,
    pretty_exceptions_enable=False,
)


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


@app.callback()
def main_callback(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", exists=True, dir_okay=False,
                                          help="TOML config file (default $CONFIG_PATH or user_data/config.toml)"),
    workers: Optional[int] = typer.Option(None, "--workers", min=1, help="Frames processed in parallel"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
):
    configure_logging(verbose)
    ctx.obj = {"config": str(config) if config is not None else None, "workers": workers}


# Include routers
app.command("synth")(synth_router.synth)
app.command("fuse")(fuse_router.fuse)
app.command("augment")(augment_router.augment)
app.command("eval")(eval_router.evaluate_command)
app.command("losscheck")(losscheck_router.losscheck)
app.command("report")(report_router.report)


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; 0 success, 1 validation failure, 2 usage error."""
    command = typer.main.get_command(app)
    args = list(argv) if argv is not None else sys.argv[1:]
    try:
        result = command.main(args=args, prog_name="spl3d", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 2
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        return 1
    except (Spl3dError, ValueError) as e:
        # pydantic ValidationError is a ValueError
        logger.error("%s", e)
        return 1
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(run_command())
