"""
Command Line Interface for datadep
Paths and reports go to stdout; prompts, progress and diagnostics to stderr
"""

import json
import os
import shutil
import sqlite3
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import click

from . import __version__
from .acquire import resolve
from .checksum_utils import sha256_file
from .config import ENV_STORE, Settings, get_settings, load_env_file
from .consent import PromptIO
from .db_utils import get_ledger
from .errors import DataDepError, ExitStatus, NoWritableStoreError
from .http_utils import make_session
from .locate import (
    LoadPath,
    Origin,
    default_load_path,
    planned_store_dir,
    search,
    with_store,
)
from .logging_utils import configure_logging, get_logger
from .manifest import load_manifest
from .registry import Registry, validate_name
from .staging import reap_stale
from .status import (
    FAILED,
    MANUAL,
    as_dict,
    dep_status,
    list_rows,
    verify_local,
    verify_remote,
)
from .text_cleaner import format_size, truncate_text

log = get_logger(__name__)


@dataclass
class CliContext:
    env: Dict[str, str]
    settings: Settings
    manifest_path: str
    _registry: Optional[Registry] = None

    def registry(self) -> Registry:
        if self._registry is None:
            self._registry = load_manifest(self.manifest_path).to_registry()
        return self._registry

    def load_path(self) -> LoadPath:
        return with_store(default_load_path(self.env), self.env)


def _fail(error: DataDepError) -> None:
    click.echo(f"Error: {error}", err=True)
    raise SystemExit(error.exit_code)


def _progress_printer():
    if not sys.stderr.isatty():
        return None

    def report(filename: str, done: int, total: Optional[int]) -> None:
        of = f" / {format_size(total)}" if total else ""
        end = done == total
        click.echo(f"\r{filename}: {format_size(done)}{of}", nl=end, err=True)

    return report


def _echo_json(rows) -> None:
    for row in rows:
        click.echo(json.dumps(as_dict(row), sort_keys=True))


def _echo_table(records: List[dict], columns: Sequence[str]) -> None:
    if not records:
        click.echo("  ".join(columns))
        return
    import pandas as pd

    frame = pd.DataFrame(records, columns=list(columns))
    click.echo(frame.fillna("").to_string(index=False))


def _selected(ctx: CliContext, names: Sequence[str], all_: bool) -> List[str]:
    registry = ctx.registry()
    if all_:
        return registry.names()
    if not names:
        raise click.UsageError("Give one or more NAMES, or --all.")
    return list(names)


@click.group()
@click.option(
    "--manifest",
    "manifest_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Manifest file (default: $DATADEP_MANIFEST or ./DataDeps.toml).",
)
@click.option("-v", "--verbose", count=True, help="More diagnostics on stderr.")
@click.version_option(__version__, prog_name="datadep")
@click.pass_context
def cli(ctx, manifest_path, verbose):
    """Resolve named data dependencies to local paths, fetching them on first use."""
    load_env_file()
    env = dict(os.environ)
    settings = get_settings(env)
    if verbose:
        configure_logging("DEBUG" if verbose > 1 else "INFO")
    else:
        configure_logging(settings.log_level)
    ctx.obj = CliContext(env, settings, manifest_path or settings.manifest_path)


@cli.command("resolve")
@click.argument("name")
@click.pass_obj
def cmd_resolve(obj: CliContext, name):
    """Print the absolute path of NAME, downloading it if needed."""
    try:
        with make_session() as session:
            resolution = resolve(
                obj.registry(),
                name,
                obj.load_path(),
                obj.env,
                PromptIO.from_sys(),
                http_client=session,
                progress=_progress_printer(),
            )
    except DataDepError as e:
        _fail(e)
    click.echo(resolution.path)


@cli.command("fetch")
@click.argument("names", nargs=-1)
@click.option("--all", "all_", is_flag=True, help="Fetch every dependency in manifest order.")
@click.option("--keep-going", is_flag=True, help="Continue after a failure.")
@click.pass_obj
def cmd_fetch(obj: CliContext, names, all_, keep_going):
    """Resolve dependencies eagerly, e.g. when baking a CI image."""
    try:
        selected = _selected(obj, names, all_)
    except DataDepError as e:
        _fail(e)

    exit_code = ExitStatus.SUCCESS
    load_path = obj.load_path()
    with make_session() as session:
        for name in selected:
            try:
                resolution = resolve(
                    obj.registry(),
                    name,
                    load_path,
                    obj.env,
                    PromptIO.from_sys(),
                    http_client=session,
                    progress=_progress_printer(),
                )
            except DataDepError as e:
                click.echo(f"Error: {e}", err=True)
                if exit_code == ExitStatus.SUCCESS:
                    exit_code = e.exit_code
                if not keep_going:
                    break
                continue
            click.echo(resolution.path)

    if exit_code:
        raise SystemExit(exit_code)


@cli.command("list")
@click.option("--json", "as_json", is_flag=True, help="One JSON object per line.")
@click.pass_obj
def cmd_list(obj: CliContext, as_json):
    """List declared dependencies."""
    try:
        rows = list_rows(obj.registry())
    except DataDepError as e:
        _fail(e)
    if as_json:
        _echo_json(rows)
    else:
        _echo_table([as_dict(r) for r in rows], ("name", "kind", "sources"))


@cli.command("status")
@click.option("--json", "as_json", is_flag=True, help="One JSON object per line.")
@click.pass_obj
def cmd_status(obj: CliContext, as_json):
    """Show where each dependency is installed."""
    try:
        registry = obj.registry()
    except DataDepError as e:
        _fail(e)

    load_path = obj.load_path()
    rows = [dep_status(spec, load_path) for spec in registry]
    if as_json:
        _echo_json(rows)
        return

    records = []
    for row in rows:
        where = row.path or ""
        if row.state == MANUAL:
            where = "expected in: " + "; ".join(row.locations)
        records.append(
            {"name": row.name, "state": row.state, "origin": row.origin or "", "path": where}
        )
    _echo_table(records, ("name", "state", "origin", "path"))


@cli.command("verify")
@click.argument("names", nargs=-1)
@click.option("--all", "all_", is_flag=True, help="Verify every dependency.")
@click.option("--remote", is_flag=True, help="Check that source URLs are still reachable.")
@click.option("--strict", is_flag=True, help="Treat not-fetched dependencies as failures.")
@click.option("--timeout", type=float, default=None, help="Per-request timeout for --remote.")
@click.option("--json", "as_json", is_flag=True, help="One JSON object per line.")
@click.pass_obj
def cmd_verify(obj: CliContext, names, all_, remote, strict, timeout, as_json):
    """Re-check stored downloads against their checksums, or probe URLs with --remote."""
    try:
        registry = obj.registry()
        specs = [registry.lookup(name) for name in _selected(obj, names, all_)]
    except DataDepError as e:
        _fail(e)

    if remote:
        with make_session() as session:
            rows = verify_remote(specs, session, timeout or obj.settings.timeout_secs)
        if as_json:
            _echo_json(rows)
        else:
            for row in rows:
                state = "OK" if row.ok else "DECAYED"
                status = row.status if row.status is not None else row.error
                click.echo(f"{state:<8} {row.name}  {row.url}  {status}")
        if not all(row.ok for row in rows):
            raise SystemExit(ExitStatus.FAILURE)
        return

    load_path = obj.load_path()
    rows = [verify_local(spec, load_path) for spec in specs]
    if as_json:
        _echo_json(rows)
    else:
        for row in rows:
            line = f"{row.state.upper():<18} {row.name}"
            if row.detail:
                line += f"  ({truncate_text(row.detail, 80)})"
            click.echo(line)
            for check in row.files:
                if not check.ok:
                    click.echo(
                        f"    {check.filename}: expected {check.expected}, computed {check.computed}"
                    )

    if any(row.state == FAILED for row in rows):
        raise SystemExit(ExitStatus.CHECKSUM_MISMATCH)
    if any(row.failed(strict) for row in rows):
        raise SystemExit(ExitStatus.FAILURE)


@cli.command("remove")
@click.argument("name", required=False)
@click.option("--gc", is_flag=True, help="Delete staging leftovers older than 24 hours.")
@click.pass_obj
def cmd_remove(obj: CliContext, name, gc):
    """Delete NAME from the writable store."""
    load_path = obj.load_path()
    store = planned_store_dir(load_path, obj.env)
    if store is None:
        _fail(NoWritableStoreError([]))
    if not obj.env.get(ENV_STORE) and store in load_path.directories(Origin.SYSTEM_STORE):
        click.echo(
            f"Error: {store} is the system store; datadep only deletes from it "
            f"when {ENV_STORE} names it",
            err=True,
        )
        raise SystemExit(ExitStatus.FAILURE)

    if gc:
        removed = reap_stale(store)
        for path in removed:
            click.echo(path)
        click.echo(f"Removed {len(removed)} stale staging entr{'y' if len(removed) == 1 else 'ies'}", err=True)
        if name is None:
            return

    if name is None:
        raise click.UsageError("Give a NAME, or --gc.")

    try:
        validate_name(name)
    except DataDepError as e:
        _fail(e)

    target = os.path.join(store, name)
    real_store = os.path.realpath(store)
    if os.path.dirname(os.path.realpath(target)) != real_store:
        click.echo(f"Error: refusing to delete {target}: it resolves outside {store}", err=True)
        raise SystemExit(ExitStatus.FAILURE)

    if os.path.isdir(target):
        try:
            shutil.rmtree(target)
        except OSError as e:
            click.echo(f"Error: could not remove {target}: {e}", err=True)
            raise SystemExit(ExitStatus.FAILURE)
        try:
            ledger = get_ledger(store, create=False)
            if ledger is not None:
                ledger.forget(name)
        except sqlite3.Error as e:
            log.warning(f"Could not update fetch ledger: {e}")
        click.echo(f"Removed {target}", err=True)

        shadow = search(load_path, name)
        if shadow is not None:
            click.echo(
                f"{name} is still available from {shadow.path} ({shadow.origin.value}), "
                "which was not removed",
                err=True,
            )
        return

    found = search(load_path, name)
    if found is not None:
        click.echo(
            f"Error: {name} is not in the writable store {store}; it is installed at "
            f"{found.path} ({found.origin.value}), which datadep will not delete",
            err=True,
        )
    else:
        click.echo(f"Error: {name} is not installed", err=True)
    raise SystemExit(ExitStatus.FAILURE)


@cli.command("checksum")
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
def cmd_checksum(files):
    """Print the sha256 of FILES, for pinning in DataDeps.toml."""
    for path in files:
        try:
            digest = sha256_file(path)
        except DataDepError as e:
            _fail(e)
        click.echo(f"{digest}  {path}")


def main() -> None:
    cli(prog_name="datadep")
