"""Thin command-line client for the control service.

The CLI only speaks the HTTP interface: with ``--url`` it talks to a
running server, otherwise it mounts the service in-process and sends
the same requests through an ASGI transport.  Response file bodies are
written under the output directory byte for byte, so identical
configs and seeds reproduce identical artifacts.

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 solver failure.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click
import httpx
import yaml
from pydantic import ValidationError

from .schemas import RunConfig

log = logging.getLogger("spinchain")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _setup_logging() -> None:
    level = os.environ.get("SPINCHAIN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _client(url: str | None) -> httpx.Client:
    if url:
        return httpx.Client(base_url=url, timeout=None)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _load_config(path: str, seed: int | None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise click.ClickException(f"cannot read config {path}: {exc}")
    if not isinstance(raw, dict):
        raise ValidationError.from_exception_data("RunConfig", [])
    cfg = RunConfig.model_validate(raw)
    if seed is not None:
        if cfg.optimizer is None:
            raise ConfigurationProblem("--seed given but the config has no optimizer section")
        cfg = cfg.model_copy(update={"optimizer": cfg.optimizer.model_copy(update={"seed": seed})})
    return cfg


class ConfigurationProblem(Exception):
    pass


def _write_files(out_dir: str, files: dict[str, str]) -> list[str]:
    base = Path(out_dir)
    base.mkdir(parents=True, exist_ok=True)
    written = []
    for name, body in files.items():
        path = base / name
        path.write_text(body, encoding="utf-8", newline="")
        written.append(str(path))
    return written


def _fail_from_response(resp: httpx.Response) -> int:
    try:
        detail = resp.json().get("detail", resp.text)
    except json.JSONDecodeError:
        detail = resp.text
    click.echo(f"error ({resp.status_code}): {detail}", err=True)
    return EXIT_CONFIG if resp.status_code == 422 else EXIT_SOLVER


@click.group()
def main() -> None:
    """Spin-chain control toolkit: simulate, optimize, verify."""
    _setup_logging()


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True), help="Run configuration (YAML or JSON).")
@click.option("--out", "out_dir", default="runs", show_default=True, help="Directory for result files.")
@click.option("--seed", type=int, default=None, help="Override the optimizer seed.")
@click.option("--url", default=None, help="Base URL of a running service (default: in-process).")
def simulate(config_path: str, out_dir: str, seed: int | None, url: str | None) -> None:
    """Propagate the configured control and export trajectory data."""
    try:
        cfg = _load_config(config_path, seed)
    except (ValidationError, ConfigurationProblem) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    with _client(url) as client:
        resp = client.post("/simulate", json=cfg.model_dump(mode="json", by_alias=True))
    if resp.status_code != 200:
        sys.exit(_fail_from_response(resp))
    body = resp.json()
    written = _write_files(out_dir, body["files"])
    click.echo(f"final infidelity: {body['final_infidelity']:.12e}")
    click.echo(f"objective I_p: {body['objective']:.12e}   Phi_p: {body['objective_with_penalty']:.12e}")
    for path in written:
        log.info("wrote %s", path)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True), help="Run configuration (YAML or JSON).")
@click.option("--out", "out_dir", default="runs", show_default=True, help="Directory for result files.")
@click.option("--seed", type=int, default=None, help="Override the optimizer seed.")
@click.option("--restarts", type=int, default=1, show_default=True, help="Independent optimizer restarts.")
@click.option("--url", default=None, help="Base URL of a running service (default: in-process).")
def optimize(config_path: str, out_dir: str, seed: int | None, restarts: int, url: str | None) -> None:
    """Run the configured optimizer and export convergence data."""
    try:
        cfg = _load_config(config_path, seed)
    except (ValidationError, ConfigurationProblem) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if cfg.optimizer is None:
        click.echo("configuration error: optimize requires an 'optimizer' section", err=True)
        sys.exit(EXIT_CONFIG)
    payload = {"config": cfg.model_dump(mode="json", by_alias=True), "restarts": restarts}
    with _client(url) as client:
        resp = client.post("/optimize", json=payload)
    if resp.status_code != 200:
        sys.exit(_fail_from_response(resp))
    body = resp.json()
    written = _write_files(out_dir, body["files"])
    click.echo(f"best objective: {body['best_objective']:.12e}")
    click.echo(f"forward solves: {body['forward_solves']}   status: {body['status']}")
    for summary in body["restarts"]:
        log.info(
            "restart %d (seed %d): best %.6e after %d solves",
            summary["restart"], summary["seed"], summary["best_objective"], summary["forward_solves"],
        )
    for warning in body["warnings"]:
        click.echo(f"warning: {warning}", err=True)
    for path in written:
        log.info("wrote %s", path)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--url", default=None, help="Base URL of a running service (default: in-process).")
@click.option("--h0-sign-flip", is_flag=True, hidden=True, help="Self-test hook: corrupt the dynamics.")
def verify(url: str | None, h0_sign_flip: bool) -> None:
    """Run the built-in analytic oracle suite and print a pass/fail table."""
    with _client(url) as client:
        resp = client.post("/verify", json={"h0_sign_flip": h0_sign_flip})
    if resp.status_code != 200:
        sys.exit(_fail_from_response(resp))
    body = resp.json()
    width = max(len(c["name"]) for c in body["checks"])
    for check in body["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        click.echo(
            f"[{status}] {check['name']:<{width}}  measured {check['measured']:.3e}"
            f"  limit {check['threshold']:.1e}  {check['detail']}"
        )
    click.echo("all checks passed" if body["passed"] else "verification FAILED")
    sys.exit(EXIT_OK if body["passed"] else EXIT_VERIFY_FAILED)


if __name__ == "__main__":
    main()
