"""Command-line client for the experiment service.

By default commands execute against an in-process service; pass
``--server URL`` to target a running instance over HTTP instead.
Exit status of ``run`` is 0 when every asserted criterion passed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .experiments import ConfigError
from .service import RunRequest, handle_presets, handle_run


def parse_config_file(path: str) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment; blank lines ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


class _LocalClient:
    def presets(self) -> dict:
        return handle_presets().model_dump()

    def run(self, request: RunRequest) -> dict:
        return handle_run(request).model_dump()


class _HttpClient:
    def __init__(self, base_url: str):
        import httpx

        self._client = httpx.Client(base_url=base_url, timeout=3600.0)

    def presets(self) -> dict:
        resp = self._client.get("/presets")
        resp.raise_for_status()
        return resp.json()

    def run(self, request: RunRequest) -> dict:
        resp = self._client.post("/run", json=request.model_dump())
        if resp.status_code == 400:
            raise ConfigError(resp.json().get("detail", "invalid configuration"))
        resp.raise_for_status()
        return resp.json()


def _client(server: str | None):
    return _HttpClient(server) if server else _LocalClient()


@click.group()
def main():
    """Numerical experiments for determinantal processes on curved surfaces."""


@main.command("run")
@click.argument("experiment")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="flat key=value configuration file")
@click.option("--seed", type=int, default=None, help="master seed override")
@click.option("--out", "out_dir", type=click.Path(), default="out",
              help="directory for CSV tables and report.json")
@click.option("--replicas", type=int, default=None, help="Monte Carlo replica override")
@click.option("--server", default=None, help="run against this service URL instead of in-process")
def run_cmd(experiment, config_path, seed, out_dir, replicas, server):
    """Run one experiment suite and write its CSV + JSON outputs."""
    options: dict[str, str] = {}
    file_seed = None
    try:
        if config_path:
            options = parse_config_file(config_path)
            exp_in_file = options.pop("experiment", None)
            if exp_in_file and exp_in_file != experiment:
                raise ConfigError(
                    f"config file names experiment {exp_in_file!r}, command line says {experiment!r}"
                )
            if "seed" in options:
                file_seed = int(options.pop("seed"))
        if replicas is not None:
            options["replicas"] = str(replicas)
        master_seed = seed if seed is not None else (file_seed if file_seed is not None else 0)
        request = RunRequest(experiment=experiment, options=options, seed=master_seed)
        result = _client(server).run(request)
    except ConfigError as exc:
        raise click.UsageError(str(exc))
    except Exception as exc:
        click.echo(f"FAIL {experiment}: {exc}", err=True)
        sys.exit(1)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for payload in result["files"]:
        (out / payload["name"]).write_text(payload["content"])
    (out / "report.json").write_text(json.dumps(result["report"], indent=2) + "\n")

    for crit in result["report"]["criteria"]:
        status = "PASS" if crit["passed"] else "FAIL"
        click.echo(f"{status} {crit['name']}: value={crit['value']:.6g} ({crit['threshold']})")
    click.echo(("PASS" if result["passed"] else "FAIL") + f" {experiment} -> {out}")
    sys.exit(0 if result["passed"] else 1)


@main.command("list-presets")
@click.option("--server", default=None, help="query this service URL instead of in-process")
def list_presets_cmd(server):
    """List experiment ids and named test functions."""
    data = _client(server).presets()
    click.echo("experiments:")
    for name in sorted(data["experiments"]):
        click.echo(f"  {name:<20} {data['experiments'][name]}")
    click.echo("phi presets:")
    for name in sorted(data["phi_presets"]):
        click.echo(f"  {name:<20} {data['phi_presets'][name]}")


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve_cmd(host, port):
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
