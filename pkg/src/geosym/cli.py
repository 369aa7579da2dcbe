"""Command-line client for the planning service.

By default every command talks to an in-process copy of the HTTP service, so
no server needs to be running; ``--server URL`` targets a remote instance.

Exit codes: 0 success, 1 planning/scenario failure, 2 usage or request error.
"""

from __future__ import annotations

import json
import sys

import click
import httpx


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _request(server: str | None, method: str, path: str, payload: dict | None = None):
    try:
        with _client(server) as client:
            resp = client.request(method, path, json=payload)
    except httpx.HTTPError as exc:
        click.echo(f"error: cannot reach service: {exc}", err=True)
        sys.exit(2)
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(2)
    return resp


@click.group()
def main() -> None:
    """Combined symbolic/geometric task planner."""


_server_option = click.option("--server", default=None, help="remote service URL")


@main.command()
@click.option("--scene", default="reception-open", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--held", multiple=True, default=("b1", "b2"), show_default=True)
@click.option("--credit", default=50, show_default=True)
@click.option("--task", "tasks", multiple=True, default=("(MANAGEORDER m)",), show_default=True)
@click.option(
    "--strategy",
    type=click.Choice(["geometric-first", "htn-only"]),
    default="geometric-first",
    show_default=True,
)
@click.option("--geo-budget", default=8, show_default=True)
@click.option("--experiment", is_flag=True, help="fold picks into placement tasks")
@click.option("--json", "as_json", is_flag=True, help="print the raw response")
@_server_option
def plan(scene, seed, held, credit, tasks, strategy, geo_budget, experiment, as_json, server):
    """Plan the receptionist tasks on a named scene."""
    resp = _request(
        server,
        "POST",
        "/plan",
        {
            "scene": scene,
            "seed": seed,
            "held": list(held),
            "credit": credit,
            "tasks": list(tasks),
            "strategy": strategy,
            "geo_budget": geo_budget,
            "experiment": experiment,
        },
    )
    data = resp.json()
    if as_json:
        click.echo(json.dumps(data, indent=2))
    elif data["ok"]:
        for i, step in enumerate(data["plan"], 1):
            click.echo(f"{i:3d}. {step['name']} {' '.join(step['args'])}")
        s = data["stats"]
        click.echo(
            f"-- backtracks: {s['htn_backtracks']} symbolic, "
            f"{s['geo_alternatives']} geometric; {s['wall_time']:.2f}s"
        )
    else:
        click.echo(f"no plan found ({data['failure']})", err=True)
    sys.exit(0 if data["ok"] else 1)


@main.command()
@click.option("--trials", default=10, show_default=True)
@click.option("--seed0", default=0, show_default=True)
@click.option(
    "--strategy",
    type=click.Choice(["geometric-first", "htn-only"]),
    default="geometric-first",
    show_default=True,
)
@click.option("--geo-budget", default=8, show_default=True)
@click.option("--credit", default=3, show_default=True)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["csv", "text", "json"]),
    default="csv",
    show_default=True,
)
@click.option("--output", type=click.Path(dir_okay=False, writable=True), default=None)
@_server_option
def bench(trials, seed0, strategy, geo_budget, credit, fmt, output, server):
    """Run the randomized batch experiment and report statistics."""
    resp = _request(
        server,
        "POST",
        "/bench",
        {
            "trials": trials,
            "seed0": seed0,
            "strategy": strategy,
            "geo_budget": geo_budget,
            "credit": credit,
        },
    )
    data = resp.json()
    if fmt == "csv":
        out = data["csv"]
    elif fmt == "text":
        out = data["text"]
    else:
        out = json.dumps(data, indent=2)
    if output:
        with open(output, "w") as fh:
            fh.write(out)
    else:
        click.echo(out, nl=False)
    sys.exit(0 if data["success_rate"] > 0 else 1)


@main.command()
@click.argument("name", required=False)
@click.option("--json", "as_json", is_flag=True, help="print the raw response")
@_server_option
def scenario(name, as_json, server):
    """Run a named validation scenario (omit NAME to list them)."""
    if name is None:
        data = _request(server, "GET", "/scenarios").json()
        for s in data["scenarios"]:
            click.echo(s)
        sys.exit(0)
    data = _request(server, "POST", f"/scenario/{name}").json()
    if as_json:
        click.echo(json.dumps(data, indent=2))
    else:
        click.echo(f"{data['name']}: {'PASS' if data['passed'] else 'FAIL'}")
        for line in data["diagnostics"]:
            click.echo(f"  - {line}")
    sys.exit(0 if data["passed"] else 1)


@main.command()
@click.argument("variant")
@click.option("--seed", default=0, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False, writable=True), default=None)
@_server_option
def snapshot(variant, seed, output, server):
    """Write a top-down SVG snapshot of a scene variant."""
    resp = _request(server, "GET", f"/snapshot/{variant}?seed={seed}")
    if output:
        with open(output, "w") as fh:
            fh.write(resp.text)
    else:
        click.echo(resp.text)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
