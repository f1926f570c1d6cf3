"""Command line entry points.

Every subcommand except serve is a thin client over the HTTP service:
it builds one request, posts it to the in-process app (or to --server
when pointed at a running instance), and writes the response to files
or stdout. A --config JSON file overrides flags of the same meaning.
Exit status is 0 only when every requested check passed.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from .formats import (
    bits_to_str,
    load_leaves,
    save_tree_json,
    tree_from_doc,
    write_leaves,
    write_maps_tsv,
    write_nodes_tsv,
)
from .harness.verifiers import LEMMA_NAMES


class ServiceError(RuntimeError):
    """A non-2xx response from the service."""


def post(path: str, body: dict, server: str | None = None) -> dict:
    """POST one JSON request, in process unless a server URL is given."""
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            response = client.post(path, json=body)
    else:
        from .service import create_app

        async def go():
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://indeltree.internal", timeout=None
            ) as client:
                return await client.post(path, json=body)

        response = asyncio.run(go())
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise ServiceError(f"{path} failed ({response.status_code}): {detail}")
    return response.json()


def _apply_config(args: argparse.Namespace, aliases: dict[str, str]) -> None:
    """Overlay --config file values onto parsed flags; config wins."""
    if not getattr(args, "config", None):
        return
    with open(args.config, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    mapping = {dest: dest for dest in aliases.values()}
    mapping.update(aliases)
    for key, value in data.items():
        dest = mapping.get(key)
        if dest is None:
            raise SystemExit(f"unknown config key {key!r} for this command")
        setattr(args, dest, value)


_MODEL_ALIASES = {
    "arity": "d",
    "height": "H",
    "seq_len": "k",
    "p_sub": "ps",
    "p_del": "pd",
    "p_ins": "pi",
}


def _write_json(data: dict, path: str | None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_simulate(args: argparse.Namespace) -> int:
    _apply_config(args, {**_MODEL_ALIASES, "zeta": "zeta", "seed": "seed", "out": "out"})
    body = {
        "arity": args.d,
        "height": args.H,
        "seq_len": args.k,
        "p_sub": args.ps,
        "p_del": args.pd,
        "p_ins": args.pi,
        "seed": args.seed,
        "zeta": args.zeta,
        "include_tree": args.out is not None,
    }
    result = post("/simulate", body, args.server)
    if args.out is None:
        for leaf in result["leaves"]:
            print(leaf)
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tree = tree_from_doc(result["tree"])
    write_nodes_tsv(tree, out / "nodes.tsv")
    write_maps_tsv(tree, out / "maps.tsv")
    write_leaves(tree.leaves(), out / "leaves.txt")
    save_tree_json(tree, out / "tree.json")
    print(
        f"wrote {out}/nodes.tsv maps.tsv leaves.txt tree.json "
        f"(lengths {result['min_len']}..{result['max_len']}, "
        f"within band: {result['length_ok']})"
    )
    return 0


def cmd_reconstruct(args: argparse.Namespace) -> int:
    aliases = {
        **_MODEL_ALIASES,
        "anchor_scale": "C",
        "beta": "beta",
        "delta": "delta",
        "anchor_len": "anchor_len",
        "seed": "seed",
        "leaves": "leaves",
        "out": "out",
        "diagnostics": "diagnostics",
    }
    _apply_config(args, aliases)
    leaves = [bits_to_str(bits) for bits in load_leaves(args.leaves)]
    body = {
        "arity": args.d,
        "height": args.H,
        "seq_len": args.k,
        "p_sub": args.ps,
        "anchor_scale": args.C,
        "beta": args.beta,
        "delta": args.delta,
        "anchor_len": args.anchor_len,
        "leaves": leaves,
        "seed": args.seed,
        "diagnostics": args.diagnostics is not None,
    }
    result = post("/reconstruct", body, args.server)
    diagnostics = result.pop("diagnostics", None)
    if args.diagnostics:
        _write_json(diagnostics, args.diagnostics)
    _write_json(result, args.out)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    _apply_config(args, {"lemma": "lemma", "trials": "trials", "seed": "seed", "spec": "spec"})
    body: dict = {"lemma": args.lemma, "trials": args.trials, "seed": args.seed}
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            body["spec"] = json.load(fh)
    result = post("/verify", body, args.server)
    _write_json(result, args.out)
    return 0 if result.get("pass") else 1


def cmd_sweep(args: argparse.Namespace) -> int:
    _apply_config(args, {"spec": "spec", "out_dir": "out_dir", "threads": "threads"})
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    body: dict = {"spec": spec}
    if args.threads is not None:
        body["threads"] = args.threads
    result = post("/sweep", body, args.server)
    out_dir = args.out_dir or spec.get("out_dir") or f"reports/{spec.get('name', 'sweep')}"
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.csv").write_text(result["records_csv"], encoding="utf-8")
    (out / "timings.csv").write_text(result["timings_csv"], encoding="utf-8")
    (out / "summary.json").write_text(
        json.dumps(result["summary"], indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    cells = result["summary"]["cells"]
    for label, cell in sorted(cells.items()):
        if not cell.get("feasible", True):
            print(f"{label}: infeasible ({cell.get('reason', '')})")
        else:
            print(
                f"{label}: {cell['trials']}/{cell['requested_trials']} trials, "
                f"mean agreement {cell.get('recon_agreement_mean')}"
            )
    print(f"wrote {out}/records.csv summary.json timings.csv")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return 0


def _add_model_flags(sub: argparse.ArgumentParser, with_indels: bool) -> None:
    sub.add_argument("--d", type=int, required=True, help="tree arity")
    sub.add_argument("--H", type=int, required=True, help="tree height")
    sub.add_argument("--k", type=int, required=True, help="root sequence length")
    sub.add_argument("--ps", type=float, default=0.0, help="substitution probability")
    if with_indels:
        sub.add_argument("--pd", type=float, default=0.0, help="deletion probability")
        sub.add_argument("--pi", type=float, default=0.0, help="insertion probability")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="indeltree",
        description="Simulate trait broadcast on a tree, reconstruct roots, verify guarantees.",
    )
    parser.add_argument(
        "--server", default=None, help="base URL of a running service (default: in process)"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="evolve one tree and write its serializations")
    _add_model_flags(sim, with_indels=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--zeta", type=float, default=0.1, help="tolerated length deviation")
    sim.add_argument("--out", default=None, help="output directory (default: leaves to stdout)")
    sim.add_argument("--config", default=None, help="JSON file overriding flags")
    sim.set_defaults(func=cmd_simulate)

    rec = commands.add_parser("reconstruct", help="estimate the root from a leaves file")
    rec.add_argument("--leaves", required=True, help="file with one bit string per leaf")
    _add_model_flags(rec, with_indels=False)
    rec.add_argument("--C", type=float, default=8.0, help="anchor length scale (C log n)")
    rec.add_argument("--beta", type=float, default=None, help="per-site error budget")
    rec.add_argument("--delta", type=float, default=None, help="drift threshold override")
    rec.add_argument("--anchor-len", type=int, default=None, help="anchor length override")
    rec.add_argument("--seed", type=int, default=0)
    rec.add_argument("--out", default=None, help="result JSON file (default: stdout)")
    rec.add_argument("--diagnostics", default=None, help="per-node diagnostics JSON file")
    rec.add_argument("--config", default=None, help="JSON file overriding flags")
    rec.set_defaults(func=cmd_reconstruct)

    ver = commands.add_parser("verify", help="run statistical checks of the guarantees")
    ver.add_argument("--lemma", default="all", choices=("all", *LEMMA_NAMES))
    ver.add_argument("--trials", type=int, default=None, help="trials per check (default: spec)")
    ver.add_argument("--seed", type=int, default=None)
    ver.add_argument("--spec", default=None, help="experiment spec JSON (default: packaged)")
    ver.add_argument("--out", default=None, help="verdict JSON file (default: stdout)")
    ver.add_argument("--config", default=None, help="JSON file overriding flags")
    ver.set_defaults(func=cmd_verify)

    swp = commands.add_parser("sweep", help="run an experiment spec and write reports")
    swp.add_argument("--spec", required=True, help="experiment spec JSON file")
    swp.add_argument("--out-dir", default=None, help="report directory")
    swp.add_argument("--threads", type=int, default=None, help="worker threads")
    swp.add_argument("--config", default=None, help="JSON file overriding flags")
    swp.set_defaults(func=cmd_sweep)

    srv = commands.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ServiceError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
