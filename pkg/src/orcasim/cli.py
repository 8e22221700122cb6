"""Command-line entry point: ``orcasim run|list-presets|validate``."""
import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError
from .scenarios import PRESETS, apply_overrides, list_presets, load_config, preset_document, run_scenario


def _document(source):
    """Preset name or path to a JSON scenario file."""
    if source in PRESETS:
        return preset_document(source)
    path = Path(source)
    if not path.is_file():
        raise ConfigError("scenario", f"{source!r} is neither a preset nor a readable file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("document", f"invalid JSON: {exc}") from exc


def _parser():
    p = argparse.ArgumentParser(prog="orcasim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario from a preset name or JSON config")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--out-dir", type=Path)
    run.add_argument("--grid-points", type=int)
    run.add_argument("--velocity-classes", type=int)
    sub.add_parser("list-presets", help="list built-in presets")
    val = sub.add_parser("validate", help="validate a scenario config without running it")
    val.add_argument("config")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "list-presets":
            for name, description in list_presets():
                print(f"{name:12s} {description}")
            return 0
        doc = _document(args.config)
        if args.command == "validate":
            cfg = load_config(doc)
            print(f"{cfg.name}: valid ({cfg.kind})")
            return 0
        doc = apply_overrides(doc, args.seed, args.grid_points, args.velocity_classes)
        cfg = load_config(doc)
        out_dir = args.out_dir or Path("runs") / cfg.name
        report = run_scenario(cfg, out_dir)
        print(json.dumps(report["results"], indent=2, sort_keys=True, default=str))
        print(f"wrote {out_dir / 'report.json'}", file=sys.stderr)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # any module error is reported with a nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
