import argparse

from app.cli.commands import benchmark, curve, evaluate, predict, synth, train, tune

# Subcommands in the order they appear in --help
COMMANDS = [synth, train, predict, evaluate, curve, tune, benchmark]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uplift",
        description="CTS uplift forests, z-bar policy evaluation and the synthetic benchmark",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    for command in COMMANDS:
        command.register(subparsers)
    return parser
