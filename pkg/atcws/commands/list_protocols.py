"""
list-protocols: the bundled protocol encodings.
"""

import argparse

from ..models import Settings
from ..protocols import entries

NAME = "list-protocols"


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(NAME, parents=parents, help="List the bundled protocols")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    for item in entries():
        defaults = ", ".join(f"{key}={value}" for key, value in item.defaults)
        print(f"{item.name}: {item.summary}")
        print(f"  variants: {', '.join(item.variants)}")
        print(f"  parameters: {defaults}")
        if item.attack_variant:
            print(f"  attack: {item.attack_variant}")
    return 0
