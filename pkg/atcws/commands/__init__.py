"""Subcommands; each module registers one parser and its handler."""

from . import attack, check_wf, explore, list_protocols, sim, tgndc, time_props, trace

COMMANDS = [check_wf, explore, trace, time_props, sim, tgndc, attack, list_protocols]
