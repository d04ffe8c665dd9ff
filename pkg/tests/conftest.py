"""
Pytest fixtures and configuration.

Provides shared fixtures for small networks, bundled protocol instances,
the example corpus and an isolated working directory for CLI runs.
"""

import random
from pathlib import Path
from typing import Generator

import pytest

from atcws.config import CONFIG_ENV
from atcws.dsl import SourceModel, load
from atcws.messages import Atom, Var
from atcws.models import Settings
from atcws.protocols import ProtocolInstance, build
from atcws.protocols.common import network, tick_defs
from atcws.syntax import NIL, Bang, Call, Network, Node, ProcessDef, RcvTimeout, Sleep

CORPUS_DIR = Path(__file__).parent.parent / "atcws" / "corpus"


@pytest.fixture(scope="function")
def corpus_dir() -> Path:
    """
    Location of the bundled models, queries and traces.

    Returns:
        Path to atcws/corpus.
    """
    return CORPUS_DIR


@pytest.fixture(scope="function")
def workdir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Generator[Path, None, None]:
    """
    Run in an empty directory with no configuration file in sight.

    Args:
        tmp_path: Pytest temporary directory.
        monkeypatch: Pytest monkeypatch fixture.

    Yields:
        The temporary working directory.
    """
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    monkeypatch.chdir(tmp_path)
    yield tmp_path


@pytest.fixture(scope="function")
def settings() -> Settings:
    """
    Default settings.

    Returns:
        Settings with every field at its default.
    """
    return Settings()


@pytest.fixture(scope="function")
def rng() -> random.Random:
    """
    A seeded generator so randomized suites are repeatable.

    Returns:
        random.Random seeded with a fixed value.
    """
    return random.Random(20240611)


@pytest.fixture(scope="function")
def tick_network() -> Network:
    """
    A single node that only lets time pass.

    Returns:
        m[Tick] with no neighbors.
    """
    return Network((Node("m", Call("Tick")),), tick_defs())


@pytest.fixture(scope="function")
def ping_network() -> Network:
    """
    p broadcasts ping every slot; q hears it and reports to the observer.

    Returns:
        p[Ping] | q[Echo] with q also neighboring obs.
    """
    defs = {
        "Ping": ProcessDef("Ping", (), Bang(Atom("ping"), Sleep(Call("Ping")))),
        "Echo": ProcessDef("Echo", (), RcvTimeout("x", Sleep(Bang(Var("x"), NIL)), Call("Echo"))),
    }
    return network(
        Node("p", Call("Ping"), frozenset({"q"})),
        Node("q", Call("Echo"), frozenset({"p", "obs"})),
        defs=defs,
    )


@pytest.fixture(scope="function")
def relay_model(corpus_dir: Path) -> SourceModel:
    """
    The relay example model.

    Args:
        corpus_dir: Corpus location fixture.

    Returns:
        Parsed models/relay.atcws.
    """
    return load(corpus_dir / "models" / "relay.atcws")


@pytest.fixture(scope="function")
def boot_integrity() -> ProtocolInstance:
    """
    μTESLA key chain bootstrapping, integrity variant, n = 8.

    Returns:
        The protocol instance.
    """
    return build("mutesla-boot", "integrity", n=8)


@pytest.fixture(scope="function")
def boot_agreement() -> ProtocolInstance:
    """
    μTESLA key chain bootstrapping, agreement variant, n = 8.

    Returns:
        The protocol instance.
    """
    return build("mutesla-boot", "agreement", n=8)


@pytest.fixture(scope="function")
def leap_agreement() -> ProtocolInstance:
    """
    LEAP+ pairwise key establishment, agreement variant, n = 8.

    Returns:
        The protocol instance.
    """
    return build("leap", "agreement", n=8)
