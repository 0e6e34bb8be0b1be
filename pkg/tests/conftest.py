"""Shared fixtures."""
from pathlib import Path

import pytest

from core.container import Container
from storage.models import UrnParams


@pytest.fixture(autouse=True)
def fresh_container():
    """Every test starts with an empty approximate-PMF cache."""
    Container.reset()
    yield
    Container.reset()


@pytest.fixture
def symmetric_params() -> UrnParams:
    """u = v = 1, p_W = p_B = 1/2: M_n ~ Binomial(n, 1/2)."""
    return UrnParams(u=1, v=1, p_w=0.5, p_b=0.5)


@pytest.fixture
def small_params() -> UrnParams:
    return UrnParams(u=1, v=1, p_w=0.1, p_b=0.3)


@pytest.fixture
def sars_params() -> UrnParams:
    """One wild-type ancestor, p_B = 1e-6, p_W = p_B / 3."""
    return UrnParams(u=0, v=1, p_w=1e-6 / 3, p_b=1e-6)


@pytest.fixture
def write_tsv(tmp_path: Path):
    """Write observation rows to a TSV file under tmp_path."""

    def _write(rows, name: str = "obs.tsv", header: bool = True, preamble: str = "") -> Path:
        lines = []
        if preamble:
            lines.append(preamble)
        if header:
            lines.append("sample_id\tsite\tdepth\talt_count\tstrand_bias")
        lines.extend("\t".join(str(v) for v in row) for row in rows)
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write
