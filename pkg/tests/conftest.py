from importlib.resources import files

import numpy as np
import pytest

from bandish_timing.notation import TEENTAAL, BeatCell, CellKind, Composition, CompositionLine, Verse, parse_notation


@pytest.fixture(scope="session")
def sample_text():
    return files("bandish_timing").joinpath("data/sample_bandish.csv").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def sample(sample_text):
    return parse_notation(sample_text)


def random_composition(rng: np.random.Generator, n_lines: int | None = None) -> Composition:
    """Random valid teentaal composition with rests, continuations and multi-syllable beats."""
    pool = ["ye", "ri", "aa", "li", "pi", "ya", "bi", "na", "sa", "khi", "ka", "la", "mo", "he", "ran", "ga"]
    notes = ["sa", "re", "ga", "ma", "pa", "dha", "ni", "sa'", "ni.", "re ga"]
    lines = []
    n_lines = n_lines or int(rng.integers(1, 5))
    for lid in range(1, n_lines + 1):
        cells = []
        for b in range(TEENTAAL.beats_per_cycle):
            r = rng.random()
            prev_rest = all(c.kind is CellKind.REST for c in cells)
            if r < 0.15:
                cells.append(BeatCell.rest())
            elif r < 0.3 and not (prev_rest and (lid == 1 or cells)):
                cells.append(BeatCell.continuation(note="s"))
            else:
                k = 2 if rng.random() < 0.12 else 1
                syls = tuple(pool[i] for i in rng.integers(len(pool), size=k))
                orn = "m" if rng.random() < 0.1 else None
                cells.append(BeatCell(CellKind.SYLLABLE, syls, notes[rng.integers(len(notes))], orn))
        verse = Verse.STHAYI if lid <= (n_lines + 1) // 2 else Verse.ANTARA
        lines.append(CompositionLine(lid, tuple(cells), verse))
    return Composition("random", "yaman", TEENTAAL, tuple(lines), "drut")


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(name: str, ok: bool, detail: str) -> None:
        line = f"{name} {'PASS' if ok else 'FAIL'}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
