"""Bundled example domains, shipped as package data."""

from importlib import resources


def names() -> list[str]:
    out = []
    for entry in resources.files(__package__).iterdir():
        if entry.name.endswith(".mdpl"):
            out.append(entry.name[:-5])
    return sorted(out)


def load(name: str) -> str:
    fname = name if name.endswith(".mdpl") else name + ".mdpl"
    res = resources.files(__package__) / fname
    if not res.is_file():
        raise KeyError(name)
    return res.read_text()
