"""Run manifests: flat key=value files that make every output replayable."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

MANIFEST_NAME = "manifest.txt"


@dataclass
class RunManifest:
    """What produced a set of artifacts: subcommand, resolved flags, outputs."""

    subcommand: str
    version: str
    args: dict[str, str]
    artifacts: list[str]

    def write(self, directory: Path) -> Path:
        path = Path(directory) / MANIFEST_NAME
        lines = [f"subcommand={self.subcommand}", f"version={self.version}"]
        for key in sorted(self.args):
            lines.append(f"arg.{key}={self.args[key]}")
        for artifact in self.artifacts:
            lines.append(f"artifact={artifact}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @classmethod
    def read(cls, path: Path) -> "RunManifest":
        subcommand = ""
        version = ""
        args: dict[str, str] = {}
        artifacts: list[str] = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            key, _, value = line.partition("=")
            if key == "subcommand":
                subcommand = value
            elif key == "version":
                version = value
            elif key == "artifact":
                artifacts.append(value)
            elif key.startswith("arg."):
                args[key[4:]] = value
        if not subcommand:
            raise ValueError(f"{path} is not a run manifest")
        return cls(subcommand=subcommand, version=version, args=args, artifacts=artifacts)

    def to_argv(self, out_dir: str | None = None) -> list[str]:
        """Rebuild the command line this manifest records."""
        argv = [self.subcommand]
        for key, value in sorted(self.args.items()):
            if key == "out":
                continue
            argv.extend([f"--{key.replace('_', '-')}", value])
        argv.extend(["--out", out_dir if out_dir is not None else self.args.get("out", ".")])
        return argv
