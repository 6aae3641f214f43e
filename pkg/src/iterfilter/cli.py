"""Command-line entry point: prepare, train, filter, eval, ablate.

Every command takes ``--config path`` to a JSON file.  Relative paths inside a
config resolve against the config file's directory.  Outputs go to the
config's ``run_dir`` together with a resolved copy of the config.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .errors import ConfigError, CoverError, FormatError, InvalidInput, ShapeError
from .filter.model import ModelConfig, zero_model
from .geometry import normalize_to_unit_sphere, sample_mesh_uniform
from .io import read_off, read_xyz, write_off, write_xyz
from .metrics import chamfer_distance, evaluate, point_to_mesh
from .noise import NoiseKind, NoiseSpec, add_noise
from .nn import checkpoint
from .shapes import default_shapes

log = logging.getLogger("iterfilter")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
SEED_ENV = "ITERFILTER_SEED"
MANIFEST = "manifest.json"
CHECKPOINT = "checkpoint.json"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class NoiseEntry(_Strict):
    kind: NoiseKind = NoiseKind.ISOTROPIC_GAUSSIAN
    scale: float = Field(0.02, ge=0)
    seed: int = 0

    def spec(self) -> NoiseSpec:
        return NoiseSpec(self.kind, self.scale, self.seed)


class ModelSection(_Strict):
    iterations: int = Field(4, ge=1, le=12)
    encoder_dims: list[int] = [3, 32, 64, 128, 256]
    decoder_dims: list[int] = [256, 128, 64, 32, 3]
    theta_layers: int = Field(1, ge=1)
    k: int = Field(32, ge=1)


class TrainingSection(_Strict):
    epochs: int = Field(100, ge=1)
    steps_per_epoch: int = Field(0, ge=0)
    learning_rate: float = Field(1e-4, gt=0)
    batch_size: int = Field(1, ge=1)
    seed: int = 0
    noisy_patch_size: int = Field(1000, ge=2)
    clean_patch_size: int = Field(1200, ge=1)
    loss: Literal["adaptive", "fixed"] = "adaptive"
    sigma_min: float = Field(0.005, gt=0)
    sigma_max: float = Field(0.02, gt=0)
    noise_kind: NoiseKind = NoiseKind.ISOTROPIC_GAUSSIAN
    model: ModelSection = Field(default_factory=ModelSection)

    def build(self, **overrides):
        from .filter.train import TrainingConfig

        d = self.model_dump(mode="json")
        d.update(overrides)
        d["model"] = ModelConfig(**d["model"])
        return TrainingConfig(**d)


class PrepareConfig(_Strict):
    run_dir: str
    mesh_dir: str | None = None
    builtin_shapes: list[str] = []
    resolutions: list[int] = [2000]
    noise: list[NoiseEntry] = []
    seed: int = 0


class TrainConfig(_Strict):
    run_dir: str
    dataset: str
    training: TrainingSection = Field(default_factory=TrainingSection)
    debug_zero_model: bool = False


class FilterConfig(_Strict):
    run_dir: str
    checkpoint: str
    input: str
    output: str = "filtered.xyz"
    patch_size: int = Field(1000, ge=2)
    external_iters: int = Field(1, ge=1)
    selection: Literal["weight", "nearest_reference"] = "weight"
    seed: int = 0


class EvalConfig(_Strict):
    run_dir: str
    filtered: str
    clean: str
    mesh: str
    manifest: str | None = None
    bins: int = Field(50, ge=1)
    report: str = "report.json"
    histogram_csv: str = "histogram.csv"
    metadata: dict = {}


class AblateConfig(_Strict):
    run_dir: str
    dataset: str
    training: TrainingSection = Field(default_factory=TrainingSection)
    iterations: list[int] = [1, 2, 4, 8]
    losses: list[Literal["adaptive", "fixed"]] = ["adaptive", "fixed"]
    test_noise: list[NoiseEntry] = Field(default_factory=lambda: [NoiseEntry(scale=0.025, seed=1000)])
    patch_size: int = Field(1000, ge=2)
    seed: int = 0


SCHEMAS = {"prepare": PrepareConfig, "train": TrainConfig, "filter": FilterConfig,
           "eval": EvalConfig, "ablate": AblateConfig}


def load_config(command: str, path) -> tuple[BaseModel, Path]:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
    try:
        cfg = SCHEMAS[command].model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from None
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env_seed!r}") from None
        if isinstance(cfg, (TrainConfig,)):
            cfg.training.seed = seed
        else:
            cfg.seed = seed
    return cfg, path.resolve().parent


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def _run_dir(base: Path, cfg) -> Path:
    d = _resolve(base, cfg.run_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _snapshot(run_dir: Path, command: str, cfg: BaseModel) -> None:
    text = json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
    (run_dir / f"{command}.config.json").write_text(text, encoding="utf-8")


def _read_manifest(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid manifest JSON: {e.msg}", path, e.lineno) from None
    if "entries" not in doc:
        raise FormatError("manifest has no 'entries'", path)
    return doc


# prepare

def cmd_prepare(cfg: PrepareConfig, base: Path, args) -> int:
    meshes = {}
    if cfg.mesh_dir is not None:
        mesh_dir = _resolve(base, cfg.mesh_dir)
        if not mesh_dir.is_dir():
            raise InvalidInput(f"mesh directory not found: {mesh_dir}")
        for p in sorted(mesh_dir.glob("*.off")):
            meshes[p.stem] = read_off(p)
    shapes = default_shapes()
    for name in cfg.builtin_shapes:
        if name not in shapes:
            raise ConfigError(f"unknown builtin shape {name!r}; choose from {sorted(shapes)}")
        meshes[name] = shapes[name]
    if not meshes:
        raise InvalidInput("no meshes found: mesh_dir is empty and no builtin_shapes given")
    if any(r < 1 for r in cfg.resolutions):
        raise ConfigError("resolutions must be positive")
    # everything is computed before the first write so errors leave no partial output
    files = {}
    entries = []
    for si, (name, mesh) in enumerate(sorted(meshes.items())):
        for res in cfg.resolutions:
            seed = cfg.seed + 1000 * si + res
            cloud, tf = normalize_to_unit_sphere(sample_mesh_uniform(mesh, res, seed))
            stem = f"{name}_{res}"
            entry = {"shape": name, "resolution": res, "seed": seed,
                     "cloud": f"clouds/{stem}.xyz", "mesh": f"meshes/{stem}.off",
                     "transform": tf.to_dict(), "noisy": []}
            files[entry["cloud"]] = ("xyz", cloud)
            files[entry["mesh"]] = ("off", mesh.transformed(tf))
            for ni, n in enumerate(cfg.noise):
                spec = n.spec()
                rel = f"noisy/{stem}_{spec.kind.value}_{spec.scale!r}_{spec.seed}.xyz"
                files[rel] = ("xyz", add_noise(cloud, spec))
                entry["noisy"].append({"path": rel, "noise": spec.to_dict()})
            entries.append(entry)
    run_dir = _run_dir(base, cfg)
    for rel, (kind, obj) in files.items():
        out = run_dir / rel
        out.parent.mkdir(parents=True, exist_ok=True)
        (write_xyz if kind == "xyz" else write_off)(out, obj)
    manifest = {"format": "iterfilter-dataset", "version": 1, "entries": entries}
    (run_dir / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                    encoding="utf-8")
    _snapshot(run_dir, "prepare", cfg)
    print(f"wrote {len(entries)} clouds to {run_dir}")
    return EXIT_OK


# train

def _load_dataset(path: Path):
    doc = _read_manifest(path)
    root = path.parent
    return doc, [read_xyz(root / e["cloud"]) for e in doc["entries"]]


def cmd_train(cfg: TrainConfig, base: Path, args) -> int:
    from .filter.train import train

    try:
        tcfg = cfg.training.build()
    except InvalidInput as e:
        raise ConfigError(str(e)) from None
    run_dir = _run_dir(base, cfg)
    ckpt = run_dir / CHECKPOINT
    model = None
    if ckpt.exists():
        if not args.resume:
            raise ConfigError(f"{ckpt} exists; pass --resume to continue from it")
        model, _ = checkpoint.load(ckpt)
        if model.config != tcfg.model:
            raise ConfigError("checkpoint model config differs from the training config")
    _snapshot(run_dir, "train", cfg)
    if cfg.debug_zero_model:
        checkpoint.save(ckpt, zero_model(tcfg.model), {"training": tcfg.to_dict(), "debug_zero_model": True})
        print(f"wrote zero-parameter checkpoint {ckpt}")
        return EXIT_OK
    _, clouds = _load_dataset(_resolve(base, cfg.dataset))

    def report(row):
        log.info("epoch %d step %d loss %.6g", row.epoch, row.step, row.loss)

    model, tlog = train(clouds, tcfg, model=model, callback=report)
    checkpoint.save(ckpt, model, {"training": tcfg.to_dict()})
    (run_dir / "train_log.csv").write_text(tlog.to_csv(), encoding="utf-8")
    print(f"trained {len(tlog.rows)} steps; final epoch mean loss {tlog.epoch_means[-1]:.6g}")
    return EXIT_OK


# filter

def cmd_filter(cfg: FilterConfig, base: Path, args) -> int:
    from .stitch import apply_external_iterations

    if args.external_iters is not None:
        if args.external_iters < 1:
            raise ConfigError("--external-iters must be >= 1")
        cfg.external_iters = args.external_iters
    model, _ = checkpoint.load(_resolve(base, cfg.checkpoint))
    cloud = read_xyz(_resolve(base, cfg.input))
    out = apply_external_iterations(cloud, model, cfg.external_iters, cfg.patch_size, cfg.seed,
                                    cfg.selection, threads=args.threads)
    run_dir = _run_dir(base, cfg)
    _snapshot(run_dir, "filter", cfg)
    write_xyz(run_dir / cfg.output, out)
    print(f"filtered {len(out)} points -> {run_dir / cfg.output}")
    return EXIT_OK


# eval

def _check_manifest(manifest: Path, clean: Path, mesh: Path):
    doc = _read_manifest(manifest)
    root = manifest.parent.resolve()
    for e in doc["entries"]:
        if (root / e["cloud"]).resolve() == clean.resolve():
            if (root / e["mesh"]).resolve() != mesh.resolve():
                raise InvalidInput(f"mesh {mesh} does not belong to clean cloud {clean} in {manifest}")
            return e
    raise InvalidInput(f"clean cloud {clean} is not listed in {manifest}")


def cmd_eval(cfg: EvalConfig, base: Path, args) -> int:
    clean_p, mesh_p = _resolve(base, cfg.clean), _resolve(base, cfg.mesh)
    meta = dict(cfg.metadata)
    if cfg.manifest is not None:
        entry = _check_manifest(_resolve(base, cfg.manifest), clean_p, mesh_p)
        meta.setdefault("shape", entry["shape"])
        meta.setdefault("resolution", entry["resolution"])
    filtered = read_xyz(_resolve(base, cfg.filtered))
    clean = read_xyz(clean_p)
    mesh = read_off(mesh_p)
    rep = evaluate(filtered, clean, mesh, cfg.bins, meta)
    run_dir = _run_dir(base, cfg)
    _snapshot(run_dir, "eval", cfg)
    (run_dir / cfg.report).write_text(rep.to_json(), encoding="utf-8")
    (run_dir / cfg.histogram_csv).write_text(rep.histogram.to_csv(), encoding="utf-8")
    print(f"CD x1e5 = {rep.cd * 1e5:.4f}  P2M x1e5 = {rep.p2m * 1e5:.4f}")
    return EXIT_OK


# ablate

def cmd_ablate(cfg: AblateConfig, base: Path, args) -> int:
    from .filter.train import train
    from .stitch import apply_external_iterations

    manifest = _resolve(base, cfg.dataset)
    doc, clouds = _load_dataset(manifest)
    meshes = [read_off(manifest.parent / e["mesh"]) for e in doc["entries"]]
    try:
        runs = [(T, loss, cfg.training.build(loss=loss, seed=cfg.seed,
                                             model={**cfg.training.model.model_dump(), "iterations": T}))
                for T in cfg.iterations for loss in cfg.losses]
    except (InvalidInput, ValueError) as e:
        raise ConfigError(str(e)) from None
    run_dir = _run_dir(base, cfg)
    _snapshot(run_dir, "ablate", cfg)
    rows = []
    for T, loss, tcfg in runs:
        log.info("ablation: T=%d loss=%s", T, loss)
        model, _ = train(clouds, tcfg)
        checkpoint.save(run_dir / f"checkpoint_T{T}_{loss}.json", model, {"training": tcfg.to_dict()})
        for n in cfg.test_noise:
            cds, p2ms = [], []
            for ci, (clean, mesh) in enumerate(zip(clouds, meshes)):
                spec = NoiseSpec(n.kind, n.scale, n.seed + ci)
                out = apply_external_iterations(add_noise(clean, spec), model, 1, cfg.patch_size,
                                                cfg.seed, threads=args.threads)
                cds.append(chamfer_distance(out, clean))
                p2ms.append(point_to_mesh(out, mesh))
            rows.append({"T": T, "loss": loss, "noise_kind": spec.kind.value, "noise_scale": n.scale,
                         "cd_x1e5": 1e5 * sum(cds) / len(cds), "p2m_x1e5": 1e5 * sum(p2ms) / len(p2ms)})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["T"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    (run_dir / "ablation.csv").write_text(buf.getvalue(), encoding="utf-8")
    (run_dir / "ablation.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    for r in rows:
        print(f"T={r['T']:<2} loss={r['loss']:<8} noise={r['noise_scale']:<6} "
              f"CD x1e5={r['cd_x1e5']:.3f} P2M x1e5={r['p2m_x1e5']:.3f}")
    return EXIT_OK


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "filter": cmd_filter,
            "eval": cmd_eval, "ablate": cmd_ablate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iterfilter", description="Iterative point cloud filtering.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"prepare": "sample, normalize and corrupt meshes into a dataset",
             "train": "train a model on a prepared dataset",
             "filter": "filter a noisy XYZ cloud with a checkpoint",
             "eval": "compute CD, P2M and a distance histogram",
             "ablate": "train and compare iteration counts and loss kinds"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--threads", type=int, default=1, help="worker threads for patch filtering")
        if name == "train":
            p.add_argument("--resume", action="store_true",
                           help="continue from an existing checkpoint instead of refusing")
        else:
            p.set_defaults(resume=False)
        if name == "filter":
            p.add_argument("--external-iters", type=int, default=None, metavar="E",
                           help="number of full filtering passes (overrides the config)")
        else:
            p.set_defaults(external_iters=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg, base = load_config(args.command, args.config)
        return COMMANDS[args.command](cfg, base, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, InvalidInput, ShapeError, CoverError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
