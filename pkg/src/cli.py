"""
Punto de entrada de línea de comandos

Uso: ``python -m src <comando> [--config FICHERO] [--seed N] [--out DIR] [--set clave=valor ...]``

Los errores se imprimen en una sola línea ``error=<Clase> message=<texto>``
por stderr; el código de salida es 2 para errores del dominio y 1 para
cualquier otro fallo.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
import torch
from omegaconf import DictConfig, OmegaConf

from .analysis.evaluator import (
    EvalSettings,
    ModelEvaluator,
    compare_runs,
    diversity_from_outputs,
    write_evaluation_html,
)
from .data.data_processor import ImageProcessor
from .data.dataset_index import load_index
from .data.densepose_atlas import DenseBodyMap, extract_texture, save_atlas
from .data.synthetic import SyntheticSpec, make_synthetic_dataset
from .inference.grid import GridTile, emit_grid, tiles_from
from .inference.modes import (
    PosedImage,
    encode_appearance,
    garment_transfer,
    interpolate_images,
    part_sample,
    pose_transfer,
    sample_appearance,
)
from .models.checkpoint import ModelBundle, load_checkpoint
from .models.latent_core import load_latent, save_latent
from .models.losses import build_feature_extractor
from .models.networks import NetConfig
from .training.trainer import LossContext, TrainConfig, fit
from .utils.config import APP_SETTINGS, load_config, resolve_part_group, save_config
from .utils.errors import CheckpointError, ConfigError, PartGenError
from .utils.logger import setup_logging

logger = logging.getLogger(__name__)

EXIT_DOMAIN_ERROR = 2
EXIT_UNEXPECTED = 1


def _add_common(parser: argparse.ArgumentParser, checkpoint: bool = False) -> None:
    parser.add_argument("--config", help="Fichero YAML de configuración")
    parser.add_argument("--seed", type=int, help="Semilla (sobreescribe la configuración)")
    parser.add_argument("--out", help="Directorio de salida")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="CLAVE=VALOR",
                        help="Sobreescribe una clave de la configuración (repetible)")
    parser.add_argument("--log-level", default=APP_SETTINGS["log_level"])
    if checkpoint:
        parser.add_argument("--checkpoint", required=True, help="Checkpoint .pt del modelo")


def build_parser() -> argparse.ArgumentParser:
    """Parser con un subcomando por etapa del pipeline"""
    parser = argparse.ArgumentParser(prog="partgen", description=APP_SETTINGS["project_name"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="Genera el dataset sintético de maniquíes")
    _add_common(p)

    p = sub.add_parser("extract-texture", help="Extrae el atlas UV de una imagen")
    _add_common(p)
    p.add_argument("--image", required=True)
    p.add_argument("--iuv", required=True)
    p.add_argument("--checkpoint", help="Si se indica, guarda también el código de apariencia")

    p = sub.add_parser("train", help="Entrena E, G y D")
    _add_common(p)
    p.add_argument("--data", help="Raíz del dataset (por defecto data.root)")
    p.add_argument("--resume", help="Checkpoint desde el que continuar")

    p = sub.add_parser("sample", help="Apariencias aleatorias sobre poses fijas")
    _add_common(p, checkpoint=True)
    p.add_argument("--pose", nargs="+", required=True, help="Uno o más rasters IUV")
    p.add_argument("--n", type=int, default=8)

    p = sub.add_parser("transfer", help="Transferencia de pose (o de secuencia)")
    _add_common(p, checkpoint=True)
    p.add_argument("--image", required=True)
    p.add_argument("--iuv", required=True)
    p.add_argument("--targets", nargs="+", required=True, help="Rasters IUV destino o un directorio con ellos")
    p.add_argument("--sampled", action="store_true", help="Usa z ~ N(mu, sigma) en lugar de la media")

    p = sub.add_parser("parts", help="Muestreo de un grupo de partes")
    _add_common(p, checkpoint=True)
    p.add_argument("--pose", required=True)
    p.add_argument("--group", required=True)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--latent", help="Código base .latent (por defecto, z ~ N(0, I))")
    p.add_argument("--image", help="Imagen cuya apariencia se usa como código base")
    p.add_argument("--iuv", help="Mapa IUV de --image")

    p = sub.add_parser("garment", help="Transferencia de prendas")
    _add_common(p, checkpoint=True)
    p.add_argument("--body-image", required=True)
    p.add_argument("--body-iuv", required=True)
    p.add_argument("--garment-image", required=True)
    p.add_argument("--garment-iuv", required=True)
    p.add_argument("--group", required=True, help="Partes tomadas de la prenda")
    p.add_argument("--target", help="Pose destino (por defecto, la del cuerpo)")

    p = sub.add_parser("interp", help="Interpolación de apariencia")
    _add_common(p, checkpoint=True)
    p.add_argument("--image1", required=True)
    p.add_argument("--iuv1", required=True)
    p.add_argument("--image2", required=True)
    p.add_argument("--iuv2", required=True)
    p.add_argument("--display", help="Pose de visualización (por defecto --iuv1)")
    p.add_argument("--steps", type=int, default=5)

    p = sub.add_parser("eval", help="Informe de métricas")
    _add_common(p)
    p.add_argument("--checkpoint", help="Modelo a evaluar")
    p.add_argument("--data", help="Raíz del dataset (por defecto data.root)")
    p.add_argument("--samples", nargs="+", help="Directorios de salida de 'sample' a comparar")
    p.add_argument("--runs", nargs="+", help="Directorios de salida de 'train' cuyas curvas se comparan")
    p.add_argument("--columns", nargs="+", default=["loss_vgg", "loss_kl"], help="Columnas de metrics.csv para --runs")
    return parser


def _config(args: argparse.Namespace) -> DictConfig:
    return load_config(args.config, args.overrides, seed=args.seed)


def _out_dir(args: argparse.Namespace, cfg: DictConfig, default: str) -> Path:
    out = Path(args.out or Path("outputs") / default)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out)
    return out


def _net_is_explicit(args: argparse.Namespace) -> bool:
    return args.config is not None or any(o.startswith("net.") for o in args.overrides)


def _load_bundle(args: argparse.Namespace, cfg: DictConfig) -> ModelBundle:
    """Carga el checkpoint; si la configuración fija la red, debe coincidir"""
    if not args.checkpoint:
        raise CheckpointError("se necesita --checkpoint")
    expected = None
    if _net_is_explicit(args):
        expected = NetConfig.from_dict(OmegaConf.to_container(cfg.net, resolve=True))
    return load_checkpoint(Path(args.checkpoint), expected=expected, device=cfg.device).eval()


def _posed(image: str, iuv: str, num_parts: int) -> PosedImage:
    return PosedImage(ImageProcessor.load_image(Path(image)), ImageProcessor.load_iuv(Path(iuv), num_parts))


def _target_paths(targets: Sequence[str]) -> List[Path]:
    """Expande directorios a sus rasters IUV en orden alfabético"""
    paths: List[Path] = []
    for target in targets:
        path = Path(target)
        if path.is_dir():
            paths += sorted(path.glob("*.iuv.png")) or sorted(path.glob("*.png"))
        else:
            paths.append(path)
    if not paths:
        raise ConfigError("no hay mapas destino")
    return paths


def _pose_name(path: Path) -> str:
    return path.name.replace(".iuv.png", "").replace(".png", "")


def _generator(seed: int) -> torch.Generator:
    return torch.Generator().manual_seed(int(seed))


def _write_artifacts(out: Path, rows: List[Dict]) -> Path:
    path = out / "manifest.csv"
    pd.DataFrame(rows).to_csv(path, index=False)
    return path


def cmd_synth_data(args: argparse.Namespace, cfg: DictConfig) -> None:
    spec = SyntheticSpec.from_dict(OmegaConf.to_container(cfg.synth, resolve=True))
    root = Path(args.out or cfg.data.root)
    index = make_synthetic_dataset(root, spec, int(cfg.seed))
    save_config(cfg, root)
    _write_artifacts(root, [
        {"file": f"{r.identity}/{r.image_path.name}", "identity": r.identity, "frame": r.frame, "seed": int(cfg.seed)}
        for r in index.records
    ])
    print(f"✅ {len(index)} imágenes en {root}")


def cmd_extract_texture(args: argparse.Namespace, cfg: DictConfig) -> None:
    out = _out_dir(args, cfg, "texture")
    bundle = _load_bundle(args, cfg) if args.checkpoint else None
    num_parts = bundle.config.num_parts if bundle else int(cfg.net.num_parts)
    atlas_size = bundle.config.atlas_size if bundle else int(cfg.net.atlas_size)
    posed = _posed(args.image, args.iuv, num_parts)
    atlas = extract_texture(posed.image, posed.body_map, atlas_size)
    atlas_path, mask_path = save_atlas(atlas, out / "atlas.png")
    rows = [
        {"file": atlas_path.name, "kind": "atlas", "source": args.image},
        {"file": mask_path.name, "kind": "filled_mask", "source": args.image},
    ]
    if bundle is not None:
        latent_path = save_latent(encode_appearance(posed.image, posed.body_map, bundle), out / "appearance.latent")
        rows.append({"file": latent_path.name, "kind": "latent", "source": args.image})
    _write_artifacts(out, rows)
    print(f"✅ Atlas ({int(atlas.filled.sum())} texeles) en {out}")


def cmd_train(args: argparse.Namespace, cfg: DictConfig) -> None:
    out = _out_dir(args, cfg, "train")
    config = TrainConfig.from_config(cfg)
    dataset = load_index(Path(args.data or cfg.data.root), num_parts=config.net.num_parts)
    losses = LossContext.from_settings(
        OmegaConf.to_container(cfg.loss, resolve=True), config.weights, config.net.num_parts
    )
    result = fit(dataset, config, losses, out_dir=out, resume=args.resume, device=cfg.device)
    rows = [{"file": "metrics.csv", "kind": "metrics", "step": result.bundle.step}]
    rows += [
        {"file": p.relative_to(out).as_posix(), "kind": "checkpoint", "step": result.bundle.step}
        for p in sorted((out / "checkpoints").glob("*.pt"))
    ]
    _write_artifacts(out, rows)
    print(f"✅ Entrenamiento hasta el paso {result.bundle.step}; resultados en {out}")


def cmd_sample(args: argparse.Namespace, cfg: DictConfig) -> None:
    out = _out_dir(args, cfg, "sample")
    bundle = _load_bundle(args, cfg)
    generator = _generator(cfg.seed)
    tiles: List[GridTile] = []
    for pose_path in map(Path, args.pose):
        body_map = ImageProcessor.load_iuv(pose_path, bundle.config.num_parts)
        generated = sample_appearance(body_map, bundle, args.n, generator)
        tiles += tiles_from(generated, "sample", seed=int(cfg.seed), poses=[_pose_name(pose_path)])
    emit_grid(tiles, out, columns=max(1, args.n))
    print(f"✅ {len(tiles)} muestras en {out}")


def cmd_transfer(args: argparse.Namespace, cfg: DictConfig) -> None:
    out = _out_dir(args, cfg, "transfer")
    bundle = _load_bundle(args, cfg)
    num_parts = bundle.config.num_parts
    source = _posed(args.image, args.iuv, num_parts)
    paths = _target_paths(args.targets)
    maps: List[DenseBodyMap] = [ImageProcessor.load_iuv(p, num_parts) for p in paths]
    generated = pose_transfer(source, maps, bundle, use_mean=not args.sampled, generator=_generator(cfg.seed))
    save_latent(generated.latents[0], out / "appearance.latent")
    emit_grid(tiles_from(generated, "transfer", seed=int(cfg.seed), poses=[_pose_name(p) for p in paths]), out)
    print(f"✅ {len(generated)} poses transferidas en {out}")


def cmd_parts(args: argparse.Namespace, cfg: DictConfig) -> None:
    out = _out_dir(args, cfg, "parts")
    bundle = _load_bundle(args, cfg)
    num_parts = bundle.config.num_parts
    parts = resolve_part_group(args.group, num_parts)
    generator = _generator(cfg.seed)
    body_map = ImageProcessor.load_iuv(Path(args.pose), num_parts)
    if args.latent:
        z = load_latent(Path(args.latent)).float()
    elif args.image and args.iuv:
        posed = _posed(args.image, args.iuv, num_parts)
        z = encode_appearance(posed.image, posed.body_map, bundle)
    else:
        z = torch.randn((num_parts, bundle.config.latent_dim), generator=generator)
    generated = part_sample(body_map, z, parts, bundle, args.n, generator)
    emit_grid(tiles_from(generated, "parts", seed=int(cfg.seed), group=args.group,
                         poses=[_pose_name(Path(args.pose))]), out)
    print(f"✅ {len(generated)} muestras del grupo '{args.group}' en {out}")


def cmd_garment(args: argparse.Namespace, cfg: DictConfig) -> None:
    out = _out_dir(args, cfg, "garment")
    bundle = _load_bundle(args, cfg)
    num_parts = bundle.config.num_parts
    body = _posed(args.body_image, args.body_iuv, num_parts)
    garment = _posed(args.garment_image, args.garment_iuv, num_parts)
    target_path = Path(args.target or args.body_iuv)
    target = ImageProcessor.load_iuv(target_path, num_parts)
    parts = resolve_part_group(args.group, num_parts)
    generated = garment_transfer(body, garment, parts, target, bundle)
    emit_grid(tiles_from(generated, "garment", seed=int(cfg.seed), group=args.group,
                         poses=[_pose_name(target_path)]), out)
    print(f"✅ Prenda '{args.group}' transferida en {out}")


def cmd_interp(args: argparse.Namespace, cfg: DictConfig) -> None:
    out = _out_dir(args, cfg, "interp")
    bundle = _load_bundle(args, cfg)
    num_parts = bundle.config.num_parts
    first = _posed(args.image1, args.iuv1, num_parts)
    second = _posed(args.image2, args.iuv2, num_parts)
    display_path = Path(args.display or args.iuv1)
    display = ImageProcessor.load_iuv(display_path, num_parts)
    generated = interpolate_images(first, second, display, args.steps, bundle)
    emit_grid(tiles_from(generated, "interp", seed=int(cfg.seed), poses=[_pose_name(display_path)]),
              out, columns=len(generated))
    print(f"✅ {len(generated)} pasos de interpolación en {out}")


def cmd_eval(args: argparse.Namespace, cfg: DictConfig) -> None:
    out = _out_dir(args, cfg, "eval")
    fx = build_feature_extractor(OmegaConf.to_container(cfg.loss, resolve=True))
    if args.samples:
        table = diversity_from_outputs([Path(d) for d in args.samples], fx)
        report = {
            "seed": int(cfg.seed),
            "sources": list(args.samples),
            "metrics": {"diversity": float(table["diversity"].mean())},
            "sizes": {"poses": len(table), "samples": int(table["samples"].sum())},
        }
        OmegaConf.save(OmegaConf.create(report), out / "report.yaml")
        table.to_csv(out / "diversity_per_pose.csv", index=False)
        write_evaluation_html(table, pd.DataFrame(), out / "evaluation.html")
    else:
        bundle = _load_bundle(args, cfg)
        dataset = load_index(Path(args.data or cfg.data.root), num_parts=bundle.config.num_parts)
        settings = EvalSettings.from_dict(OmegaConf.to_container(cfg.eval, resolve=True))
        evaluator = ModelEvaluator(bundle, dataset, fx, settings, int(cfg.seed))
        evaluator.add_all()
        evaluator.save(out)
        report = evaluator.report
    _write_artifacts(out, [
        {"file": name, "kind": kind, "seed": int(cfg.seed)}
        for name, kind in (("report.yaml", "report"), ("diversity_per_pose.csv", "table"),
                           ("locality.csv", "table"), ("evaluation.html", "chart"))
        if (out / name).is_file()
    ])
    metrics = ", ".join(f"{k}={v:.4f}" for k, v in report["metrics"].items())
    print(f"📊 {metrics}")


COMMANDS = {
    "synth-data": cmd_synth_data,
    "extract-texture": cmd_extract_texture,
    "train": cmd_train,
    "sample": cmd_sample,
    "transfer": cmd_transfer,
    "parts": cmd_parts,
    "garment": cmd_garment,
    "interp": cmd_interp,
    "eval": cmd_eval,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Ejecuta un comando

    Returns:
        Código de salida (0 éxito, 2 error del dominio, 1 error inesperado)
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except PartGenError as exc:
        _report_error(exc)
        return EXIT_DOMAIN_ERROR
    except Exception as exc:
        logger.debug("fallo inesperado", exc_info=True)
        _report_error(exc)
        return EXIT_UNEXPECTED
    return 0


def _report_error(exc: BaseException) -> None:
    message = " ".join(str(exc).split())
    print(f"error={type(exc).__name__} message={message}", file=sys.stderr)
