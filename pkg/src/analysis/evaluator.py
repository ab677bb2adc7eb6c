"""
Módulo para ejecutar los protocolos de evaluación y escribir el informe
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import torch
from omegaconf import OmegaConf

from ..data.data_processor import ImageProcessor
from ..data.dataset_index import DatasetIndex, ImageRecord, sample_pair_records
from ..inference.grid import read_manifest
from ..inference.modes import PosedImage, part_sample, pose_transfer, sample_appearance
from ..models.checkpoint import ModelBundle
from ..models.losses import FeatureExtractor
from ..utils.config import EVAL_DEFAULTS, resolve_part_group
from ..utils.errors import DatasetError, InsufficientSamplesError
from ..visualization.charts import ChartBuilder
from .metrics import fid, per_pose_diversity, perceptual_distance, ssim, variation_part, variation_rest

logger = logging.getLogger(__name__)


@dataclass
class EvalSettings:
    """Tamaños de los protocolos de evaluación"""

    split: str = "test"
    num_poses: int = 5
    samples_per_pose: int = 16
    fid_reference: int = 64
    transfer_pairs: int = 8
    locality_poses: int = 5
    locality_samples: int = 16
    groups: Sequence[str] = tuple(EVAL_DEFAULTS["groups"])

    @classmethod
    def from_dict(cls, values: Dict) -> "EvalSettings":
        merged = {**EVAL_DEFAULTS, **dict(values)}
        return cls(
            split=str(merged["split"]),
            num_poses=int(merged["num_poses"]),
            samples_per_pose=int(merged["samples_per_pose"]),
            fid_reference=int(merged["fid_reference"]),
            transfer_pairs=int(merged["transfer_pairs"]),
            locality_poses=int(merged["locality_poses"]),
            locality_samples=int(merged["locality_samples"]),
            groups=tuple(merged["groups"]),
        )


def _pose_label(record: ImageRecord) -> str:
    return f"{record.identity}/{record.frame}"


class ModelEvaluator:
    """
    Clase para evaluar un modelo entrenado

    Cada ``add_*`` ejecuta un protocolo y añade sus resultados al informe.
    """

    def __init__(
        self,
        bundle: ModelBundle,
        dataset: DatasetIndex,
        fx: FeatureExtractor,
        settings: Optional[EvalSettings] = None,
        seed: int = 0,
    ):
        """
        Args:
            bundle: Modelo a evaluar
            dataset: Índice con las poses de condición y las imágenes de referencia
            fx: Extractor de la distancia perceptual y de FID
            settings: Tamaños de los protocolos
            seed: Semilla de todo el muestreo de la evaluación
        """
        self.bundle = bundle.eval()
        self.dataset = dataset
        self.fx = fx
        self.settings = settings or EvalSettings()
        self.seed = seed
        self.report: Dict = {
            "seed": seed,
            "step": bundle.step,
            "mode": bundle.config.mode,
            "num_parts": bundle.config.num_parts,
            "split": self.settings.split,
            "metrics": {},
            "sizes": {},
        }
        self.diversity_table = pd.DataFrame(columns=["pose", "diversity"])
        self.locality_table = pd.DataFrame(columns=["group", "parts", "variation_part", "variation_rest", "ratio"])
        self._samples: List[List[np.ndarray]] = []

    def _generator(self, offset: int) -> torch.Generator:
        return torch.Generator().manual_seed(self.seed * 1000 + offset)

    def select_poses(self, count: int, offset: int = 0) -> List[ImageRecord]:
        """Registros del split elegidos sin reemplazo con la semilla de la evaluación"""
        records = self.dataset.records_in(self.settings.split)
        if not records:
            records = list(self.dataset.records)
        rng = np.random.default_rng(self.seed + offset)
        chosen = rng.choice(len(records), size=min(count, len(records)), replace=False)
        return [records[int(i)] for i in sorted(chosen)]

    def add_diversity(self) -> Dict:
        """
        Diversidad perceptual: muestras aleatorias sobre poses fijas

        Returns:
            Informe actualizado
        """
        settings = self.settings
        poses = self.select_poses(settings.num_poses)
        self._samples = []
        for i, record in enumerate(poses):
            generated = sample_appearance(
                self.dataset.load_map(record), self.bundle, settings.samples_per_pose, self._generator(i)
            )
            self._samples.append(generated.images)
        values = per_pose_diversity(self._samples, self.fx)
        self.diversity_table = pd.DataFrame({"pose": [_pose_label(r) for r in poses], "diversity": values})
        self.report["metrics"]["diversity"] = float(np.mean(values))
        self.report["sizes"].update({"diversity_poses": len(poses), "samples_per_pose": settings.samples_per_pose})
        return self.report

    def add_fid(self) -> Dict:
        """
        FID entre las muestras de diversidad y imágenes reales del split de entrenamiento
        """
        if not self._samples:
            self.add_diversity()
        generated = [image for samples in self._samples for image in samples]
        records = self.dataset.records_in("train") or list(self.dataset.records)
        rng = np.random.default_rng(self.seed + 7)
        chosen = rng.choice(len(records), size=min(self.settings.fid_reference, len(records)), replace=False)
        reference = [self.dataset.load_image(records[int(i)]) for i in sorted(chosen)]
        try:
            self.report["metrics"]["fid"] = fid(generated, reference, self.fx)
        except InsufficientSamplesError as exc:
            logger.warning("⚠️ FID omitido: %s", exc)
        self.report["sizes"].update({"fid_generated": len(generated), "fid_reference": len(reference)})
        return self.report

    def add_transfer_fidelity(self) -> Dict:
        """
        Transferencia de pose sobre pares de la misma identidad: SSIM y distancia perceptual
        """
        split = self.settings.split
        if not self.dataset.pairable_identities(split):
            logger.warning("⚠️ el split '%s' no tiene pares; se omite la transferencia", split)
            return self.report
        rng = np.random.default_rng(self.seed + 13)
        ssims, distances = [], []
        for _ in range(self.settings.transfer_pairs):
            source, target = sample_pair_records(self.dataset, rng, split)
            posed = PosedImage(self.dataset.load_image(source), self.dataset.load_map(source))
            generated = pose_transfer(posed, [self.dataset.load_map(target)], self.bundle).images[0]
            truth = self.dataset.load_image(target)
            ssims.append(ssim(generated, truth))
            distances.append(perceptual_distance(generated, truth, self.fx))
        self.report["metrics"]["transfer_ssim"] = float(np.mean(ssims))
        self.report["metrics"]["transfer_perceptual"] = float(np.mean(distances))
        self.report["sizes"]["transfer_pairs"] = len(ssims)
        return self.report

    def add_part_locality(self, groups: Optional[Sequence[str]] = None) -> Dict:
        """
        Variation-Part / Variation-Rest por grupo lógico de partes

        Args:
            groups: Nombres de grupo (por defecto, los de la configuración)
        """
        settings = self.settings
        groups = list(groups or settings.groups)
        num_parts = self.bundle.config.num_parts
        shape = (num_parts, self.bundle.config.latent_dim)
        poses = self.select_poses(settings.locality_poses, offset=101)
        rows = []
        for g, name in enumerate(groups):
            parts = resolve_part_group(name, num_parts)
            part_values, rest_values = [], []
            for i, record in enumerate(poses):
                generator = self._generator(10_000 + 100 * g + i)
                body_map = self.dataset.load_map(record)
                z = torch.randn(shape, generator=generator)
                samples = part_sample(body_map, z, parts, self.bundle, settings.locality_samples, generator).images
                part_values.append(variation_part(samples, body_map, parts))
                rest_values.append(variation_rest(samples, body_map, parts))
            var_part, var_rest = float(np.mean(part_values)), float(np.mean(rest_values))
            rows.append({
                "group": name,
                "parts": ",".join(str(k) for k in parts),
                "variation_part": var_part,
                "variation_rest": var_rest,
                "ratio": var_rest / var_part if var_part > 0 else float("nan"),
            })
        self.locality_table = pd.DataFrame(rows, columns=self.locality_table.columns)
        self.report["locality"] = {
            row["group"]: {"variation_part": row["variation_part"], "variation_rest": row["variation_rest"]}
            for row in rows
        }
        self.report["sizes"].update({"locality_poses": len(poses), "locality_samples": settings.locality_samples})
        return self.report

    def add_all(self) -> Dict:
        """
        Ejecuta todos los protocolos

        Returns:
            Informe completo
        """
        self.add_diversity()
        self.add_fid()
        self.add_transfer_fidelity()
        self.add_part_locality()
        return self.report

    def save(self, out_dir: Path) -> Path:
        """
        Escribe report.yaml, diversity_per_pose.csv, locality.csv y evaluation.html

        Returns:
            Ruta del informe YAML
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "report.yaml"
        OmegaConf.save(OmegaConf.create(self.report), path)
        self.diversity_table.to_csv(out_dir / "diversity_per_pose.csv", index=False)
        self.locality_table.to_csv(out_dir / "locality.csv", index=False)
        write_evaluation_html(self.diversity_table, self.locality_table, out_dir / "evaluation.html")
        logger.info("📊 Informe de evaluación en %s", path)
        return path


def write_evaluation_html(diversity: pd.DataFrame, locality: pd.DataFrame, path: Path) -> Optional[Path]:
    """Une los gráficos de diversidad y localidad en un único HTML"""
    figures = []
    if not diversity.empty:
        figures.append(ChartBuilder(diversity, title="Evaluación").create_diversity_chart(
            reference=float(diversity["diversity"].mean())
        ))
    if not locality.empty:
        figures.append(ChartBuilder(locality, title="Evaluación").create_locality_chart())
    if not figures:
        return None
    parts = [fig.to_html(full_html=False, include_plotlyjs=(i == 0)) for i, fig in enumerate(figures)]
    Path(path).write_text("<html><body>\n" + "\n".join(parts) + "\n</body></html>\n", encoding="utf-8")
    return Path(path)


def eval_report(
    bundle: ModelBundle,
    dataset: DatasetIndex,
    fx: FeatureExtractor,
    settings: Optional[EvalSettings] = None,
    seed: int = 0,
    out_dir: Optional[Path] = None,
) -> Dict:
    """
    Ejecuta todos los protocolos y (opcionalmente) escribe el informe

    Returns:
        Diccionario con métricas, tamaños de conjuntos y semillas
    """
    evaluator = ModelEvaluator(bundle, dataset, fx, settings, seed)
    report = evaluator.add_all()
    if out_dir is not None:
        evaluator.save(out_dir)
    return report


def diversity_from_outputs(sample_dirs: Sequence[Path], fx: FeatureExtractor) -> pd.DataFrame:
    """
    Diversidad de teselas ya emitidas por ``sample``, agrupadas por pose

    Las teselas de varios directorios (p. ej. dos semillas) se juntan por pose.

    Returns:
        DataFrame con columnas pose, samples, diversity
    """
    frames = []
    for directory in sample_dirs:
        manifest = read_manifest(directory)
        manifest["path"] = [Path(directory) / file for file in manifest["file"]]
        frames.append(manifest)
    tiles = pd.concat(frames, ignore_index=True)
    tiles["pose"] = tiles["pose"].fillna("pose")

    poses, sets = [], []
    for pose, group in tiles.groupby("pose", sort=True):
        if len(group) < 2:
            logger.warning("⚠️ pose %s con una sola tesela; se ignora", pose)
            continue
        poses.append(pose)
        sets.append([ImageProcessor.load_image(p) for p in group["path"]])
    if not sets:
        raise InsufficientSamplesError("ninguna pose tiene al menos 2 teselas")
    values = per_pose_diversity(sets, fx)
    return pd.DataFrame({"pose": poses, "samples": [len(s) for s in sets], "diversity": values})


def compare_runs(run_dirs: Sequence[Path], path: Path, columns: Sequence[str] = ("loss_vgg", "loss_kl")) -> pd.DataFrame:
    """
    Compara el metrics.csv de varias ejecuciones (p. ej. partes frente a NoParts)

    Args:
        run_dirs: Directorios de salida de ``train``
        path: HTML de destino con un gráfico por columna
        columns: Columnas del log a comparar

    Returns:
        DataFrame con una fila por ejecución: run, steps y el último valor de cada columna
    """
    runs: Dict[str, pd.DataFrame] = {}
    for directory in run_dirs:
        metrics_path = Path(directory) / "metrics.csv"
        if not metrics_path.is_file():
            raise DatasetError(f"no existe {metrics_path}")
        log = pd.read_csv(metrics_path)
        if log.empty:
            raise DatasetError(f"{metrics_path} no tiene filas")
        name = Path(directory).name
        runs[name if name not in runs else str(directory)] = log

    for column in columns:
        for name, log in runs.items():
            if column not in log.columns:
                raise DatasetError(f"la ejecución {name} no tiene la columna '{column}'")

    charts = ChartBuilder(pd.DataFrame(), title="Comparación")
    figures = [charts.create_comparison_chart(runs, column=column) for column in columns]
    parts = [fig.to_html(full_html=False, include_plotlyjs=(i == 0)) for i, fig in enumerate(figures)]
    Path(path).write_text("<html><body>\n" + "\n".join(parts) + "\n</body></html>\n", encoding="utf-8")
    logger.info("📈 Comparación de %d ejecuciones en %s", len(runs), path)

    return pd.DataFrame([
        {"run": name, "steps": len(log), **{column: float(log[column].iloc[-1]) for column in columns}}
        for name, log in runs.items()
    ])
