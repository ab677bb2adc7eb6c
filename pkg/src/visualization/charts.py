"""
Módulo para crear gráficos interactivos con Plotly
"""

from typing import Dict, List, Optional

import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from ..utils.config import CHART_COLORS

LOSS_TRACES = {
    "loss_vgg": "Perceptual",
    "loss_face": "Identidad facial",
    "loss_g_adv": "G adversaria",
    "loss_fm": "Feature matching",
    "loss_kl": "KL",
    "loss_d": "D",
}


class ChartBuilder:
    """
    Clase para construir gráficos interactivos
    """

    def __init__(self, df: pd.DataFrame, title: str = "Modelo"):
        """
        Args:
            df: DataFrame con métricas (log de entrenamiento o tabla de evaluación)
            title: Nombre de la ejecución para los títulos
        """
        self.df = df
        self.title = title
        self.colors = CHART_COLORS

    def _palette(self) -> List[str]:
        return [
            self.colors["primary"], self.colors["secondary"], self.colors["success"],
            self.colors["danger"], self.colors["warning"], self.colors["info"],
        ]

    def create_loss_curves(self, smoothing: int = 1) -> go.Figure:
        """
        Curvas de cada término de pérdida y de las normas de gradiente

        Args:
            smoothing: Ventana de media móvil (1 = sin suavizar)

        Returns:
            Figura de Plotly
        """
        fig = make_subplots(
            rows=2, cols=1,
            shared_xaxes=True,
            vertical_spacing=0.06,
            row_heights=[0.65, 0.35],
            subplot_titles=("Pérdidas", "Normas de gradiente"),
        )
        palette = self._palette()
        window = max(1, int(smoothing))

        for i, (column, label) in enumerate(LOSS_TRACES.items()):
            if column not in self.df.columns:
                continue
            fig.add_trace(go.Scatter(
                x=self.df["step"],
                y=self.df[column].rolling(window=window, min_periods=1).mean(),
                name=label,
                line=dict(color=palette[i % len(palette)], width=2),
            ), row=1, col=1)

        for name, color in (("encoder", "part"), ("generator", "primary"), ("discriminator", "disc")):
            column = f"grad_norm_{name}"
            if column in self.df.columns:
                fig.add_trace(go.Scatter(
                    x=self.df["step"],
                    y=self.df[column],
                    name=f"‖∇{name[0].upper()}‖",
                    line=dict(color=self.colors[color], width=1),
                ), row=2, col=1)

        fig.update_layout(
            title=f"{self.title} - Curvas de entrenamiento",
            xaxis2_title="Paso",
            template="plotly_white",
            hovermode="x unified",
            height=650,
            showlegend=True,
        )
        fig.update_yaxes(type="log", row=1, col=1)
        return fig

    def create_locality_chart(self) -> go.Figure:
        """
        Barras Variation-Part / Variation-Rest por grupo de partes

        Espera columnas ``group``, ``variation_part`` y ``variation_rest``.

        Returns:
            Figura de Plotly
        """
        fig = go.Figure()
        fig.add_trace(go.Bar(
            x=self.df["group"],
            y=self.df["variation_part"],
            name="Variation-Part",
            marker_color=self.colors["part"],
        ))
        fig.add_trace(go.Bar(
            x=self.df["group"],
            y=self.df["variation_rest"],
            name="Variation-Rest",
            marker_color=self.colors["rest"],
        ))
        fig.update_layout(
            title=f"{self.title} - Localidad del muestreo por partes",
            xaxis_title="Grupo",
            yaxis_title="L1 medio por píxel",
            barmode="group",
            template="plotly_white",
            height=400,
        )
        return fig

    def create_diversity_chart(self, reference: Optional[float] = None) -> go.Figure:
        """
        Diversidad perceptual por pose

        Args:
            reference: Valor medio a marcar con una línea horizontal

        Returns:
            Figura de Plotly
        """
        fig = go.Figure()
        fig.add_trace(go.Bar(
            x=self.df["pose"].astype(str),
            y=self.df["diversity"],
            name="Diversidad",
            marker_color=self.colors["primary"],
        ))
        if reference is not None:
            fig.add_hline(y=reference, line_dash="dash", line_color=self.colors["secondary"],
                          annotation_text=f"media {reference:.4f}")
        fig.update_layout(
            title=f"{self.title} - Diversidad por pose",
            xaxis_title="Pose",
            yaxis_title="Distancia perceptual media",
            template="plotly_white",
            height=350,
        )
        return fig

    def create_comparison_chart(self, runs: Dict[str, pd.DataFrame], column: str = "loss_vgg") -> go.Figure:
        """
        Compara una métrica entre varias ejecuciones (p. ej. partes frente a NoParts)

        Args:
            runs: Diccionario {nombre: log de métricas}
            column: Columna a comparar

        Returns:
            Figura de Plotly
        """
        fig = go.Figure()
        palette = self._palette()
        for i, (name, log) in enumerate(runs.items()):
            fig.add_trace(go.Scatter(
                x=log["step"],
                y=log[column],
                name=name,
                line=dict(color=palette[i % len(palette)], width=2),
            ))
        fig.update_layout(
            title=f"Comparación - {LOSS_TRACES.get(column, column)}",
            xaxis_title="Paso",
            yaxis_title=column,
            template="plotly_white",
            hovermode="x unified",
            height=450,
            showlegend=True,
        )
        return fig
