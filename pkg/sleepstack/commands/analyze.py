"""
Subset analysis: SC vs ST feature distributions
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from rich.console import Console

from .base import BaseCommand
from ..core.epochs import Subset
from ..core.errors import UsageError, ZeroSignal
from ..core.features import ANALYSIS_FEATURES, band_analysis_features
from ..core.filters import BAND_ORDER, bands_from_config, design_bank
from ..core.report import plot_kde_svg, write_anova_csv
from ..core.stats import kde, minmax_scale, one_way_anova

console = Console()
logger = logging.getLogger(__name__)

ANOVA_FILE = "anova.csv"


class AnalyzeCommands(BaseCommand):
    """Handles the SC/ST feature analysis"""

    def analyze(self, store: Optional[str], out: str) -> int:
        def body():
            epoch_store = self.open_store(self.store_path(store, out))
            epochs = epoch_store.epochs()
            subsets = {e.subset for e in epochs}
            if subsets != set(Subset):
                present = ", ".join(sorted(s.value for s in subsets)) or "none"
                raise UsageError(f"Analysis needs both SC and ST epochs; store has {present}")

            bank = design_bank(bands_from_config(self.config["bands"], self.config["filter_order"]))
            window = self.config["mmd_window"]
            fraction = self.config["rolloff_fraction"]
            spectral_window = self.config["spectral_window"]

            def features(epoch):
                try:
                    return band_analysis_features(
                        np.asarray(epoch.samples, dtype=np.float64), bank, window, fraction, spectral_window
                    )
                except ZeroSignal as e:
                    logger.warning(f"Skipping {epoch.recording_id} epoch {epoch.position_index}: {e}")
                    return None

            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                computed = list(pool.map(features, epochs))
            kept = [i for i, r in enumerate(computed) if r is not None]
            if len(kept) < len(epochs):
                console.print(f"[yellow]Skipped {len(epochs) - len(kept)} epochs with a silent band[/]")
            epochs = [epochs[i] for i in kept]
            rows = [computed[i] for i in kept]
            is_sc = np.array([e.subset is Subset.SC for e in epochs])
            if is_sc.all() or not is_sc.any():
                raise UsageError("Analysis needs both SC and ST epochs with signal in every band")

            level = self.config["significance_level"]
            results = []
            table_rows = []
            for feature in ANALYSIS_FEATURES:
                for band in BAND_ORDER:
                    values = np.array([r[f"{feature}:{band}"] for r in rows])
                    result = one_way_anova([values[is_sc], values[~is_sc]])
                    results.append((feature, band, result))
                    table_rows.append(
                        [feature, band, result.f_stat, result.p_text(), "yes" if result.p_value < level else "no"]
                    )

            self.prepare_output_dir(out)
            write_anova_csv(os.path.join(out, ANOVA_FILE), results)
            self.display_table(
                "SC vs ST one-way ANOVA", ["Feature", "Band", "F", "p", f"p < {level:g}"], table_rows
            )

            for key in self.config["kde_features"]:
                if key not in rows[0]:
                    raise UsageError(f"Unknown density feature '{key}', expected feature:band")
                values = np.array([r[key] for r in rows])
                scaled = minmax_scale(values) if self.config["feature_scaling"] == "minmax" else values
                points = self.config["kde_points"]
                curves = {
                    "SC": kde(scaled[is_sc], points=points),
                    "ST": kde(scaled[~is_sc], points=points),
                }
                name = key.replace(":", "_")
                plot_kde_svg(os.path.join(out, f"kde_{name}.svg"), curves, title=key)
            console.print(f"[green]Wrote {ANOVA_FILE} and density plots to {out}[/]")

        return self.run(body)
