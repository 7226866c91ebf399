from .reports import (
    render_gates_svg,
    render_shap_svg,
    write_gates_csv,
    write_gates_svg,
    write_shap_csv,
    write_shap_svg,
)
from .shapley import (
    FrozenForward,
    ShapConfig,
    ShapleyReport,
    band_edges_hz,
    band_rows,
    exact_shapley,
    freeze,
    kernel_shap,
    kernel_shap_values,
    make_background,
    mask_bands,
    shapley_kernel,
)

__all__ = [
    "FrozenForward", "ShapConfig", "ShapleyReport", "band_edges_hz",
    "band_rows", "exact_shapley", "freeze", "kernel_shap",
    "kernel_shap_values", "make_background", "mask_bands",
    "render_gates_svg", "render_shap_svg", "shapley_kernel",
    "write_gates_csv", "write_gates_svg", "write_shap_csv", "write_shap_svg",
]
