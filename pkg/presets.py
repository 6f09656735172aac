from typing import Dict, List, Tuple

from design import hamming74_design
from models import AnomalyModel, DesignKind, DetectorKind, Gaussian1D, Preset, Schedule, TrialPlan

# Named experiments and worked examples
PRESETS: Dict[str, Preset] = {
    "fig1": Preset(
        name="fig1",
        description="n=100, k=1, anomalous N(0,100) among N(0,1); bipartite d=6 vs separate observation",
        model=AnomalyModel(n=100, k=1, common=Gaussian1D(mean=0.0, variance=1.0), anomalous=Gaussian1D(mean=0.0, variance=100.0)),
        m_values=tuple(range(50, 301, 25)),
        designs=("bipartite", "separate"),
        right_degree=6,
        uneven_left_degree=True,
    ),
    "fig2": Preset(
        name="fig2",
        description="n=102, k=1, anomalous N(0,1) among N(8,1); bipartite d=6 vs separate, fewer measurements than variables",
        model=AnomalyModel(n=102, k=1, common=Gaussian1D(mean=8.0, variance=1.0), anomalous=Gaussian1D(mean=0.0, variance=1.0)),
        m_values=(34, 51, 68, 85, 102, 119, 136),
        designs=("bipartite", "separate"),
        right_degree=6,
    ),
    "example1": Preset(
        name="example1",
        description="n=2, k=1, N(1,1) against N(0,1); the difference measurement (1,-1) doubles the separate exponent",
        model=AnomalyModel(n=2, k=1, common=Gaussian1D(mean=0.0, variance=1.0), anomalous=Gaussian1D(mean=1.0, variance=1.0)),
        m_values=(10, 20, 30, 40, 50),
        designs=("fixed", "separate"),
        vector=(1.0, -1.0),
    ),
    "example4": Preset(
        name="example4",
        description="n=7, k=1, anomalous N(0,1e6) among N(0,1); Hamming(7,4) parity rows vs separate observation",
        model=AnomalyModel(n=7, k=1, common=Gaussian1D(mean=0.0, variance=1.0), anomalous=Gaussian1D(mean=0.0, variance=1e6)),
        m_values=(7, 14, 21, 28),
        designs=("hamming74", "separate"),
    ),
}


def get_preset_names() -> List[str]:
    """Get all available preset names"""
    return list(PRESETS.keys())


def get_preset(name: str) -> Preset:
    """Get a preset by name"""
    if name not in PRESETS:
        raise ValueError(f"Preset '{name}' not found. Available presets: {get_preset_names()}")
    return PRESETS[name]


def preset_rows() -> List[Tuple[str, str]]:
    """(name, description) pairs for listing"""
    return [(preset.name, preset.description) for preset in PRESETS.values()]


def preset_plan(preset: Preset, design: str, trials: int, master_seed: int) -> TrialPlan:
    """Trial plan for one of the preset's designs; fixed rows are cycled to each budget."""
    common = dict(
        model=preset.model,
        m_values=preset.m_values,
        trials=trials,
        detector=DetectorKind.LRT,
        master_seed=master_seed,
        right_degree=preset.right_degree,
        uneven_left_degree=preset.uneven_left_degree,
    )
    if design == "hamming74":
        return TrialPlan(design=DesignKind.FIXED, schedule=hamming74_design(), **common)
    if design == "fixed":
        return TrialPlan(design=DesignKind.FIXED, schedule=Schedule(rows=[list(preset.vector)]), **common)
    return TrialPlan(design=DesignKind(design), **common)


if __name__ == "__main__":
    print("Available presets:")
    for name, description in preset_rows():
        print(f"- {name}: {description}")
