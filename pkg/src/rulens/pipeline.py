"""End-to-end fitting: winsor limits -> tree ensemble -> basis -> lasso path -> model."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .data import Dataset, compute_winsor_limits
from .ensemble import EnsembleConfig, generate_ensemble
from .losses import LossSpec
from .rules import build_basis
from .sparsefit import EnsembleModel, FitConfig, assemble_model, fit_path, select_lambda

BASIS_BOTH = "both"
BASIS_RULES = "rules"
BASIS_LINEAR = "linear"


@dataclass
class PipelineConfig:
    loss: LossSpec = field(default_factory=LossSpec)
    seed: int = 0
    beta: float = 0.025
    basis_kind: str = BASIS_BOTH
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.basis_kind not in (BASIS_BOTH, BASIS_RULES, BASIS_LINEAR):
            raise ValueError(f"unknown basis kind {self.basis_kind!r}")
        # One loss and one seed flow through both stages.
        self.ensemble = replace(self.ensemble, loss=self.loss, seed=self.seed)
        self.fit = replace(self.fit, loss=self.loss, seed=self.seed)

    def with_lbar(self, lbar: float) -> "PipelineConfig":
        return replace(self, ensemble=replace(self.ensemble, lbar=lbar))

    def reseeded(self, seed: int) -> "PipelineConfig":
        return replace(self, seed=seed)


def fit_rule_ensemble(data: Dataset, cfg: PipelineConfig) -> EnsembleModel:
    cfg.loss.validate_task(data.task)
    limits = compute_winsor_limits(data, cfg.beta)
    include_rules = cfg.basis_kind in (BASIS_BOTH, BASIS_RULES)
    include_linear = cfg.basis_kind in (BASIS_BOTH, BASIS_LINEAR)
    ens = generate_ensemble(data, cfg.ensemble) if include_rules else None
    basis = build_basis(ens, data, limits,
                        include_rules=include_rules, include_linear=include_linear)
    path = fit_path(basis, data, cfg.fit)
    lam = select_lambda(path, basis, data, cfg.fit)
    point = next(p for p in path if p.lam == lam)
    diagnostics = {
        "path": [{"lambda": p.lam, "n_nonzero": p.n_nonzero, "risk": p.risk,
                  "converged": p.converged} for p in path],
        "n_rules_retained": len(basis.rules),
        "n_linear_terms": len(basis.linear_terms),
        "tree_sizes": list(ens.sizes) if ens is not None else [],
        "basis_kind": cfg.basis_kind,
    }
    return assemble_model(basis, data, point, seed=cfg.seed, diagnostics=diagnostics)
