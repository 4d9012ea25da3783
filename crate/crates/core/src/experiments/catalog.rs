//! Configs shipped with the crate, one per multiplicity mechanism.

use super::ExperimentConfig;
use crate::error::{LabError, Result};

/// `(name, json)` for every bundled config, sorted by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("budget_condition", include_str!("../../configs/budget_condition.json")),
    ("chebyshev_arc", include_str!("../../configs/chebyshev_arc.json")),
    ("chebyshev_circle", include_str!("../../configs/chebyshev_circle.json")),
    ("chebyshev_two_point", include_str!("../../configs/chebyshev_two_point.json")),
    ("convex_bound_random", include_str!("../../configs/convex_bound_random.json")),
    ("eta_witness", include_str!("../../configs/eta_witness.json")),
    ("kirchhoff_eigen", include_str!("../../configs/kirchhoff_eigen.json")),
    ("kirchhoff_search", include_str!("../../configs/kirchhoff_search.json")),
    ("kirchhoff_uniqueness", include_str!("../../configs/kirchhoff_uniqueness.json")),
    ("kirchhoff_validate", include_str!("../../configs/kirchhoff_validate.json")),
    ("minimax_gap", include_str!("../../configs/minimax_gap.json")),
    ("minimax_gap_bilinear", include_str!("../../configs/minimax_gap_bilinear.json")),
    ("scalar_roots", include_str!("../../configs/scalar_roots.json")),
    ("three_solutions_cos", include_str!("../../configs/three_solutions_cos.json")),
];

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| LabError::Config(format!("no bundled config named `{name}`")))?;
    ExperimentConfig::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_config_parses_under_its_own_name() {
        for (name, _) in BUNDLED {
            assert_eq!(bundled(name).unwrap().name, *name);
        }
        assert!(bundled("missing").is_err());
    }

    #[test]
    fn empty_config_is_a_schema_error() {
        assert!(matches!(ExperimentConfig::from_json("{}"), Err(LabError::Config(_))));
    }
}
