//! Risk of minimax and balanced designs under the parametric outcome models.

use tminimax::simulate::{expected_risk_comparison, ExpectedRiskConfig, ModelKind};

fn main() -> tminimax::Result<()> {
    let config = ExpectedRiskConfig {
        n_list: vec![500],
        t_list: vec![10, 20, 30],
        model: ModelKind::Habituation,
        reps: 100,
        seed: 2024,
        ..ExpectedRiskConfig::default()
    };
    for row in expected_risk_comparison(&config)? {
        println!(
            "T={:>2} {:>8}: mean {:.3}, median {:.3}, 90% range [{:.3}, {:.3}]",
            row.horizon, row.design, row.mean, row.median, row.q05, row.q95
        );
    }
    Ok(())
}
