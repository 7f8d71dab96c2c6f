//! Allocation and max-risk ratio tables across horizons at N = 1000.

use tminimax::simulate::{allocation_table, maxrisk_table};

fn main() -> tminimax::Result<()> {
    let horizons = [10, 20, 30, 40, 50];
    for row in allocation_table(1000, &horizons)?.iter().filter(|r| r.arm.index() <= 2) {
        println!("{:>9} T={:>2} {:>10} {:>8.2}", row.design, row.horizon, row.arm.to_string(), row.count);
    }
    println!();
    for row in maxrisk_table(1000, &horizons)? {
        println!(
            "baseline {:>9} T={:>2}: minimax {:.3}, augmented {:.3}",
            row.baseline, row.horizon, row.minimax_ratio, row.augmented_ratio
        );
    }
    Ok(())
}
