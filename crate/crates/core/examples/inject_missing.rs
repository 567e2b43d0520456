//! Hides a fixed fraction of entries behind a binary mask.

use neuroenergy::data::{inject_missing, missing_count, synthesize};

fn main() -> neuroenergy::Result<()> {
    let ds = synthesize(800, 23, 3, 3.0, 1)?;
    for rate in [0.0, 0.05, 0.2, 0.4] {
        let masked = inject_missing(&ds, rate, 7)?;
        println!(
            "rate {rate:>4}: {:>4} of {} entries hidden (expected {})",
            masked.missing_entries(),
            ds.n_rows() * ds.n_features(),
            missing_count(rate, ds.n_rows(), ds.n_features()),
        );
    }

    // Concealed cells hold zero; the mask records which ones they are.
    let masked = inject_missing(&ds, 0.2, 7)?;
    println!("first row: {}", masked.x.row(0));
    println!("its mask:  {}", masked.mask.row(0));
    Ok(())
}
