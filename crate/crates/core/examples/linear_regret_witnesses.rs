//! Populations on which the median and EM never learn who is accurate,
//! with OWA on the same population for contrast.

use aggrsim::analysis::{linear_regret_contrast, linear_regret_witness, seed_list};
use aggrsim::mechanisms::MechanismKind;

fn main() -> aggrsim::error::Result<()> {
    let seeds = seed_list(30);
    for kind in [MechanismKind::Median, MechanismKind::Em] {
        let v = linear_regret_witness(kind, &[500, 1000, 2000], &seeds)?;
        println!("{kind}: worst R(T)/T = {:.4} ({})", v.observed, v.notes);
    }
    let v = linear_regret_contrast(500, &seeds)?;
    println!("owa: R(T)/T = {:.4}", v.observed);
    Ok(())
}
