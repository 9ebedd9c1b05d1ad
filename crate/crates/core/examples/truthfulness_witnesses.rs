//! Best reports on a 0.01 grid for a worker with belief `q`. OWA and OMS
//! keep the report at the belief; Hedge, EM and EXP3 reward shading it.

use aggrsim::analysis::{reference_model, TRUTHFUL_GRID_STEP};
use aggrsim::mechanisms::MechanismKind;
use aggrsim::workers::grid_best_response;

fn main() -> aggrsim::error::Result<()> {
    let kinds = [MechanismKind::Owa, MechanismKind::Oms, MechanismKind::Hedge, MechanismKind::Em, MechanismKind::Exp3];
    for kind in kinds {
        let model = reference_model(kind)?;
        println!("{kind}:");
        for q in [0.2, 0.4, 0.7, 0.9] {
            let br = grid_best_response(&model, q, TRUTHFUL_GRID_STEP)?;
            println!("  q = {q:.2}  best report {:.2}  gain {:.2e}", br.report, br.gain);
        }
    }
    Ok(())
}
