//! Builds the output-cascade Toffoli from the Gray-code uniformly controlled
//! rotation and checks it against the native doubly controlled RY(π).

use qcnn::decompose::{ancilla_flip_native, ancilla_flip_toffoli, angle_transform, PatternAngles};
use qcnn::statevector::unitary_of;

fn main() -> qcnn::Result<()> {
    let plan = angle_transform(&PatternAngles::new(vec![0.0, 0.0, 0.0, std::f64::consts::PI])?)?;
    println!("cascade angles {:?}", plan.alphas);
    println!("cnot controls  {:?}", plan.cnot_controls);

    for (p1, p2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let ops = ancilla_flip_toffoli(0, 1, 2, p1, p2)?;
        let names: Vec<String> = ops
            .iter()
            .map(|g| match g.angle {
                Some(a) => format!("{}({a:+.4})", g.kind.name()),
                None => g.kind.name().to_string(),
            })
            .collect();
        let a = unitary_of(&ops, 3)?;
        let b = unitary_of(&[ancilla_flip_native(0, 1, 2, p1, p2)], 3)?;
        let dev = (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        println!("pattern {p1}{p2}: {} | max |ΔU| = {dev:.1e}", names.join(" "));
    }
    Ok(())
}
