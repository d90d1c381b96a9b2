//! Parameter and gate counts per stage for the full and reference circuits.

use std::collections::BTreeMap;

use qcnn::architecture::{build, ArchKind, ArchitectureConfig};
use qcnn::circuit::lower;

fn main() -> qcnn::Result<()> {
    for (kind, config) in [
        (ArchKind::Full, ArchitectureConfig::default()),
        (ArchKind::Reference, ArchitectureConfig::reference()),
        (
            ArchKind::Full,
            ArchitectureConfig {
                share_across_sublayers: false,
                ..Default::default()
            },
        ),
    ] {
        let circuit = build(kind, &config)?;
        let mut per_stage: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for op in circuit.ops() {
            let e = per_stage.entry(op.stage.name()).or_default();
            e.0 += 1;
            e.1 += usize::from(op.param.is_some());
        }
        println!(
            "{kind:?} shared={} : {} parameters, {} ops ({} after lowering), digest {}",
            config.share_across_sublayers,
            circuit.parameter_count(),
            circuit.ops().len(),
            lower(&circuit)?.ops().len(),
            &circuit.arch_digest()[..16]
        );
        for (stage, (ops, param_ops)) in per_stage {
            println!("  {stage:<8} {ops:>4} ops  {param_ops:>4} parameterized");
        }
    }
    Ok(())
}
