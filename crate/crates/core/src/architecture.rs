//! Builders for the full QCNN and the CNOT-entangled reference circuit.
//!
//! Register layout (13 wires): data qubits 0–7 (qubit 0 = most significant
//! bit of the pixel index), readout ancillas 8–11, and a virtual wire 12 that
//! starts in `|0⟩` and only appears in the 3-qubit filter layer.
//!
//! Stage templates:
//!
//! | stage    | gates per placement                                           | params |
//! |----------|---------------------------------------------------------------|--------|
//! | f4       | `RY` on 4 qubits, then a `CRY` ring `a→b→c→d→a`                | 8      |
//! | f3       | `RY` on 3 qubits, `CRY` ring over those 3 plus the next wire   | 7      |
//! | f2       | `RY` on 4 qubits, `CNOT` per pair, `CNOT` ring over the block | 4      |
//! | conv     | f4 template with its own parameters                           | 8      |
//! | pool1    | `CRZ` (control = 1) and `CRX` (control = 0) dropped→kept       | 2      |
//! | regular  | `RY` on the 4 kept qubits, two `CNOT` rings (second reversed)  | 4/layer|
//! | pool2    | as pool1 on pairs (1→3), (5→7)                                | 2      |
//! | final    | `RY` on 3 and 7, `CRY` 3→7 and 7→3                            | 4      |
//! | readout  | four `CCRY(π)` mapping the code on (3, 7) onto one ancilla each| 0      |
//!
//! Every filter layer has two sublayers offset by two wires so the filters
//! tile the register with wrap-around. With sharing enabled (the default)
//! all placements in a layer use the same parameters.

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitBuilder, ParamCircuit, QubitRoles, Stage};
use crate::decompose::ancilla_flip_native;
use crate::error::{Error, Result};
use crate::statevector::{Axis, Control};

pub const NUM_QUBITS: usize = 13;
pub const DATA_QUBITS: [usize; 8] = [0, 1, 2, 3, 4, 5, 6, 7];
pub const ANCILLAS: [usize; 4] = [8, 9, 10, 11];
pub const VIRTUAL: usize = 12;

/// Qubits kept after the first pooling.
pub const KEPT_AFTER_POOL1: [usize; 4] = [1, 3, 5, 7];
/// Qubits kept after the second pooling; their joint value is the class code.
pub const CODE_QUBITS: [usize; 2] = [3, 7];

const QUAD_PLACEMENTS: [[[usize; 4]; 2]; 2] = [
    [[0, 1, 2, 3], [4, 5, 6, 7]],
    [[2, 3, 4, 5], [6, 7, 0, 1]],
];
const TRIPLE_PLACEMENTS: [[[usize; 4]; 3]; 2] = [
    [[0, 1, 2, 3], [3, 4, 5, 6], [6, 7, VIRTUAL, 0]],
    [[1, 2, 3, 4], [4, 5, 6, 7], [7, VIRTUAL, 0, 1]],
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Entangler {
    #[serde(rename = "cry", alias = "parameterized_cry")]
    #[value(name = "cry")]
    ParameterizedCry,
    Cnot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Full,
    Reference,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub num_regular_layers: usize,
    pub entangler: Entangler,
    pub share_across_sublayers: bool,
    pub include_final_filter: bool,
    pub include_output_cascade: bool,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        ArchitectureConfig {
            num_regular_layers: 8,
            entangler: Entangler::ParameterizedCry,
            share_across_sublayers: true,
            include_final_filter: true,
            include_output_cascade: true,
        }
    }
}

impl ArchitectureConfig {
    /// Settings of the reference circuit: CNOT entanglers and nothing after
    /// the regular layers.
    pub fn reference() -> Self {
        ArchitectureConfig {
            entangler: Entangler::Cnot,
            include_final_filter: false,
            include_output_cascade: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_regular_layers == 0 {
            return Err(Error::Config("num_regular_layers must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Builds the circuit for `kind`.
pub fn build(kind: ArchKind, config: &ArchitectureConfig) -> Result<ParamCircuit> {
    match kind {
        ArchKind::Full => build_qcnn_circuit(config),
        ArchKind::Reference => build_reference_circuit(config),
    }
}

/// Per-layer parameter allocation honoring the sharing switch.
struct LayerParams<const N: usize> {
    sets: Vec<[usize; N]>,
}

impl<const N: usize> LayerParams<N> {
    fn allocate(b: &mut CircuitBuilder, sublayers: usize, shared: bool) -> Self {
        let sets = if shared {
            vec![b.new_params::<N>(); sublayers]
        } else {
            (0..sublayers).map(|_| b.new_params::<N>()).collect()
        };
        LayerParams { sets }
    }
}

/// `RY` on each filter qubit, then a ring over `ring` (4 wires).
fn filter_with_ring(
    b: &mut CircuitBuilder,
    filter: &[usize],
    ring: &[usize; 4],
    rotations: &[usize],
    entanglers: Option<&[usize]>,
) {
    for (&q, &p) in filter.iter().zip(rotations) {
        b.rotation(Axis::Y, q, p);
    }
    for k in 0..4 {
        let (c, t) = (ring[k], ring[(k + 1) % 4]);
        match entanglers {
            Some(phi) => b.controlled(Axis::Y, Control::on_one(c), t, phi[k]),
            None => b.cnot(c, t),
        };
    }
}

fn quad_layer(b: &mut CircuitBuilder, stage: Stage, config: &ArchitectureConfig, entangler: Entangler) {
    let cry = entangler == Entangler::ParameterizedCry;
    if cry {
        let params = LayerParams::<8>::allocate(b, 2, config.share_across_sublayers);
        for (s, placements) in QUAD_PLACEMENTS.iter().enumerate() {
            b.stage(stage, s);
            for quad in placements {
                let p = &params.sets[s];
                filter_with_ring(b, quad, quad, &p[..4], Some(&p[4..]));
            }
        }
    } else {
        let params = LayerParams::<4>::allocate(b, 2, config.share_across_sublayers);
        for (s, placements) in QUAD_PLACEMENTS.iter().enumerate() {
            b.stage(stage, s);
            for quad in placements {
                filter_with_ring(b, quad, quad, &params.sets[s], None);
            }
        }
    }
}

fn triple_layer(b: &mut CircuitBuilder, config: &ArchitectureConfig, entangler: Entangler) {
    let cry = entangler == Entangler::ParameterizedCry;
    if cry {
        let params = LayerParams::<7>::allocate(b, 2, config.share_across_sublayers);
        for (s, placements) in TRIPLE_PLACEMENTS.iter().enumerate() {
            b.stage(Stage::Filter3, s);
            for ring in placements {
                let p = &params.sets[s];
                filter_with_ring(b, &ring[..3], ring, &p[..3], Some(&p[3..]));
            }
        }
    } else {
        let params = LayerParams::<3>::allocate(b, 2, config.share_across_sublayers);
        for (s, placements) in TRIPLE_PLACEMENTS.iter().enumerate() {
            b.stage(Stage::Filter3, s);
            for ring in placements {
                filter_with_ring(b, &ring[..3], ring, &params.sets[s], None);
            }
        }
    }
}

fn pair_layer(b: &mut CircuitBuilder, config: &ArchitectureConfig) {
    let params = LayerParams::<4>::allocate(b, 2, config.share_across_sublayers);
    for (s, placements) in QUAD_PLACEMENTS.iter().enumerate() {
        b.stage(Stage::Filter2, s);
        for &[q0, q1, q2, q3] in placements {
            for (&q, &p) in [q0, q1, q2, q3].iter().zip(&params.sets[s]) {
                b.rotation(Axis::Y, q, p);
            }
            b.cnot(q0, q1).cnot(q2, q3);
            b.cnot(q1, q2).cnot(q2, q3).cnot(q3, q0).cnot(q0, q1);
        }
    }
}

/// Controlled `RZ` (dropped = 1) and `RX` (dropped = 0) onto the kept qubit.
fn pooling(b: &mut CircuitBuilder, stage: Stage, pairs: &[(usize, usize)]) {
    let [gz, gx] = b.new_params::<2>();
    b.stage(stage, 0);
    for &(dropped, kept) in pairs {
        b.controlled(Axis::Z, Control::on_one(dropped), kept, gz);
        b.controlled(Axis::X, Control::on_zero(dropped), kept, gx);
    }
}

fn regular_layers(b: &mut CircuitBuilder, layers: usize) {
    let q = KEPT_AFTER_POOL1;
    for layer in 0..layers {
        b.stage(Stage::Regular, layer);
        let params = b.new_params::<4>();
        for (&qubit, &p) in q.iter().zip(&params) {
            b.rotation(Axis::Y, qubit, p);
        }
        for k in 0..4 {
            b.cnot(q[k], q[(k + 1) % 4]);
        }
        for k in (0..4).rev() {
            b.cnot(q[(k + 1) % 4], q[k]);
        }
    }
}

fn preliminary_and_regular(b: &mut CircuitBuilder, config: &ArchitectureConfig) {
    let entangler = config.entangler;
    quad_layer(b, Stage::Filter4, config, entangler);
    triple_layer(b, config, entangler);
    pair_layer(b, config);
    quad_layer(b, Stage::Conv, config, entangler);
    pooling(b, Stage::Pool1, &[(0, 1), (2, 3), (4, 5), (6, 7)]);
    regular_layers(b, config.num_regular_layers);
}

fn roles(readout: Vec<usize>) -> QubitRoles {
    QubitRoles {
        data: DATA_QUBITS.to_vec(),
        ancillas: ANCILLAS.to_vec(),
        virtual_qubit: Some(VIRTUAL),
        readout,
    }
}

/// The full QCNN: preliminary filters, conv + pooling, regular layers,
/// second pooling, final filter and the one-hot output cascade.
pub fn build_qcnn_circuit(config: &ArchitectureConfig) -> Result<ParamCircuit> {
    config.validate()?;
    if !config.include_output_cascade {
        return Err(Error::Config(
            "the full architecture reads out through the output cascade; \
             use the reference builder for a cascade-free circuit"
                .into(),
        ));
    }
    let mut b = CircuitBuilder::new(NUM_QUBITS);
    preliminary_and_regular(&mut b, config);
    pooling(&mut b, Stage::Pool2, &[(1, 3), (5, 7)]);

    if config.include_final_filter {
        let [a, c] = CODE_QUBITS;
        b.stage(Stage::Final, 0);
        let [t1, t2] = b.new_params::<2>();
        b.rotation(Axis::Y, a, t1).rotation(Axis::Y, c, t2);
        match config.entangler {
            Entangler::ParameterizedCry => {
                let [p1, p2] = b.new_params::<2>();
                b.controlled(Axis::Y, Control::on_one(a), c, p1);
                b.controlled(Axis::Y, Control::on_one(c), a, p2);
            }
            Entangler::Cnot => {
                b.cnot(a, c).cnot(c, a);
            }
        }
    }

    b.stage(Stage::Readout, 0);
    for (class, &ancilla) in ANCILLAS.iter().enumerate() {
        let high = ((class >> 1) & 1) as u8;
        let low = (class & 1) as u8;
        b.fixed(ancilla_flip_native(
            CODE_QUBITS[0],
            CODE_QUBITS[1],
            ancilla,
            high,
            low,
        ));
    }
    b.finish(roles(ANCILLAS.to_vec()))
}

/// Ablation circuit: CNOT entanglers throughout, nothing after the regular
/// layers, and each ancilla copied from one surviving qubit by a CNOT.
/// The config's entangler and post-regular switches are ignored.
pub fn build_reference_circuit(config: &ArchitectureConfig) -> Result<ParamCircuit> {
    config.validate()?;
    let config = ArchitectureConfig {
        entangler: Entangler::Cnot,
        include_final_filter: false,
        include_output_cascade: false,
        ..config.clone()
    };
    let mut b = CircuitBuilder::new(NUM_QUBITS);
    preliminary_and_regular(&mut b, &config);
    b.stage(Stage::Readout, 0);
    for (&src, &ancilla) in KEPT_AFTER_POOL1.iter().zip(&ANCILLAS) {
        b.cnot(src, ancilla);
    }
    b.finish(roles(ANCILLAS.to_vec()))
}
