//! Reference evolution, wave packets and the packet decomposition.

pub mod packets;
pub mod reference;
pub mod weyl;

pub use packets::{
    Decomposition, DecomposeOptions, DefectReport, PacketMode, PacketProfile, WavePacket, packet_evolve,
    packet_evolve_many, parametrix_defect, wavepacket_decompose,
};
pub use reference::{FieldTrajectory, Method, PropagateOptions, Propagator, SolverMeta, propagate_reference};
pub use weyl::{Backend, WeylOperator, weyl_apply};
