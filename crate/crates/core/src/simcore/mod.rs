//! Discrete-event engine primitives: the event queue, packets, the radio
//! model, MAC schedules, energy accounting and the event trace.

mod energy;
mod mac;
mod packet;
mod queue;
mod radio;
mod trace;

pub use energy::{EnergyCosts, EnergyLedger, NodeEnergy};
pub use mac::{SmacSchedule, TdmaSchedule};
pub use packet::{Destination, Packet, PacketKind};
pub use queue::{EventQueue, SimTime};
pub use radio::{Reception, RadioModel};
pub use trace::{Trace, TraceKind, TraceLine};
