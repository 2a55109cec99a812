//! Simulator and analysis toolkit for DHAIQ: detection of hidden adversaries
//! in quads. A wireless mesh floods randomly coded probe packets inside
//! nested square monitoring areas; corner watchdogs compare the rank of what
//! they overhear against the number of independent probes that were injected.
//! Any rank excess proves that somebody modified a packet, and recursive
//! subdivision of the offending area corners the culprit in a small cell.
//!
//! Modules, bottom up:
//!
//! * [`gf`] — arithmetic in GF(2^u) with log/antilog tables.
//! * [`coding`] — probe packets, random linear recoding, packet pools and
//!   rank bookkeeping over augmented rows.
//! * [`topology`] — random geometric graphs on a square deployment and the
//!   quadtree of monitoring areas.
//! * [`protocol`] — watchdog election, synchronous flooding generations,
//!   detection, recursive drill-down and the shifted-grid second pass.
//! * [`analysis`] — closed-form study of how adversaries should spread over
//!   the four quadrants, plus the innocent-marking bound.
//! * [`experiment`] — seeded scenario runner, parameter sweeps, CSV/SVG
//!   rendering and config parsing shared by the CLI and the browser demo.

pub mod analysis;
pub mod coding;
pub mod experiment;
pub mod gf;
pub mod protocol;
pub mod topology;
