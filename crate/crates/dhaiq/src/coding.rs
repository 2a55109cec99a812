//! Probe packets and random linear recoding.
//!
//! A generation injects `k` probes, each carrying a unit coefficient vector
//! and a random payload of `p` symbols. Relays never decode: a node combines
//! everything in its buffer with coefficients drawn uniformly at random
//! (zero included) and forwards the sum. Rank analysis works on *augmented
//! rows*, the concatenation of a packet's coefficient block and payload
//! block: honest traffic lives in the span of the k probe rows, so any pool
//! whose rank exceeds k proves that a packet was modified in flight.

use crate::gf::{FieldElement, GfField};
use rand::Rng;
use thiserror::Error;

/// Probes injected per generation; one per corner of a square area.
pub const PROBES_PER_GENERATION: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodingError {
    #[error("cannot encode from an empty buffer")]
    EmptyBuffer,
    #[error("buffer mixes packets from different generations")]
    MixedGenerations,
    #[error("buffer mixes packets of different shapes")]
    ShapeMismatch,
}

/// Identifies one flooding generation: grid pass, quadtree level, and a
/// per-run ordinal for the area.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct GenerationId {
    pub run: u32,
    pub level: u32,
    pub area: u32,
}

/// Coefficients of the original probes inside a coded packet.
pub type GlobalEncodingVector = Vec<FieldElement>;

/// One coded packet in flight.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbePacket {
    pub generation: GenerationId,
    pub coefficients: GlobalEncodingVector,
    pub payload: Vec<FieldElement>,
    /// Round at which the generation carrying this packet expires.
    pub expiry_round: u32,
}

impl ProbePacket {
    /// A fresh probe for slot `slot` of `k`: unit coefficient vector and the
    /// given payload.
    pub fn probe(
        generation: GenerationId,
        slot: usize,
        k: usize,
        payload: Vec<FieldElement>,
        expiry_round: u32,
    ) -> ProbePacket {
        assert!(slot < k, "probe slot {slot} out of range for {k} probes");
        let mut coefficients = vec![FieldElement::ZERO; k];
        coefficients[slot] = FieldElement::ONE;
        ProbePacket { generation, coefficients, payload, expiry_round }
    }

    /// Coefficient block followed by payload block.
    pub fn augmented_row(&self) -> Vec<FieldElement> {
        let mut row = Vec::with_capacity(self.coefficients.len() + self.payload.len());
        row.extend_from_slice(&self.coefficients);
        row.extend_from_slice(&self.payload);
        row
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|c| c.is_zero()) && self.payload.iter().all(|s| s.is_zero())
    }

    /// Byte serialization for trace logs: generation id as three
    /// little-endian u32 values, then coefficients, then payload; one byte
    /// per symbol when the field width is at most 8, two otherwise.
    pub fn log_bytes(&self, width: u32) -> Vec<u8> {
        let per_symbol = if width <= 8 { 1 } else { 2 };
        let symbols = self.coefficients.len() + self.payload.len();
        let mut out = Vec::with_capacity(12 + per_symbol * symbols);
        out.extend_from_slice(&self.generation.run.to_le_bytes());
        out.extend_from_slice(&self.generation.level.to_le_bytes());
        out.extend_from_slice(&self.generation.area.to_le_bytes());
        for s in self.coefficients.iter().chain(self.payload.iter()) {
            if per_symbol == 1 {
                out.push(s.value() as u8);
            } else {
                out.extend_from_slice(&s.value().to_le_bytes());
            }
        }
        out
    }
}

/// Random linear combination of everything in `buffer`, the relay operation.
/// Mixing coefficients are drawn per packet, uniformly over the whole field;
/// an all-zero output is legitimate (it gets transmitted but is never
/// innovative for anyone). The inputs must share generation and shape.
pub fn local_encode<R: Rng + ?Sized>(
    field: &GfField,
    buffer: &[ProbePacket],
    rng: &mut R,
) -> Result<ProbePacket, CodingError> {
    let first = buffer.first().ok_or(CodingError::EmptyBuffer)?;
    let k = first.coefficients.len();
    let p = first.payload.len();
    for pkt in &buffer[1..] {
        if pkt.generation != first.generation {
            return Err(CodingError::MixedGenerations);
        }
        if pkt.coefficients.len() != k || pkt.payload.len() != p {
            return Err(CodingError::ShapeMismatch);
        }
    }

    let mut coefficients = vec![FieldElement::ZERO; k];
    let mut payload = vec![FieldElement::ZERO; p];
    for pkt in buffer {
        let beta = field.random_symbol(rng);
        if beta.is_zero() {
            continue;
        }
        for (acc, &c) in coefficients.iter_mut().zip(&pkt.coefficients) {
            *acc = field.add(*acc, field.mul(beta, c));
        }
        for (acc, &s) in payload.iter_mut().zip(&pkt.payload) {
            *acc = field.add(*acc, field.mul(beta, s));
        }
    }
    Ok(ProbePacket {
        generation: first.generation,
        coefficients,
        payload,
        expiry_round: first.expiry_round,
    })
}

/// Rank of a set of equal-length rows by Gaussian elimination; the input is
/// left untouched.
pub fn rank(field: &GfField, rows: &[Vec<FieldElement>]) -> usize {
    let mut work: Vec<Vec<FieldElement>> = rows.to_vec();
    let width = match work.first() {
        Some(r) => r.len(),
        None => return 0,
    };
    assert!(work.iter().all(|r| r.len() == width), "rows must have equal length");

    let mut rank = 0;
    for col in 0..width {
        let Some(pivot) = (rank..work.len()).find(|&i| !work[i][col].is_zero()) else {
            continue;
        };
        work.swap(rank, pivot);
        let inv = field.inv(work[rank][col]).expect("pivot is nonzero");
        for i in (rank + 1)..work.len() {
            if work[i][col].is_zero() {
                continue;
            }
            let factor = field.mul(work[i][col], inv);
            let (head, tail) = work.split_at_mut(i);
            let pivot_row = &head[rank];
            let row = &mut tail[0];
            for (x, &pv) in row.iter_mut().zip(pivot_row.iter()) {
                *x = field.add(*x, field.mul(factor, pv));
            }
        }
        rank += 1;
        if rank == work.len() {
            break;
        }
    }
    rank
}

/// A node's buffer for one generation: the packets it kept, plus a reduced
/// echelon basis of their augmented rows so innovation checks are a single
/// reduction pass. Every kept packet was innovative when it arrived, so the
/// pool rank always equals the number of stored packets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PacketPool {
    packets: Vec<ProbePacket>,
    /// Rows with pairwise distinct pivot columns, sorted by pivot, leading
    /// coefficient normalized to one.
    echelon: Vec<Vec<FieldElement>>,
}

impl PacketPool {
    pub fn new() -> PacketPool {
        PacketPool::default()
    }

    pub fn packets(&self) -> &[ProbePacket] {
        &self.packets
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Rank of the kept rows; by construction this is the pool size.
    pub fn rank(&self) -> usize {
        debug_assert_eq!(self.packets.len(), self.echelon.len());
        self.echelon.len()
    }

    pub fn clear(&mut self) {
        self.packets.clear();
        self.echelon.clear();
    }

    /// Reduces the packet's augmented row against the pool basis; whatever
    /// remains is the packet's new information. Returns the remainder if it
    /// is nonzero.
    fn reduce(&self, field: &GfField, packet: &ProbePacket) -> Option<Vec<FieldElement>> {
        let mut row = packet.augmented_row();
        for basis in &self.echelon {
            let pivot = basis.iter().position(|c| !c.is_zero()).expect("basis rows are nonzero");
            let factor = row[pivot];
            if factor.is_zero() {
                continue;
            }
            for (x, &bv) in row.iter_mut().zip(basis.iter()) {
                *x = field.add(*x, field.mul(factor, bv));
            }
        }
        if row.iter().any(|c| !c.is_zero()) {
            Some(row)
        } else {
            None
        }
    }

    /// True when the packet's row lies outside the span of the pool.
    pub fn is_innovative(&self, field: &GfField, packet: &ProbePacket) -> bool {
        self.reduce(field, packet).is_some()
    }

    /// Keeps the packet iff it is innovative; returns whether it was kept.
    pub fn insert_if_innovative(&mut self, field: &GfField, packet: &ProbePacket) -> bool {
        let Some(mut remainder) = self.reduce(field, packet) else {
            return false;
        };
        let pivot = remainder.iter().position(|c| !c.is_zero()).expect("remainder is nonzero");
        let inv = field.inv(remainder[pivot]).expect("pivot is nonzero");
        for x in remainder.iter_mut() {
            *x = field.mul(*x, inv);
        }
        let at = self
            .echelon
            .iter()
            .position(|b| b.iter().position(|c| !c.is_zero()).unwrap() > pivot)
            .unwrap_or(self.echelon.len());
        self.echelon.insert(at, remainder);
        self.packets.push(packet.clone());
        true
    }
}
