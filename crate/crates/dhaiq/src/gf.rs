//! Arithmetic in the binary extension field GF(2^u).
//!
//! Symbols are polynomials over GF(2) reduced by an irreducible modulus of
//! degree `u`. Addition is XOR. Multiplication goes through log/antilog
//! tables built once per [`GfField`]: with `g` a generator of the
//! multiplicative group, `a * b = g^(log a + log b)`. The antilog table is
//! stored doubled so the exponent sum never needs a modulo.
//!
//! Widths 2..=16 are supported; the default width is 8 with modulus
//! x^8 + x^4 + x^3 + x + 1 (0x11B).

use rand::Rng;
use thiserror::Error;

/// Width used when nothing else is configured.
pub const DEFAULT_WIDTH: u32 = 8;

/// Default modulus per width, indexed by `width - 2`. Every entry is checked
/// for irreducibility in the constructor, so a typo here cannot survive the
/// test suite.
const DEFAULT_MODULI: [u32; 15] = [
    0x7,     // x^2 + x + 1
    0xB,     // x^3 + x + 1
    0x13,    // x^4 + x + 1
    0x25,    // x^5 + x^2 + 1
    0x43,    // x^6 + x + 1
    0x89,    // x^7 + x^3 + 1
    0x11B,   // x^8 + x^4 + x^3 + x + 1
    0x211,   // x^9 + x^4 + 1
    0x409,   // x^10 + x^3 + 1
    0x805,   // x^11 + x^2 + 1
    0x1053,  // x^12 + x^6 + x^4 + x + 1
    0x201B,  // x^13 + x^4 + x^3 + x + 1
    0x4443,  // x^14 + x^10 + x^6 + x + 1
    0x8003,  // x^15 + x + 1
    0x1100B, // x^16 + x^12 + x^3 + x + 1
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("field width {0} outside the supported range 2..=16")]
    UnsupportedWidth(u32),
    #[error("modulus {0:#x} does not have degree {1}")]
    WrongDegree(u32, u32),
    #[error("modulus {0:#x} is reducible")]
    ReducibleModulus(u32),
    #[error("value {0} is not a symbol of a field with {1} elements")]
    OutOfRange(u32, u32),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

/// One field symbol. The raw value is always below the order of the field
/// that produced it; elements only come out of [`GfField`] operations,
/// [`GfField::element`], or the two constants.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct FieldElement(u16);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn value(self) -> u16 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// A concrete GF(2^u) with its multiplication tables.
#[derive(Clone)]
pub struct GfField {
    width: u32,
    modulus: u32,
    order: u32,
    /// `log[a]` for a in 1..order; index 0 is a dummy.
    log: Vec<u16>,
    /// `exp[i] = g^i`, doubled to 2*(order-1) entries so that
    /// `exp[log a + log b]` needs no reduction.
    exp: Vec<u16>,
}

impl std::fmt::Debug for GfField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GfField")
            .field("width", &self.width)
            .field("modulus", &format_args!("{:#x}", self.modulus))
            .finish()
    }
}

impl GfField {
    /// Builds the field for an explicit irreducible modulus of degree `width`.
    pub fn new(width: u32, modulus: u32) -> Result<Self, FieldError> {
        if !(2..=16).contains(&width) {
            return Err(FieldError::UnsupportedWidth(width));
        }
        if poly_degree(modulus) != width as i32 {
            return Err(FieldError::WrongDegree(modulus, width));
        }
        if !is_irreducible(modulus, width) {
            return Err(FieldError::ReducibleModulus(modulus));
        }

        let order = 1u32 << width;
        let generator = find_generator(modulus, width, order)
            .expect("an irreducible modulus always yields a cyclic unit group");

        let mut log = vec![0u16; order as usize];
        let mut exp = vec![0u16; 2 * (order as usize - 1)];
        let mut x = 1u16;
        for i in 0..(order - 1) as usize {
            exp[i] = x;
            exp[i + order as usize - 1] = x;
            log[x as usize] = i as u16;
            x = clmul_mod(x as u32, generator, modulus, width);
        }
        debug_assert_eq!(x, 1, "generator cycle must close after order-1 steps");

        Ok(GfField { width, modulus, order, log, exp })
    }

    /// Builds the field with the default modulus for `width`.
    pub fn with_width(width: u32) -> Result<Self, FieldError> {
        if !(2..=16).contains(&width) {
            return Err(FieldError::UnsupportedWidth(width));
        }
        Self::new(width, DEFAULT_MODULI[(width - 2) as usize])
    }

    /// The default field: GF(256) with modulus 0x11B.
    pub fn default_field() -> Self {
        Self::with_width(DEFAULT_WIDTH).expect("default field parameters are valid")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    /// Number of symbols, 2^width.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Range-checked symbol constructor.
    pub fn element(&self, value: u32) -> Result<FieldElement, FieldError> {
        if value < self.order {
            Ok(FieldElement(value as u16))
        } else {
            Err(FieldError::OutOfRange(value, self.order))
        }
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(a.0 ^ b.0)
    }

    /// Subtraction; in characteristic 2 it coincides with addition.
    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, b)
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.is_zero() || b.is_zero() {
            return FieldElement::ZERO;
        }
        let i = self.log[a.0 as usize] as usize + self.log[b.0 as usize] as usize;
        FieldElement(self.exp[i])
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, FieldError> {
        if a.is_zero() {
            return Err(FieldError::ZeroInverse);
        }
        let i = (self.order - 1) as usize - self.log[a.0 as usize] as usize;
        Ok(FieldElement(self.exp[i]))
    }

    /// Draws a symbol uniformly from all `order` values, zero included.
    pub fn random_symbol<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement(rng.random_range(0..self.order) as u16)
    }
}

/// Degree of a polynomial over GF(2), or -1 for the zero polynomial.
fn poly_degree(p: u32) -> i32 {
    31 - p.leading_zeros() as i32
}

/// Trial division: a degree-w polynomial is irreducible over GF(2) iff no
/// polynomial of degree 1..=w/2 divides it.
fn is_irreducible(modulus: u32, width: u32) -> bool {
    let max_divisor = 1u32 << (width / 2 + 1);
    for g in 2..max_divisor {
        if poly_rem(modulus, g) == 0 {
            return false;
        }
    }
    true
}

fn poly_rem(mut a: u32, b: u32) -> u32 {
    let db = poly_degree(b);
    loop {
        let da = poly_degree(a);
        if da < db {
            return a;
        }
        a ^= b << (da - db);
    }
}

/// Peasant multiplication with reduction folded into each shift; both inputs
/// and the result stay below 2^width.
fn clmul_mod(mut a: u32, mut b: u32, modulus: u32, width: u32) -> u16 {
    let high = 1u32 << width;
    let mut acc = 0u32;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & high != 0 {
            a ^= modulus;
        }
    }
    acc as u16
}

/// Smallest element whose powers enumerate the whole multiplicative group.
fn find_generator(modulus: u32, width: u32, order: u32) -> Option<u32> {
    'candidate: for g in 2..order {
        let mut x = 1u32;
        for step in 1..order {
            x = clmul_mod(x, g, modulus, width) as u32;
            if x == 1 {
                if step == order - 1 {
                    return Some(g);
                }
                continue 'candidate;
            }
        }
    }
    None
}
