//! Discretized s-wave three-body operator.
//!
//! The unknown is the effective atom-molecule amplitude F(K) (the
//! molecule amplitude scaled by the coupling). With D(K) = 1/(4 pi f_o(E -
//! 3K^2/4)) the homogeneous equation reads
//!
//!   D(K) F(K) - 1/(2 pi^2) int dk k^2 Z(K, k; E) F(k) = 0,
//!
//! where Z is the angular-averaged exchange kernel with the Gaussian form
//! factors. Bound states are zeros of det(1 - D^{-1} L).

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, MomentumGrid};
use crate::twobody::PairInteraction;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::OnceLock;

/// Gauss–Legendre order of the angular integral.
pub const ANGULAR_ORDER: usize = 40;

fn angular_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ANGULAR_ORDER))
}

/// Angular-averaged exchange kernel on the real axis.
///
/// (1/2) int_{-1}^{1} du 2 exp(-b^2 [5/4 (K^2+k^2) + 2 K k u]/2) / (K^2 + k^2 + K k u - E).
pub fn swave_kernel(k_out: f64, k_in: f64, e: f64, b: f64) -> Result<f64> {
    let s2 = k_out * k_out + k_in * k_in;
    let p = k_out * k_in;
    let dmin = s2 - p.abs() - e;
    if dmin <= 0.0 {
        return Err(Error::ThresholdSingular {
            k_out,
            k_in,
            energy: e,
        });
    }
    if p == 0.0 {
        return Ok(2.0 * (-0.625 * b * b * s2).exp() / (s2 - e));
    }
    let b2 = b * b;
    if b2 == 0.0 {
        return Ok(((s2 + p - e) / (s2 - p - e)).ln() / p);
    }
    let near = dmin < 1e-3 * (s2 + e.abs());
    if near {
        return Ok(adaptive_kernel(s2, p, e, b2));
    }
    let (u, w) = angular_rule();
    let g = (-0.625 * b2 * s2).exp();
    let mut sum = 0.0;
    for (ui, wi) in u.iter().zip(w) {
        sum += wi * (-b2 * p * ui).exp() / (s2 + p * ui - e);
    }
    Ok(g * sum)
}

fn adaptive_kernel(s2: f64, p: f64, e: f64, b2: f64) -> f64 {
    // panels graded toward the endpoint where the denominator is smallest
    let f = |u: f64| (-0.625 * b2 * s2 - b2 * p * u).exp() / (s2 + p * u - e);
    let (x, w) = crate::quadrature::gauss_legendre(20);
    let end = -p.signum();
    let dist = (s2 - p.abs() - e) / p.abs();
    let mut edges = vec![end];
    let mut h = dist.max(1e-14);
    while h < 2.0 {
        edges.push(end - end * h);
        h *= 2.0;
    }
    edges.push(-end);
    let mut sum = 0.0;
    for pair in edges.windows(2) {
        let (a, c) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        let hh = 0.5 * (c - a);
        let m = 0.5 * (c + a);
        for (xi, wi) in x.iter().zip(&w) {
            sum += wi * hh * f(m + hh * xi);
        }
    }
    sum
}

/// Kernel at complex momenta and energy (rotated contours).
pub fn swave_kernel_c(k_out: Complex64, k_in: Complex64, e: Complex64, b: f64) -> Complex64 {
    let s2 = k_out * k_out + k_in * k_in;
    let p = k_out * k_in;
    let b2 = b * b;
    let (u, w) = angular_rule();
    let g = (-0.625 * b2 * s2).exp();
    let mut sum = Complex64::new(0.0, 0.0);
    for (ui, wi) in u.iter().zip(w) {
        sum += *wi * (-b2 * p * *ui).exp() / (s2 + p * *ui - e);
    }
    g * sum
}

/// Dense real matrix D - L at one energy and field.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub entries: DMatrix<f64>,
    pub energy: f64,
    pub field: f64,
    pub b: f64,
    pub k_max: f64,
}

/// Diagonal term D(K) = 1/(4 pi f_o(E - 3K^2/4)).
pub fn diagonal_term<P: PairInteraction + ?Sized>(pair: &P, e: Complex64, k: Complex64) -> Complex64 {
    pair.inv_amplitude(e - 0.75 * k * k) / (4.0 * PI)
}

/// Assemble D - L on the real axis.
pub fn assemble<P: PairInteraction + ?Sized>(pair: &P, field: f64, e: f64, grid: &MomentumGrid) -> Result<KernelMatrix> {
    let n = grid.n();
    let b = pair.range();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let ki = grid.nodes[i];
            let mut row = vec![0.0; n];
            for j in 0..n {
                let kj = grid.nodes[j];
                let z = swave_kernel(ki, kj, e, b)?;
                row[j] = -grid.weights[j] * kj * kj * z / (2.0 * PI * PI);
            }
            row[i] += diagonal_term(pair, Complex64::new(e, 0.0), Complex64::new(ki, 0.0)).re;
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let entries = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite kernel entry".into()));
    }
    Ok(KernelMatrix {
        entries,
        energy: e,
        field,
        b,
        k_max: grid.k_max,
    })
}

/// Normalized operator 1 - D^{-1} L on the contour K = s exp(-i theta).
///
/// Rotating the spectator momentum below the real axis moves the
/// atom-deep-dimer cuts off the path; bound states and the real parts of
/// resonances above deep thresholds remain zeros of the determinant.
pub fn normalized_operator<P: PairInteraction + ?Sized>(
    pair: &P,
    e: Complex64,
    grid: &MomentumGrid,
    theta: f64,
) -> DMatrix<Complex64> {
    let n = grid.n();
    let b = pair.range();
    let ph = Complex64::from_polar(1.0, -theta);
    let k: Vec<Complex64> = grid.nodes.iter().map(|&s| s * ph).collect();
    let w: Vec<Complex64> = grid.weights.iter().map(|&s| s * ph).collect();
    // 4 pi f_o times 1/(2 pi^2)
    let dinv: Vec<Complex64> = k
        .iter()
        .map(|&ki| pair.amplitude(e - 0.75 * ki * ki) * (4.0 * PI) / (2.0 * PI * PI))
        .collect();
    let upper: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| swave_kernel_c(k[i], k[j], e, b)).collect())
        .collect();
    let mut m = DMatrix::<Complex64>::identity(n, n);
    for i in 0..n {
        for j in i..n {
            let z = upper[i][j - i];
            m[(i, j)] -= dinv[i] * w[j] * k[j] * k[j] * z;
            if j != i {
                m[(j, i)] -= dinv[j] * w[i] * k[i] * k[i] * z;
            }
        }
    }
    m
}

/// log det of a square complex matrix via LU, as (log |det|, phase).
pub fn log_determinant(m: DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    let lu = m.lu();
    let u = lu.u();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        acc += u[(i, i)].ln();
    }
    let swaps = lu.p().determinant::<f64>();
    if swaps < 0.0 {
        acc += Complex64::new(0.0, PI);
    }
    acc
}

/// Fredholm determinant det(1 - D^{-1} L) on a rotated contour.
pub fn fredholm_determinant<P: PairInteraction + ?Sized>(pair: &P, e: Complex64, grid: &MomentumGrid, theta: f64) -> Complex64 {
    let ld = log_determinant(normalized_operator(pair, e, grid, theta));
    // keep exponent in range; only zeros and signs are used downstream
    Complex64::from_polar(ld.re.clamp(-700.0, 700.0).exp(), ld.im)
}

const DUMP_HEADER: usize = 8;

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Write the matrix: 8 little-endian f64 header values (n, K_max, E, B,
    /// b, 0, 0, 0) followed by the entries row-major, little-endian f64.
    pub fn write_dump(&self, mut out: impl Write) -> Result<()> {
        let header = [
            self.n() as f64,
            self.k_max,
            self.energy,
            self.field,
            self.b,
            0.0,
            0.0,
            0.0,
        ];
        for v in header {
            out.write_all(&v.to_le_bytes())?;
        }
        for i in 0..self.n() {
            for j in 0..self.n() {
                out.write_all(&self.entries[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_dump(mut input: impl Read) -> Result<Self> {
        let mut buf = [0u8; 8];
        let mut next = |input: &mut dyn Read| -> Result<f64> {
            input.read_exact(&mut buf)?;
            Ok(f64::from_le_bytes(buf))
        };
        let mut header = [0.0; DUMP_HEADER];
        for h in header.iter_mut() {
            *h = next(&mut input)?;
        }
        let n = header[0] as usize;
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            data.push(next(&mut input)?);
        }
        Ok(Self {
            entries: DMatrix::from_row_slice(n, n, &data),
            k_max: header[1],
            energy: header[2],
            field: header[3],
            b: header[4],
        })
    }
}
