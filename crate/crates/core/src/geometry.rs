//! Physical layout of the transmit and receive SIMs and the fixed
//! Rayleigh-Sommerfeld propagation matrices between consecutive layers.
//!
//! Coordinates: the transmit antenna array sits on the x-axis around the
//! origin, the receive array around `(0, 0, d)`. Layers are parallel to the
//! xy-plane with centers on the z-axis. Transmit layer `l` (1-based) sits at
//! `z = l * D_tx / L`; receive layer `k` at `z = d - k * D_rx / K`, so layer 1
//! is always the one adjacent to its antenna array.

use std::f64::consts::PI;

use crate::error::{Result, SimError};
use crate::linalg::{CMat, C64};

/// Speed of light used to turn a carrier frequency into a wavelength.
/// Rounded so that 6 GHz maps to exactly 50 mm.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

pub fn wavelength_from_carrier(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

pub type Point3 = [f64; 3];

/// Propagation direction normal shared by every layer (+z).
pub const LAYER_NORMAL: Point3 = [0.0, 0.0, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub streams: usize,
    pub tx_atoms: usize,
    pub rx_atoms: usize,
    pub tx_layers: usize,
    pub rx_layers: usize,
    pub wavelength: f64,
    /// Per-atom area; `None` means `wavelength^2 / 4`.
    pub atom_area: Option<f64>,
    pub tx_thickness: f64,
    pub rx_thickness: f64,
    pub link_distance: f64,
    /// Explicit `(rows, cols)` arrangements for non-square atom counts.
    pub tx_grid: Option<(usize, usize)>,
    pub rx_grid: Option<(usize, usize)>,
}

impl GeometryConfig {
    /// Defaults at 6 GHz with 0.1 m thick SIMs 240 m apart.
    pub fn new(streams: usize, atoms: usize, layers: usize) -> Self {
        Self {
            streams,
            tx_atoms: atoms,
            rx_atoms: atoms,
            tx_layers: layers,
            rx_layers: layers,
            wavelength: wavelength_from_carrier(6.0e9),
            atom_area: None,
            tx_thickness: 0.1,
            rx_thickness: 0.1,
            link_distance: 240.0,
            tx_grid: None,
            rx_grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimGeometry {
    pub streams: usize,
    pub tx_atoms: usize,
    pub rx_atoms: usize,
    pub tx_layers: usize,
    pub rx_layers: usize,
    pub wavelength: f64,
    pub atom_area: f64,
    pub tx_thickness: f64,
    pub rx_thickness: f64,
    pub link_distance: f64,
    pub tx_antennas: Vec<Point3>,
    pub rx_antennas: Vec<Point3>,
    /// `tx_atom_positions[l - 1][n]` for layer `l`.
    pub tx_atom_positions: Vec<Vec<Point3>>,
    pub rx_atom_positions: Vec<Vec<Point3>>,
    pub layer_normal: Point3,
}

impl SimGeometry {
    pub fn tx_layer_spacing(&self) -> f64 {
        self.tx_thickness / self.tx_layers as f64
    }

    pub fn rx_layer_spacing(&self) -> f64 {
        self.rx_thickness / self.rx_layers as f64
    }
}

/// Resolve a grid for `count` atoms: the explicit override if given,
/// otherwise a square `sqrt(count) x sqrt(count)` arrangement.
fn resolve_grid(count: usize, explicit: Option<(usize, usize)>, side: &str) -> Result<(usize, usize)> {
    if let Some((rows, cols)) = explicit {
        if rows * cols != count {
            return Err(SimError::Config(format!(
                "{side} grid {rows}x{cols} does not hold {count} atoms"
            )));
        }
        return Ok((rows, cols));
    }
    let root = (count as f64).sqrt().round() as usize;
    if root * root != count {
        return Err(SimError::Config(format!(
            "{side} atom count {count} is not a perfect square; give an explicit rows x cols grid"
        )));
    }
    Ok((root, root))
}

/// Row-major grid centered on the z-axis at height `z`.
pub fn planar_grid(rows: usize, cols: usize, pitch: f64, z: f64) -> Vec<Point3> {
    let x0 = (cols as f64 - 1.0) / 2.0;
    let y0 = (rows as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push([(c as f64 - x0) * pitch, (r as f64 - y0) * pitch, z]);
        }
    }
    out
}

/// Uniform linear array along x centered at `(0, 0, z)`.
pub fn linear_array(count: usize, pitch: f64, z: f64) -> Vec<Point3> {
    let x0 = (count as f64 - 1.0) / 2.0;
    (0..count)
        .map(|i| [(i as f64 - x0) * pitch, 0.0, z])
        .collect()
}

pub fn build_geometry(config: &GeometryConfig) -> Result<SimGeometry> {
    let positive = [
        ("wavelength", config.wavelength),
        ("tx_thickness", config.tx_thickness),
        ("rx_thickness", config.rx_thickness),
        ("link_distance", config.link_distance),
    ];
    for (name, value) in positive {
        if !(value > 0.0 && value.is_finite()) {
            return Err(SimError::Config(format!("{name} must be positive, got {value}")));
        }
    }
    if config.streams == 0 || config.tx_atoms == 0 || config.rx_atoms == 0 {
        return Err(SimError::Config("streams and atom counts must be >= 1".into()));
    }
    if config.tx_layers == 0 || config.rx_layers == 0 {
        return Err(SimError::Config("layer counts must be >= 1".into()));
    }
    if config.tx_thickness + config.rx_thickness >= config.link_distance {
        return Err(SimError::Config("SIM stacks overlap: thicknesses exceed link distance".into()));
    }
    let atom_area = match config.atom_area {
        Some(a) if a > 0.0 => a,
        Some(a) => return Err(SimError::Config(format!("atom_area must be positive, got {a}"))),
        None => config.wavelength * config.wavelength / 4.0,
    };

    let (tx_rows, tx_cols) = resolve_grid(config.tx_atoms, config.tx_grid, "tx")?;
    let (rx_rows, rx_cols) = resolve_grid(config.rx_atoms, config.rx_grid, "rx")?;
    let pitch = config.wavelength / 2.0;
    let d = config.link_distance;

    let tx_spacing = config.tx_thickness / config.tx_layers as f64;
    let rx_spacing = config.rx_thickness / config.rx_layers as f64;
    let tx_atom_positions = (1..=config.tx_layers)
        .map(|l| planar_grid(tx_rows, tx_cols, pitch, l as f64 * tx_spacing))
        .collect();
    let rx_atom_positions = (1..=config.rx_layers)
        .map(|k| planar_grid(rx_rows, rx_cols, pitch, d - k as f64 * rx_spacing))
        .collect();

    Ok(SimGeometry {
        streams: config.streams,
        tx_atoms: config.tx_atoms,
        rx_atoms: config.rx_atoms,
        tx_layers: config.tx_layers,
        rx_layers: config.rx_layers,
        wavelength: config.wavelength,
        atom_area,
        tx_thickness: config.tx_thickness,
        rx_thickness: config.rx_thickness,
        link_distance: d,
        tx_antennas: linear_array(config.streams, pitch, 0.0),
        rx_antennas: linear_array(config.streams, pitch, d),
        tx_atom_positions,
        rx_atom_positions,
        layer_normal: LAYER_NORMAL,
    })
}

/// Rayleigh-Sommerfeld coefficient from `src` to `dst`:
/// `(A cos(chi) / r) (1 / (2 pi r) - j / lambda) exp(j 2 pi r / lambda)`,
/// with `chi` the angle between the propagation direction and `normal`
/// (the normal of the source layer).
pub fn rs_coefficient(
    src: Point3,
    dst: Point3,
    normal: Point3,
    wavelength: f64,
    area: f64,
) -> Result<C64> {
    let delta = [dst[0] - src[0], dst[1] - src[1], dst[2] - src[2]];
    let dist = (delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]).sqrt();
    if dist == 0.0 {
        return Err(SimError::Domain("coincident source and destination points".into()));
    }
    let cos_chi = (delta[0] * normal[0] + delta[1] * normal[1] + delta[2] * normal[2]) / dist;
    let amplitude = area * cos_chi / dist;
    let factor = C64::new(1.0 / (2.0 * PI * dist), -1.0 / wavelength);
    let phase = C64::from_polar(1.0, 2.0 * PI * dist / wavelength);
    Ok(factor * phase * amplitude)
}

/// The fixed propagation matrices of both SIMs.
///
/// `omega_tx[0]` is `N x S` (antennas to layer 1), `omega_tx[l - 1]` for
/// `l >= 2` is `N x N` (layer `l - 1` to layer `l`). `omega_rx[0]` is `S x M`
/// (receive layer 1 to the antennas), `omega_rx[k - 1]` for `k >= 2` is
/// `M x M` (layer `k` to layer `k - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationSet {
    pub omega_tx: Vec<CMat>,
    pub omega_rx: Vec<CMat>,
}

impl PropagationSet {
    pub fn streams(&self) -> usize {
        self.omega_tx[0].ncols()
    }

    pub fn tx_atoms(&self) -> usize {
        self.omega_tx[0].nrows()
    }

    pub fn rx_atoms(&self) -> usize {
        self.omega_rx[0].ncols()
    }

    pub fn tx_layers(&self) -> usize {
        self.omega_tx.len()
    }

    pub fn rx_layers(&self) -> usize {
        self.omega_rx.len()
    }
}

fn coefficient_matrix(
    dst: &[Point3],
    src: &[Point3],
    normal: Point3,
    wavelength: f64,
    area: f64,
) -> Result<CMat> {
    let mut m = CMat::zeros(dst.len(), src.len());
    for (i, &to) in dst.iter().enumerate() {
        for (j, &from) in src.iter().enumerate() {
            m[(i, j)] = rs_coefficient(from, to, normal, wavelength, area)?;
        }
    }
    Ok(m)
}

pub fn build_propagation_matrices(geom: &SimGeometry) -> Result<PropagationSet> {
    let (lambda, area, normal) = (geom.wavelength, geom.atom_area, geom.layer_normal);
    let tx = &geom.tx_atom_positions;
    let rx = &geom.rx_atom_positions;

    let mut omega_tx = Vec::with_capacity(geom.tx_layers);
    omega_tx.push(coefficient_matrix(&tx[0], &geom.tx_antennas, normal, lambda, area)?);
    for l in 1..geom.tx_layers {
        omega_tx.push(coefficient_matrix(&tx[l], &tx[l - 1], normal, lambda, area)?);
    }

    let mut omega_rx = Vec::with_capacity(geom.rx_layers);
    omega_rx.push(coefficient_matrix(&geom.rx_antennas, &rx[0], normal, lambda, area)?);
    for k in 1..geom.rx_layers {
        omega_rx.push(coefficient_matrix(&rx[k - 1], &rx[k], normal, lambda, area)?);
    }
    Ok(PropagationSet { omega_tx, omega_rx })
}
