//! Uniform one-dimensional grid on the truncated line `[-L, L]`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Uniform grid with an odd number of nodes so that `x = 0` is a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    half_width: f64,
    n: usize,
    dx: f64,
    x: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::param("half_width", "must be positive and finite"));
        }
        if n < 3 {
            return Err(Error::param("n", format!("need at least 3 points, got {n}")));
        }
        if n % 2 == 0 {
            return Err(Error::param("n", format!("must be odd so x=0 is a node, got {n}")));
        }
        let dx = 2.0 * half_width / (n - 1) as f64;
        let mid = (n - 1) / 2;
        // Build symmetrically around the centre node so x[mid] == 0 exactly.
        let x = (0..n)
            .map(|i| {
                if i == 0 {
                    -half_width
                } else if i == n - 1 {
                    half_width
                } else {
                    (i as f64 - mid as f64) * dx
                }
            })
            .collect();
        Ok(Self {
            half_width,
            n,
            dx,
            x,
        })
    }

    /// Grid with the given half-width and spacing (`2L/dx` must be an even integer).
    pub fn with_spacing(half_width: f64, dx: f64) -> Result<Self> {
        let cells = 2.0 * half_width / dx;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * cells.max(1.0) || rounded as usize % 2 != 0 {
            return Err(Error::param(
                "dx",
                format!("2L/dx = {cells} is not an even integer"),
            ));
        }
        Self::new(half_width, rounded as usize + 1)
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Index of the node at `x = 0`.
    #[inline]
    pub fn mid(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Composite trapezoid weight of node `i`.
    #[inline]
    pub fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.trapezoid_weight(i)).collect()
    }

    /// Trapezoid rule for `∫ g dx` from samples.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        debug_assert_eq!(g.len(), self.n);
        let interior: f64 = g[1..self.n - 1].iter().sum();
        self.dx * (interior + 0.5 * (g[0] + g[self.n - 1]))
    }

    /// Grid with the same half-width and half the spacing.
    pub fn refined(&self) -> Self {
        Self::new(self.half_width, 2 * self.n - 1).expect("refining a valid grid")
    }

    pub fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.n {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.n,
                got: v.len(),
            })
        }
    }

    /// Stable 64-bit fingerprint of `(L, n)`, used in file headers.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.half_width.to_le_bytes());
        h.update((self.n as u64).to_le_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}
