//! Compact surfaces with boundary, named `O<g>.<β>` or `N<g>.<β>`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SurfaceError {
    #[error("cannot parse surface '{0}': expected O<g>.<b>, N<g>.<b>, disc, cylinder or moebius")]
    Parse(String),
    #[error("a surface needs at least one boundary component")]
    NoBoundary,
    #[error("a non-orientable surface needs at least one cross-cap")]
    NoCrossCap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Surface {
    pub orientable: bool,
    /// Handles when orientable, cross-caps otherwise.
    pub genus: u32,
    pub boundaries: u32,
}

impl Surface {
    pub fn new(orientable: bool, genus: u32, boundaries: u32) -> Result<Self, SurfaceError> {
        if boundaries == 0 {
            return Err(SurfaceError::NoBoundary);
        }
        if !orientable && genus == 0 {
            return Err(SurfaceError::NoCrossCap);
        }
        Ok(Surface { orientable, genus, boundaries })
    }

    pub fn orientable(genus: u32, boundaries: u32) -> Self {
        Self::new(true, genus, boundaries).expect("valid orientable surface")
    }

    pub fn non_orientable(genus: u32, boundaries: u32) -> Self {
        Self::new(false, genus, boundaries).expect("valid non-orientable surface")
    }

    pub fn disc() -> Self {
        Self::orientable(0, 1)
    }

    pub fn cylinder() -> Self {
        Self::orientable(0, 2)
    }

    pub fn moebius() -> Self {
        Self::non_orientable(1, 1)
    }

    /// Euler characteristic of the closed surface.
    pub fn chi_closed(&self) -> i64 {
        if self.orientable {
            2 - 2 * self.genus as i64
        } else {
            2 - self.genus as i64
        }
    }

    /// Euler characteristic of the surface with its boundary discs removed.
    pub fn chi(&self) -> i64 {
        self.chi_closed() - self.boundaries as i64
    }

    pub fn is_disc(&self) -> bool {
        self.orientable && self.genus == 0 && self.boundaries == 1
    }

    /// Edge count of a cubic scheme, `2 − 3χ`.
    pub fn cubic_edges(&self) -> i64 {
        2 - 3 * self.chi()
    }

    /// The surface with Euler characteristic `χ(S̄) = chi_closed` and the
    /// given orientability, if it exists.
    pub fn from_closed_chi(orientable: bool, chi_closed: i64, boundaries: u32) -> Option<Self> {
        let deficit = 2 - chi_closed;
        if deficit < 0 {
            return None;
        }
        let genus = if orientable {
            if deficit % 2 != 0 {
                return None;
            }
            deficit / 2
        } else {
            deficit
        };
        Surface::new(orientable, genus as u32, boundaries).ok()
    }
}

impl fmt::Display for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.orientable { 'O' } else { 'N' };
        write!(f, "{tag}{}.{}", self.genus, self.boundaries)
    }
}

impl FromStr for Surface {
    type Err = SurfaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "disc" | "disk" => return Ok(Surface::disc()),
            "cylinder" | "cyl" => return Ok(Surface::cylinder()),
            "moebius" | "mobius" => return Ok(Surface::moebius()),
            _ => {}
        }
        let err = || SurfaceError::Parse(s.to_string());
        let orientable = match s.chars().next() {
            Some('O') | Some('o') => true,
            Some('N') | Some('n') => false,
            _ => return Err(err()),
        };
        let (g, b) = s[1..].split_once('.').ok_or_else(err)?;
        let genus = g.parse().map_err(|_| err())?;
        let boundaries = b.parse().map_err(|_| err())?;
        Surface::new(orientable, genus, boundaries)
    }
}
