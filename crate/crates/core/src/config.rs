//! Resource limits shared by the rasterizers and solvers.

/// Environment variable overriding [`Limits::max_cells`].
pub const MAX_CELLS_ENV: &str = "MTP_LAB_MAX_CELLS";

pub const DEFAULT_MAX_LEVEL: u32 = 14;
pub const DEFAULT_MAX_CELLS: usize = 1 << 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Finest cube level any mask may use.
    pub max_level: u32,
    /// Bound on tree nodes visited, canonical cubes stored, or cells expanded.
    pub max_cells: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_level: DEFAULT_MAX_LEVEL,
            max_cells: DEFAULT_MAX_CELLS,
        }
    }
}

impl Limits {
    /// Defaults, with `MTP_LAB_MAX_CELLS` applied when it parses as an integer.
    pub fn from_env() -> Self {
        let mut l = Limits::default();
        if let Ok(v) = std::env::var(MAX_CELLS_ENV) {
            if let Ok(n) = v.trim().parse::<usize>() {
                l.max_cells = n;
            }
        }
        l
    }
}
