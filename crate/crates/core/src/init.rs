use std::fmt;
use std::str::FromStr;

use crate::error::{contract, Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::Rng;

pub const DEFAULT_GAUSSIAN_STD: f64 = 0.05;

/// Weight initialization scheme. Biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitScheme {
    /// Uniform on `±sqrt(6 / (fan_in + fan_out))`.
    Xavier,
    /// Normal with std `sqrt(2 / fan_in)`.
    #[default]
    Kaiming,
    /// Normal with a fixed std.
    Gaussian { std: f64 },
}

impl InitScheme {
    pub fn gaussian() -> Self {
        InitScheme::Gaussian { std: DEFAULT_GAUSSIAN_STD }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            InitScheme::Xavier => "xavier",
            InitScheme::Kaiming => "kaiming",
            InitScheme::Gaussian { .. } => "gaussian",
        }
    }
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitScheme::Gaussian { std } => write!(f, "gaussian:{std}"),
            other => f.write_str(other.tag()),
        }
    }
}

/// Accepts `xavier`, `kaiming`, `gaussian` or `gaussian:<std>`.
impl FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None => match s {
                "xavier" => Ok(InitScheme::Xavier),
                "kaiming" => Ok(InitScheme::Kaiming),
                "gaussian" => Ok(InitScheme::gaussian()),
                _ => Err(Error::Config(format!("unknown init scheme '{s}'"))),
            },
            Some(("gaussian", std)) => match std.parse::<f64>() {
                Ok(std) if std > 0.0 && std.is_finite() => Ok(InitScheme::Gaussian { std }),
                _ => Err(Error::Config(format!("invalid gaussian std '{std}'"))),
            },
            Some(_) => Err(Error::Config(format!("unknown init scheme '{s}'"))),
        }
    }
}

/// A `fan_out x fan_in` weight matrix (so that `y = W x`).
pub fn init_weights(fan_in: usize, fan_out: usize, scheme: InitScheme, rng: &mut Rng) -> Result<DenseMatrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(contract("fan_in and fan_out must be at least 1"));
    }
    let n = fan_in * fan_out;
    let data: Vec<f64> = match scheme {
        InitScheme::Xavier => {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n).map(|_| rng.uniform(-bound, bound)).collect()
        }
        InitScheme::Kaiming => {
            let std = (2.0 / fan_in as f64).sqrt();
            (0..n).map(|_| std * rng.normal()).collect()
        }
        InitScheme::Gaussian { std } => (0..n).map(|_| std * rng.normal()).collect(),
    };
    DenseMatrix::new(fan_out, fan_in, data)
}
