use thiserror::Error;

/// Errors raised by the model. Domain errors carry the violated bound.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is out of range: requires {bound}")]
    Domain {
        name: &'static str,
        value: f64,
        bound: &'static str,
    },

    #[error("invalid usage: {0}")]
    Usage(String),

    #[error("unsupported distribution shape: {0}")]
    UnsupportedShape(&'static str),

    #[error("invalid density table: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_g(g: f64) -> Result<()> {
    if g > 0.0 && g <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "g",
            value: g,
            bound: "0 < g <= 1",
        })
    }
}

pub(crate) fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "r",
            value: r,
            bound: "r > 0 and finite",
        })
    }
}
