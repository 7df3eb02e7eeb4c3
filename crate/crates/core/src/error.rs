use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("JFET pinched off: v_gs = {v_gs} V at or below pinch-off {v_pinchoff} V")]
    PinchOff { v_gs: f64, v_pinchoff: f64 },

    #[error("script error: {0}")]
    Script(String),

    #[error("calibration infeasible: {0}")]
    Calibration(String),

    #[error("distance {distance} ft outside SNR anchor range [{min}, {max}] ft")]
    Extrapolation { distance: f64, min: f64, max: f64 },

    #[error("IQ clipping (peak |s| = {peak:.4}) caused by tags: {}", tags.join(", "))]
    Clipping { tags: Vec<String>, peak: f64 },

    #[error("buffer mismatch: {0}")]
    Mismatch(String),

    #[error("aliasing risk: anti-alias cutoff {cutoff} Hz exceeds {limit} Hz")]
    AliasingRisk { cutoff: f64, limit: f64 },

    #[error("unsupported resampling ratio {in_rate} -> {out_rate}")]
    UnsupportedRatio { in_rate: f64, out_rate: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("band specification error: {0}")]
    BandSpec(String),

    #[error("channel capacity exceeded: cannot place tag '{tag_id}'")]
    Capacity { tag_id: String },

    #[error("{location}: {message}")]
    Validation { location: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn validation(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 validation, 3 capacity or infeasible design,
    /// 4 I/O or format.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity { .. } | Error::Calibration(_) => 3,
            Error::Format(_) | Error::Io(_) => 4,
            _ => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::validation("tags[0]", "x").exit_code(), 2);
        assert_eq!(Error::invalid("x").exit_code(), 2);
        assert_eq!(Error::Capacity { tag_id: "a".into() }.exit_code(), 3);
        assert_eq!(Error::Calibration("x".into()).exit_code(), 3);
        assert_eq!(Error::Format("x".into()).exit_code(), 4);
        let io: Error = std::io::Error::new(std::io::ErrorKind::NotFound, "gone").into();
        assert_eq!(io.exit_code(), 4);
    }

    #[test]
    fn validation_displays_location_first() {
        let e = Error::validation("s.json:4:7", "seed missing");
        assert_eq!(e.to_string(), "s.json:4:7: seed missing");
    }
}
