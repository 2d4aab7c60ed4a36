//! Concrete denoisers: deterministic and stochastic mocks, and an HTTP client
//! for an external model server.

mod mock;
mod remote;
mod schedule;
pub mod wire;

pub use mock::{
    mock_blur, mock_constant, mock_identity, mock_seeded_noise, MockBlur, MockConstant, MockIdentity, MockSeededNoise,
};
pub use remote::{remote_denoiser, BackendConfig, RemoteDenoiser};
pub use schedule::MockSchedule;

use crate::sampler::{DenoiseError, Denoiser};

/// Blur radius used by `mock:blur` when none is given.
pub const DEFAULT_BLUR_RADIUS: usize = 2;

/// Opens a backend from its command-line name.
///
/// Accepted forms: `mock:identity`, `mock:constant=<value>`,
/// `mock:blur` or `mock:blur=<radius>`, `mock:noise`, and any `http://` or
/// `https://` URL. Mock schedules are cosine schedules of `steps` steps.
pub fn open(spec: &str, steps: usize, remote: Option<BackendConfig>) -> Result<Box<dyn Denoiser>, DenoiseError> {
    if spec.starts_with("http://") || spec.starts_with("https://") {
        let mut config = remote.unwrap_or_else(|| BackendConfig::new(spec));
        config.endpoint = spec.to_string();
        return Ok(Box::new(RemoteDenoiser::connect(config)?));
    }
    let Some(mock) = spec.strip_prefix("mock:") else {
        return Err(DenoiseError::Config(format!("unknown backend `{spec}`")));
    };
    let (name, arg) = match mock.split_once('=') {
        Some((n, a)) => (n, Some(a)),
        None => (mock, None),
    };
    let bad_arg = |a: &str| DenoiseError::Config(format!("bad argument `{a}` for mock:{name}"));
    Ok(match (name, arg) {
        ("identity", None) => Box::new(MockIdentity),
        ("constant", Some(a)) => Box::new(MockConstant(a.parse().map_err(|_| bad_arg(a))?)),
        ("blur", None) => Box::new(MockBlur::new(DEFAULT_BLUR_RADIUS, MockSchedule::cosine(steps))?),
        ("blur", Some(a)) => Box::new(MockBlur::new(
            a.parse().map_err(|_| bad_arg(a))?,
            MockSchedule::cosine(steps),
        )?),
        ("noise", None) => Box::new(MockSeededNoise::new(MockSchedule::cosine(steps))),
        _ => return Err(DenoiseError::Config(format!("unknown mock backend `{spec}`"))),
    })
}
