//! Weights and grid functions from presets or files.

use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use mfcz_core::grid::{GridFunction, TorusDomain};
use mfcz_core::weights::Weight;
use mfcz_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn read_grid(path: &str) -> Result<GridFunction> {
    let f = File::open(path).with_context(|| format!("opening {path}"))?;
    GridFunction::read_csv(f).with_context(|| format!("parsing {path}"))
}

/// `constant:c`, `power:a`, `two-valued:k`, `log-lipschitz:amplitude:seed`,
/// `spike:position:eps`, or a grid CSV.
pub fn weight(spec: &str, domain: &TorusDomain) -> Result<Weight> {
    if Path::new(spec).is_file() {
        let g = read_grid(spec)?;
        if g.domain() != domain {
            bail!("weight file {spec} lives on {:?}, expected {domain:?}", g.domain());
        }
        return Ok(Weight::from_grid(&g)?);
    }
    let parts: Vec<&str> = spec.split(':').collect();
    let arg = |i: usize| -> Result<f64> {
        parts
            .get(i)
            .ok_or_else(|| anyhow!("weight preset '{spec}' is missing a field"))
            .and_then(|s| crate::params::parse_f64(s))
    };
    let w = match (parts[0], parts.len()) {
        ("constant", 2) => Weight::constant(*domain, arg(1)?)?,
        ("power", 2) => Weight::power(*domain, arg(1)?)?,
        ("two-valued", 2) => Weight::two_valued(*domain, arg(1)?)?,
        ("log-lipschitz", 3) => Weight::random_log_lipschitz(*domain, arg(2)? as u64, arg(1)?)?,
        ("spike", 3) => Weight::spike(*domain, arg(1)? as usize, arg(2)?)?,
        _ => bail!(
            "unknown weight '{spec}' (expected constant:c, power:a, two-valued:k, log-lipschitz:amp:seed, \
             spike:pos:eps or a file)"
        ),
    };
    Ok(w)
}

/// Real uniform values in `[-1, 1)` on `range`, zero elsewhere.
pub fn random_real(d: TorusDomain, rng: &mut ChaCha8Rng, range: std::ops::Range<usize>) -> Result<GridFunction> {
    let mut v = vec![0.0; d.len()];
    for x in &mut v[range] {
        *x = rng.random_range(-1.0..1.0);
    }
    Ok(GridFunction::from_real(d, &v)?)
}

pub fn random_complex(d: TorusDomain, seed: u64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(GridFunction::new(
        d,
        (0..d.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    )?)
}
