//! Spectator device classes and the weighted class sampler.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::DeviceClassName;
use crate::error::Error;
use crate::profiles::ProfileSpec;
use crate::scalar::Scalar;

/// A spectator hardware/connection class: its typical bandwidth and the
/// maximum frame rate it can decode for each profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DeviceClass<S: Scalar> {
    pub name: DeviceClassName,
    /// Typical inbound bandwidth in KB/s.
    pub base_bandwidth: S,
    /// Profile name -> maximum decodable frames per second.
    pub decode_cap: BTreeMap<String, S>,
}

impl<S: Scalar> DeviceClass<S> {
    /// Decode caps aligned to a profile list, for index-based lookups.
    pub fn decode_caps_for(&self, profiles: &[ProfileSpec<S>]) -> Result<Vec<S>, Error> {
        profiles
            .iter()
            .map(|p| {
                self.decode_cap.get(&p.name).copied().ok_or_else(|| {
                    Error::config(format!(
                        "device class {} has no decode capacity for profile {}",
                        self.name.as_str(),
                        p.name
                    ))
                })
            })
            .collect()
    }

    pub fn validate(&self, profiles: &[ProfileSpec<S>], production_fps: S) -> Result<(), Error> {
        if self.base_bandwidth <= S::zero() {
            return Err(Error::config(format!(
                "device class {}: base_bandwidth must be positive",
                self.name.as_str()
            )));
        }
        let two = S::from_f64_c(2.0);
        for cap in self.decode_caps_for(profiles)? {
            if cap <= S::zero() || cap > production_fps * two {
                return Err(Error::config(format!(
                    "device class {}: decode capacities must lie in (0, 2x production fps]",
                    self.name.as_str()
                )));
            }
        }
        Ok(())
    }
}

fn device_class<S: Scalar>(
    name: DeviceClassName,
    base_bandwidth: f64,
    profiles: &[ProfileSpec<S>],
    production_cap: f64,
    other_cap: f64,
) -> DeviceClass<S> {
    let mut decode_cap = BTreeMap::new();
    for p in profiles {
        let cap = if p.is_production() { production_cap } else { other_cap };
        decode_cap.insert(p.name.clone(), S::from_f64_c(cap));
    }
    DeviceClass {
        name,
        base_bandwidth: S::from_f64_c(base_bandwidth),
        decode_cap,
    }
}

/// The built-in class table. Mobile devices decode the large production
/// frames at no more than 15 fps; PCs decode everything at the full
/// production rate. Bandwidths are chosen so the production pair fits only
/// fiber connections, video pairs fit the mid classes and image profiles
/// remain the universal fallback.
pub fn build_default_classes<S: Scalar>(profiles: &[ProfileSpec<S>]) -> Vec<DeviceClass<S>> {
    vec![
        device_class(DeviceClassName::MobileWifi, 5000.0, profiles, 15.0, 25.0),
        device_class(DeviceClassName::Mobile4g, 3000.0, profiles, 15.0, 25.0),
        device_class(DeviceClassName::PcDsl, 4000.0, profiles, 25.0, 25.0),
        device_class(DeviceClassName::PcVdsl, 8000.0, profiles, 25.0, 25.0),
        device_class(DeviceClassName::PcFiber, 12000.0, profiles, 25.0, 25.0),
    ]
}

/// Weighted sampler over device classes.
#[derive(Debug, Clone)]
pub struct Population<S: Scalar> {
    classes: Vec<DeviceClass<S>>,
    cumulative: Vec<f64>,
}

impl<S: Scalar> Population<S> {
    /// Build a sampler drawing classes with probability proportional to
    /// `weights`. Classes with zero weight are never drawn.
    pub fn new(
        classes: Vec<DeviceClass<S>>,
        weights: &BTreeMap<DeviceClassName, S>,
    ) -> Result<Self, Error> {
        let mut cumulative = Vec::with_capacity(classes.len());
        let mut total = 0.0f64;
        for class in &classes {
            let w = weights.get(&class.name).copied().unwrap_or_else(S::zero);
            let w = w.as_f64();
            if w < 0.0 {
                return Err(Error::config("population weights must be nonnegative"));
            }
            total += w;
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Err(Error::config("population weights must sum to a positive value"));
        }
        Ok(Population { classes, cumulative })
    }

    pub fn classes(&self) -> &[DeviceClass<S>] {
        &self.classes
    }

    pub fn class(&self, name: DeviceClassName) -> Option<&DeviceClass<S>> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Draw one device class; deterministic given the stream state.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> &DeviceClass<S> {
        let total = *self.cumulative.last().expect("population is never empty");
        let u: f64 = rng.random::<f64>() * total;
        let idx = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.classes.len() - 1);
        &self.classes[idx]
    }
}

/// Sampler over the built-in class table.
pub fn build_population<S: Scalar>(
    profiles: &[ProfileSpec<S>],
    weights: &BTreeMap<DeviceClassName, S>,
) -> Result<Population<S>, Error> {
    Population::new(build_default_classes(profiles), weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::build_default_profiles;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn weights(values: [f64; 5]) -> BTreeMap<DeviceClassName, f64> {
        DeviceClassName::ALL.iter().copied().zip(values).collect()
    }

    fn frequencies(pop: &Population<f64>, draws: usize) -> BTreeMap<DeviceClassName, f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts: BTreeMap<DeviceClassName, usize> = BTreeMap::new();
        for _ in 0..draws {
            *counts.entry(pop.sample(&mut rng).name).or_default() += 1;
        }
        counts
            .into_iter()
            .map(|(k, v)| (k, v as f64 / draws as f64))
            .collect()
    }

    #[test]
    fn default_classes_satisfy_invariants() {
        let profiles = build_default_profiles::<f64>();
        for class in build_default_classes(&profiles) {
            class.validate(&profiles, 25.0).unwrap();
        }
    }

    #[test]
    fn uniform_weights_give_balanced_frequencies() {
        let profiles = build_default_profiles::<f64>();
        let pop = build_population(&profiles, &weights([1.0; 5])).unwrap();
        let freq = frequencies(&pop, 10_000);
        // 3 sigma for a binomial proportion p=0.2 over 10k draws
        let tol = 3.0 * (0.2f64 * 0.8 / 10_000.0).sqrt();
        for class in DeviceClassName::ALL {
            assert!((freq[&class] - 0.2).abs() < tol, "{class:?}: {}", freq[&class]);
        }
    }

    #[test]
    fn degenerate_weights_always_draw_that_class() {
        let profiles = build_default_profiles::<f64>();
        let pop = build_population(&profiles, &weights([1.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(pop.sample(&mut rng).name, DeviceClassName::MobileWifi);
        }
    }

    #[test]
    fn skewed_weights_match_multinomial_probability() {
        let profiles = build_default_profiles::<f64>();
        let pop = build_population(&profiles, &weights([2.0, 1.0, 1.0, 1.0, 1.0])).unwrap();
        let freq = frequencies(&pop, 10_000);
        let expected = 2.0 / 6.0;
        let tol = 3.0 * (expected * (1.0 - expected) / 10_000.0f64).sqrt();
        assert!((freq[&DeviceClassName::MobileWifi] - expected).abs() < tol);
    }

    #[test]
    fn all_zero_weights_are_a_configuration_error() {
        let profiles = build_default_profiles::<f64>();
        assert!(build_population(&profiles, &weights([0.0; 5])).is_err());
    }

    #[test]
    fn sampling_is_deterministic_for_a_seed() {
        let profiles = build_default_profiles::<f64>();
        let pop = build_population(&profiles, &weights([1.0; 5])).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(pop.sample(&mut a).name, pop.sample(&mut b).name);
        }
    }
}
