//! Synthetic flight generation: open-loop hover commands modulated by a few
//! low-frequency sinusoids per motor. The quadrotor is unstable in open
//! loop, so modulation depths are small and candidate flights that drift out
//! of a safe envelope are rejected and redrawn.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, Trajectory};
use crate::physics::{physics_rollout_full, PhysicsParams};
use crate::quadstate::{ControlInput, QuadState};

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub params: PhysicsParams,
    /// Samples per trajectory.
    pub samples: usize,
    /// Sample interval, seconds.
    pub dt: f64,
    /// Sinusoids per motor.
    pub tones: usize,
    /// Modulation depth of each sinusoid as a fraction of the hover command.
    pub amplitude_range: (f64, f64),
    /// Sinusoid frequency band, Hz.
    pub frequency_range: (f64, f64),
    /// Reject a candidate when any position component leaves this bound (m).
    pub position_limit: f64,
    /// Reject a candidate when any Euler angle leaves this bound (rad).
    pub angle_limit: f64,
    /// Redraws allowed per trajectory before giving up.
    pub max_retries: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            params: PhysicsParams::default_desk_scale(),
            samples: 300,
            dt: 0.01,
            tones: 3,
            amplitude_range: (0.0005, 0.002),
            frequency_range: (0.2, 2.0),
            position_limit: 5.0,
            angle_limit: 1.0,
            max_retries: 20,
        }
    }
}

fn draw_candidate(opts: &SynthOptions, rng: &mut ChaCha8Rng) -> Option<Trajectory> {
    let hover = opts.params.hover_command();
    // Per-motor sinusoid banks.
    let mut amps = vec![0.0; 4 * opts.tones];
    let mut freqs = vec![0.0; 4 * opts.tones];
    let mut phases = vec![0.0; 4 * opts.tones];
    for i in 0..4 * opts.tones {
        amps[i] = rng.gen_range(opts.amplitude_range.0..=opts.amplitude_range.1);
        freqs[i] = rng.gen_range(opts.frequency_range.0..=opts.frequency_range.1);
        phases[i] = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    }
    let controls: Vec<ControlInput> = (0..opts.samples)
        .map(|k| {
            let t = k as f64 * opts.dt;
            let mut u = [0.0; 4];
            for (m, slot) in u.iter_mut().enumerate() {
                let mut mod_sum = 0.0;
                for j in 0..opts.tones {
                    let i = m * opts.tones + j;
                    mod_sum += amps[i]
                        * (2.0 * std::f64::consts::PI * freqs[i] * t + phases[i]).sin();
                }
                *slot = hover * (1.0 + mod_sum);
            }
            ControlInput(u)
        })
        .collect();

    // Small initial perturbation so flights do not all start from the exact
    // same equilibrium.
    let mut x0 = [0.0; 12];
    for slot in x0.iter_mut().take(3) {
        *slot = rng.gen_range(-0.01..=0.01); // tilt, rad
    }
    for slot in x0.iter_mut().take(6).skip(3) {
        *slot = rng.gen_range(-0.1..=0.1); // position, m
    }
    for slot in x0.iter_mut().take(12).skip(6) {
        *slot = rng.gen_range(-0.01..=0.01); // rates and velocities
    }
    let x0 = QuadState::from_array(x0);

    let rest = match physics_rollout_full(&x0, &controls[..opts.samples - 1], opts.dt, &opts.params)
    {
        Ok(states) => states,
        Err(_) => return None, // gimbal lock counts as a rejected draw
    };
    let mut states = Vec::with_capacity(opts.samples);
    states.push(x0);
    states.extend(rest);
    for s in &states {
        if s.r.amax() > opts.position_limit || s.eta.amax() > opts.angle_limit || !s.is_finite() {
            return None;
        }
    }
    Some(Trajectory {
        t: (0..opts.samples).map(|k| k as f64 * opts.dt).collect(),
        states,
        controls,
    })
}

/// Generates `count` synthetic flights. Deterministic in `seed`.
pub fn synth_trajectories(
    count: usize,
    opts: &SynthOptions,
    seed: u64,
) -> Result<Vec<Trajectory>, DataError> {
    if opts.samples < 2 {
        return Err(DataError::Invalid(format!(
            "trajectory needs at least 2 samples, got {}",
            opts.samples
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for traj_index in 0..count {
        let mut accepted = None;
        for _ in 0..=opts.max_retries {
            if let Some(traj) = draw_candidate(opts, &mut rng) {
                accepted = Some(traj);
                break;
            }
        }
        match accepted {
            Some(traj) => out.push(traj),
            None => {
                return Err(DataError::Invalid(format!(
                    "trajectory {traj_index}: exceeded {} retries; \
                     excitation likely too aggressive for open-loop flight",
                    opts.max_retries
                )))
            }
        }
    }
    Ok(out)
}
