//! Time-discretised classical paths: leapfrog chains on n steps.
//!
//! The discrete map is a finite composition of meromorphic functions, so its
//! landscapes have poles but no branch cuts.

use crate::error::{Error, Result};
use crate::landscape::{GridSpec, LandscapeGrid};
use crate::model::{Mode, PhysicalSystem};
use num_complex::Complex64;

type C64 = Complex64;

/// Magnitude beyond which a chain is reported as overflowing.
pub const OVERFLOW_LIMIT: f64 = 1e300;

/// Positions y_0..y_n of a discrete path.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChain {
    pub vbar0: C64,
    pub points: Vec<C64>,
}

impl DiscreteChain {
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn terminal(&self) -> C64 {
        *self.points.last().expect("chain is never empty")
    }

    /// Largest step over the median step. Near 1 for a smooth path.
    pub fn jump_metric(&self) -> f64 {
        let mut d: Vec<f64> = self
            .points
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .collect();
        let max = d.iter().copied().fold(0.0, f64::max);
        d.sort_by(f64::total_cmp);
        let med = d[d.len() / 2];
        if med == 0.0 {
            if max == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            max / med
        }
    }
}

fn total_time(sys: &PhysicalSystem) -> Result<f64> {
    match sys.mode {
        Mode::FixedTime { time } => Ok(time),
        Mode::FixedEnergy { .. } => Err(Error::InvalidInput(
            "discrete chains need a fixed total time".into(),
        )),
    }
}

fn check_steps(n: usize) -> Result<()> {
    if !(1..=1_000_000).contains(&n) {
        return Err(Error::InvalidInput(format!("step count {n} out of range")));
    }
    Ok(())
}

/// Run the leapfrog recursion
/// y_{j+1} = 2 y_j - y_{j-1} - (eps T)^2 / m V'(y_j), with y_1 = x0 + eps vbar0.
pub fn discrete_evolve(sys: &PhysicalSystem, n: usize, vbar0: C64) -> Result<DiscreteChain> {
    Ok(evolve_with_derivative(sys, n, vbar0)?.0)
}

/// The chain and d y_n / d vbar0 by forward-mode differentiation.
pub fn evolve_with_derivative(
    sys: &PhysicalSystem,
    n: usize,
    vbar0: C64,
) -> Result<(DiscreteChain, C64)> {
    check_steps(n)?;
    let t = total_time(sys)?;
    let eps = 1.0 / n as f64;
    let k = (eps * t).powi(2) / sys.mass;
    let pot = &sys.potential;
    let mut points = Vec::with_capacity(n + 1);
    let x0 = C64::new(sys.x0, 0.0);
    points.push(x0);
    points.push(x0 + eps * vbar0);
    let (mut dz_prev, mut dz) = (C64::new(0.0, 0.0), C64::new(eps, 0.0));
    for j in 1..n {
        let y = points[j];
        let next = 2.0 * y - points[j - 1] - k * pot.deriv(y)?;
        let dnext = 2.0 * dz - dz_prev - k * pot.second_deriv(y)? * dz;
        if !(next.norm() < OVERFLOW_LIMIT) || !(dnext.norm() < OVERFLOW_LIMIT) {
            return Err(Error::Overflow(j + 1));
        }
        points.push(next);
        dz_prev = dz;
        dz = dnext;
    }
    Ok((DiscreteChain { vbar0, points }, dz))
}

/// Discrete action eps T sum_j [ m/2 ((y_{j+1}-y_j)/(eps T))^2 - V(y_j) ].
pub fn discrete_action(sys: &PhysicalSystem, chain: &DiscreteChain) -> Result<C64> {
    let t = total_time(sys)?;
    let dt = t / chain.steps() as f64;
    let mut s = C64::new(0.0, 0.0);
    for w in chain.points.windows(2) {
        let v = (w[1] - w[0]) / dt;
        s += dt * (0.5 * sys.mass * v * v - sys.potential.eval(w[0])?);
    }
    Ok(s)
}

/// Newton solve of y_n(vbar0) = x1.
pub fn discrete_newton(
    sys: &PhysicalSystem,
    n: usize,
    x1: C64,
    guess: C64,
    tol: f64,
    max_iter: usize,
) -> Result<DiscreteChain> {
    let mut v = guess;
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let (chain, d) = evolve_with_derivative(sys, n, v)?;
        let r = chain.terminal() - x1;
        last = r.norm();
        if last <= tol * (1.0 + x1.norm()) {
            return Ok(chain);
        }
        if d.norm() < 1e-300 {
            return Err(Error::JacobianSingular(d.norm()));
        }
        let mut step = r / d;
        // damp until the residual drops
        let mut accepted = false;
        for _ in 0..30 {
            if let Ok((trial, _)) = evolve_with_derivative(sys, n, v - step) {
                if (trial.terminal() - x1).norm() < last {
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        v -= step;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: last,
    })
}

/// Follow the discrete saddle along a schedule of endpoints by continuation.
pub fn discrete_track(
    sys: &PhysicalSystem,
    n: usize,
    start: C64,
    schedule: &[f64],
) -> Result<Vec<DiscreteChain>> {
    let mut out: Vec<DiscreteChain> = Vec::with_capacity(schedule.len());
    let mut guess = start;
    let mut x_prev: Option<f64> = None;
    for &x1 in schedule {
        let chain = match x_prev {
            None => discrete_newton(sys, n, C64::new(x1, 0.0), guess, 1e-12, 60)?,
            Some(xp) => {
                // halve the step until Newton converges from the previous root
                let mut done = xp;
                let mut h = x1 - xp;
                let mut chain = None;
                let mut halvings = 0;
                while (x1 - done).abs() > 1e-15 {
                    let target = if (x1 - done).abs() <= h.abs() {
                        x1
                    } else {
                        done + h
                    };
                    match discrete_newton(sys, n, C64::new(target, 0.0), guess, 1e-12, 60) {
                        Ok(c) if (c.vbar0 - guess).norm() <= 0.5 * (1.0 + guess.norm()) => {
                            guess = c.vbar0;
                            done = target;
                            chain = Some(c);
                        }
                        _ => {
                            halvings += 1;
                            if halvings > 30 {
                                return Err(Error::TrackStalled {
                                    x1: done,
                                    reason: "discrete continuation".into(),
                                });
                            }
                            h *= 0.5;
                        }
                    }
                }
                chain.ok_or(Error::NoConvergence {
                    iterations: 0,
                    residual: f64::NAN,
                })?
            }
        };
        guess = chain.vbar0;
        x_prev = Some(x1);
        out.push(chain);
    }
    Ok(out)
}

/// Terminal position y_n over a grid of vbar0 values.
pub fn discrete_landscape(
    sys: &PhysicalSystem,
    n: usize,
    spec: &GridSpec,
) -> Result<LandscapeGrid> {
    check_steps(n)?;
    total_time(sys)?;
    LandscapeGrid::build(*spec, |v| discrete_evolve(sys, n, v).map(|c| c.terminal()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::loop_monodromy;
    use crate::model::PotentialSpec;
    use proptest::prelude::*;

    fn rm() -> PhysicalSystem {
        PhysicalSystem::new(
            1.0,
            1.0,
            PotentialSpec::rosen_morse(1.0),
            Mode::FixedTime { time: 10.0 },
            -5.0,
        )
        .unwrap()
    }

    #[test]
    fn free_chain_is_straight() {
        let sys = PhysicalSystem::new(
            1.0,
            1.0,
            PotentialSpec::free(),
            Mode::FixedTime { time: 2.0 },
            1.0,
        )
        .unwrap();
        let c = discrete_evolve(&sys, 8, C64::new(3.0, 1.0)).unwrap();
        assert!((c.terminal() - C64::new(4.0, 1.0)).norm() < 1e-13);
        assert!((c.jump_metric() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_energy_is_rejected() {
        let sys = PhysicalSystem::new(
            1.0,
            1.0,
            PotentialSpec::rosen_morse(1.0),
            Mode::FixedEnergy { energy: 0.9 },
            -5.0,
        )
        .unwrap();
        assert!(discrete_evolve(&sys, 4, C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn newton_hits_target() {
        let sys = rm();
        let c =
            discrete_newton(&sys, 16, C64::new(-3.0, 0.0), C64::new(0.2, 0.0), 1e-12, 60).unwrap();
        assert!((c.terminal() - C64::new(-3.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn monodromy_vanishes() {
        let sys = rm();
        for (c, r) in [(C64::new(0.5, 0.5), 0.3), (C64::new(1.0, -0.4), 0.2)] {
            let m = loop_monodromy(
                |v| evolve_with_derivative(&sys, 3, v).map(|x| x.1),
                c,
                r,
                512,
            )
            .unwrap();
            assert!(m.norm() < 1e-9, "{m}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn derivative_matches_difference(re in -0.5..1.5f64, im in -0.5..0.5f64, n in 2usize..8) {
            let sys = rm();
            let v = C64::new(re, im);
            let (_, d) = evolve_with_derivative(&sys, n, v).unwrap();
            let h = 1e-6;
            let fd = (discrete_evolve(&sys, n, v + h).unwrap().terminal() - discrete_evolve(&sys, n, v - h).unwrap().terminal()) / (2.0 * h);
            prop_assert!((d - fd).norm() <= 1e-5 * (1.0 + d.norm()));
        }

        #[test]
        fn free_action_is_exact(v in -3.0..3.0f64, n in 1usize..20) {
            let sys = PhysicalSystem::new(2.0, 1.0, PotentialSpec::free(), Mode::FixedTime { time: 1.5 }, 0.0).unwrap();
            let c = discrete_evolve(&sys, n, C64::new(v, 0.0)).unwrap();
            let s = discrete_action(&sys, &c).unwrap();
            // the velocity is vbar0 / T; action is m v^2 T / 2
            let vel = v / 1.5;
            prop_assert!((s.re - 0.5 * 2.0 * vel * vel * 1.5).abs() < 1e-12);
        }
    }
}
