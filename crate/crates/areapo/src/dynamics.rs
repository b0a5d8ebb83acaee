//! Rigid-body dynamics of the two-link underactuated pendulum.
//!
//! Joint convention: `q1` is the shoulder angle measured from the
//! hanging-down position (upright is `q1 = π`), `q2` is the elbow angle of
//! link 2 relative to link 1 (upright is `q2 = 0`). Angles accumulate
//! (unwrapped); wrapping happens only in observation scaling and in the
//! reward's distance term.
//!
//! The plant follows the standard two-link manipulator form
//! `M(q)·q̈ + h(q, q̇) + G(q) + F(q̇) = τ` with viscous plus
//! tanh-smoothed Coulomb friction and a reflected rotor inertia added on
//! each joint's diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Velocity scale (rad/s) of the tanh Coulomb-friction smoothing. Keeps the
/// right-hand side smooth enough for RK4 at millisecond substeps.
const COULOMB_VEL_SCALE: f64 = 0.05;

/// Physical constants of the two-link plant.
///
/// These are inputs loaded from config; the shipped defaults describe a
/// plausible desk-scale build (two uniform 0.6 kg, 0.3 m links) and are
/// placeholders to be aligned with a specific robot when one exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub mass_1: f64,
    pub mass_2: f64,
    pub length_1: f64,
    pub length_2: f64,
    /// Center-of-mass distance of link 1 from the shoulder axis (m).
    pub com_1: f64,
    /// Center-of-mass distance of link 2 from the elbow axis (m).
    pub com_2: f64,
    /// Moment of inertia of link 1 about its own center of mass (kg·m²).
    pub inertia_1: f64,
    pub inertia_2: f64,
    pub gravity: f64,
    /// Viscous damping per joint (N·m·s/rad).
    pub damping_1: f64,
    pub damping_2: f64,
    /// Coulomb friction magnitude per joint (N·m), tanh-smoothed.
    pub coulomb_1: f64,
    pub coulomb_2: f64,
    /// Actuator torque limit (N·m), shared by both drives.
    pub torque_limit: f64,
    /// Reflected rotor inertia added on each joint's diagonal (kg·m²).
    pub motor_inertia: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            mass_1: 0.6,
            mass_2: 0.6,
            length_1: 0.3,
            length_2: 0.3,
            com_1: 0.15,
            com_2: 0.15,
            inertia_1: 0.0045,
            inertia_2: 0.0045,
            gravity: 9.81,
            damping_1: 0.005,
            damping_2: 0.005,
            coulomb_1: 0.0,
            coulomb_2: 0.0,
            torque_limit: 6.0,
            motor_inertia: 1e-4,
        }
    }
}

impl ModelParams {
    /// Checks the physical invariants: masses, lengths, inertias and the
    /// torque limit strictly positive; friction terms non-negative.
    pub fn validate(&self) -> Result<()> {
        let strictly_positive = [
            ("mass_1", self.mass_1),
            ("mass_2", self.mass_2),
            ("length_1", self.length_1),
            ("length_2", self.length_2),
            ("com_1", self.com_1),
            ("com_2", self.com_2),
            ("inertia_1", self.inertia_1),
            ("inertia_2", self.inertia_2),
            ("torque_limit", self.torque_limit),
        ];
        for (name, v) in strictly_positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "model parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        let non_negative = [
            ("damping_1", self.damping_1),
            ("damping_2", self.damping_2),
            ("coulomb_1", self.coulomb_1),
            ("coulomb_2", self.coulomb_2),
            ("motor_inertia", self.motor_inertia),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "model parameter {name} must be non-negative, got {v}"
                )));
            }
        }
        if !self.gravity.is_finite() {
            return Err(Error::InvalidInput("gravity must be finite".into()));
        }
        Ok(())
    }

    /// Returns a copy with the named parameter multiplied by `factor`.
    /// Used by the robustness sweep's model-mismatch category.
    pub fn scaled(&self, name: &str, factor: f64) -> Result<ModelParams> {
        let mut p = *self;
        let slot = match name {
            "mass_1" => &mut p.mass_1,
            "mass_2" => &mut p.mass_2,
            "length_1" => &mut p.length_1,
            "length_2" => &mut p.length_2,
            "com_1" => &mut p.com_1,
            "com_2" => &mut p.com_2,
            "inertia_1" => &mut p.inertia_1,
            "inertia_2" => &mut p.inertia_2,
            "gravity" => &mut p.gravity,
            "damping_1" => &mut p.damping_1,
            "damping_2" => &mut p.damping_2,
            "coulomb_1" => &mut p.coulomb_1,
            "coulomb_2" => &mut p.coulomb_2,
            "motor_inertia" => &mut p.motor_inertia,
            other => {
                return Err(Error::Config(format!("unknown model parameter '{other}'")));
            }
        };
        *slot *= factor;
        p.validate()?;
        Ok(p)
    }
}

/// Instantaneous state of the two-link system plus the simulation clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumState {
    pub q1: f64,
    pub q2: f64,
    pub qd1: f64,
    pub qd2: f64,
    /// Simulation time (s).
    pub t: f64,
}

impl PendulumState {
    pub fn new(q1: f64, q2: f64, qd1: f64, qd2: f64) -> Self {
        Self { q1, q2, qd1, qd2, t: 0.0 }
    }

    /// Hanging rest state at t = 0.
    pub fn hanging() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.q1.is_finite()
            && self.q2.is_finite()
            && self.qd1.is_finite()
            && self.qd2.is_finite()
            && self.t.is_finite()
    }

    /// `[q1, q2, qd1, qd2]` without the clock.
    pub fn as_vec4(&self) -> [f64; 4] {
        [self.q1, self.q2, self.qd1, self.qd2]
    }
}

/// Which joint the agent drives: the acrobot's shoulder is passive, the
/// pendubot's elbow is passive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActuationMode {
    Acrobot,
    Pendubot,
}

impl ActuationMode {
    /// Index (0 = shoulder, 1 = elbow) of the driven joint.
    pub fn active_joint(self) -> usize {
        match self {
            ActuationMode::Acrobot => 1,
            ActuationMode::Pendubot => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActuationMode::Acrobot => "acrobot",
            ActuationMode::Pendubot => "pendubot",
        }
    }
}

impl std::str::FromStr for ActuationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "acrobot" => Ok(ActuationMode::Acrobot),
            "pendubot" => Ok(ActuationMode::Pendubot),
            other => Err(Error::Config(format!(
                "unknown task '{other}' (expected acrobot or pendubot)"
            ))),
        }
    }
}

/// Clamps the scalar motor command to `[-limit, limit]` and places it at the
/// mode's active joint; the passive joint receives exactly zero.
pub fn apply_actuation(mode: ActuationMode, command: f64, limit: f64) -> [f64; 2] {
    let tau = command.clamp(-limit, limit);
    match mode {
        ActuationMode::Acrobot => [0.0, tau],
        ActuationMode::Pendubot => [tau, 0.0],
    }
}

/// Mass matrix M(q). Symmetric positive definite for valid parameters.
pub fn mass_matrix(q2: f64, p: &ModelParams) -> [[f64; 2]; 2] {
    let c2 = q2.cos();
    let sigma = p.inertia_2 + p.mass_2 * p.com_2 * p.com_2;
    let mu = p.mass_2 * p.length_1 * p.com_2;
    let m11 = p.inertia_1
        + p.mass_1 * p.com_1 * p.com_1
        + p.mass_2 * p.length_1 * p.length_1
        + sigma
        + 2.0 * mu * c2
        + p.motor_inertia;
    let m12 = sigma + mu * c2;
    let m22 = sigma + p.motor_inertia;
    [[m11, m12], [m12, m22]]
}

/// Coriolis/centrifugal vector h(q, q̇).
fn coriolis(q2: f64, qd1: f64, qd2: f64, p: &ModelParams) -> [f64; 2] {
    let s2 = q2.sin();
    let mu = p.mass_2 * p.length_1 * p.com_2;
    [
        -mu * s2 * (2.0 * qd1 * qd2 + qd2 * qd2),
        mu * s2 * qd1 * qd1,
    ]
}

/// Gravity vector G(q) with potential zero at hanging rest.
fn gravity_torque(q1: f64, q2: f64, p: &ModelParams) -> [f64; 2] {
    let g = p.gravity;
    let s1 = q1.sin();
    let s12 = (q1 + q2).sin();
    [
        (p.mass_1 * p.com_1 + p.mass_2 * p.length_1) * g * s1 + p.mass_2 * p.com_2 * g * s12,
        p.mass_2 * p.com_2 * g * s12,
    ]
}

/// Joint friction: viscous damping plus tanh-smoothed Coulomb term.
fn friction(qd1: f64, qd2: f64, p: &ModelParams) -> [f64; 2] {
    [
        p.damping_1 * qd1 + p.coulomb_1 * (qd1 / COULOMB_VEL_SCALE).tanh(),
        p.damping_2 * qd2 + p.coulomb_2 * (qd2 / COULOMB_VEL_SCALE).tanh(),
    ]
}

/// Joint accelerations from the manipulator equation,
/// `q̈ = M(q)⁻¹ (τ − h(q, q̇) − G(q) − F(q̇))`.
pub fn forward_dynamics(
    state: &PendulumState,
    torques: [f64; 2],
    p: &ModelParams,
) -> Result<[f64; 2]> {
    if !state.is_finite() {
        return Err(Error::InvalidInput("non-finite pendulum state".into()));
    }
    if !(torques[0].is_finite() && torques[1].is_finite()) {
        return Err(Error::InvalidInput("non-finite joint torque".into()));
    }
    let m = mass_matrix(state.q2, p);
    let h = coriolis(state.q2, state.qd1, state.qd2, p);
    let g = gravity_torque(state.q1, state.q2, p);
    let f = friction(state.qd1, state.qd2, p);
    let rhs = [
        torques[0] - h[0] - g[0] - f[0],
        torques[1] - h[1] - g[1] - f[1],
    ];
    // 2x2 solve; M is SPD so the determinant is strictly positive.
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-12 {
        return Err(Error::Numerical(format!("singular mass matrix, det = {det}")));
    }
    Ok([
        (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
        (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
    ])
}

/// One classic RK4 step of size `dt` under zero-order-hold torque.
pub fn step_rk4(
    state: &PendulumState,
    torques: [f64; 2],
    dt: f64,
    p: &ModelParams,
) -> Result<PendulumState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let deriv = |s: &PendulumState| -> Result<[f64; 4]> {
        let acc = forward_dynamics(s, torques, p)?;
        Ok([s.qd1, s.qd2, acc[0], acc[1]])
    };
    let advance = |s: &PendulumState, k: &[f64; 4], h: f64| PendulumState {
        q1: s.q1 + h * k[0],
        q2: s.q2 + h * k[1],
        qd1: s.qd1 + h * k[2],
        qd2: s.qd2 + h * k[3],
        t: s.t,
    };
    let k1 = deriv(state)?;
    let k2 = deriv(&advance(state, &k1, dt / 2.0))?;
    let k3 = deriv(&advance(state, &k2, dt / 2.0))?;
    let k4 = deriv(&advance(state, &k3, dt))?;
    Ok(PendulumState {
        q1: state.q1 + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        q2: state.q2 + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        qd1: state.qd1 + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        qd2: state.qd2 + dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
        t: state.t + dt,
    })
}

/// Integrates one control interval of length `dt` as `substeps` RK4 steps
/// under zero-order-hold torque.
pub fn step_zoh(
    state: &PendulumState,
    torques: [f64; 2],
    dt: f64,
    substeps: usize,
    p: &ModelParams,
) -> Result<PendulumState> {
    if substeps == 0 {
        return Err(Error::InvalidInput("substeps must be >= 1".into()));
    }
    let h = dt / substeps as f64;
    let mut s = *state;
    for _ in 0..substeps {
        s = step_rk4(&s, torques, h, p)?;
    }
    // Land exactly on the control grid regardless of substep rounding.
    s.t = state.t + dt;
    Ok(s)
}

/// Kinetic energy, including the reflected rotor term.
pub fn kinetic_energy(state: &PendulumState, p: &ModelParams) -> f64 {
    let m = mass_matrix(state.q2, p);
    let qd = [state.qd1, state.qd2];
    0.5 * (m[0][0] * qd[0] * qd[0] + 2.0 * m[0][1] * qd[0] * qd[1] + m[1][1] * qd[1] * qd[1])
}

/// Potential energy, zero at hanging rest.
pub fn potential_energy(state: &PendulumState, p: &ModelParams) -> f64 {
    let g = p.gravity;
    p.mass_1 * g * p.com_1 * (1.0 - state.q1.cos())
        + p.mass_2
            * g
            * (p.length_1 * (1.0 - state.q1.cos()) + p.com_2 * (1.0 - (state.q1 + state.q2).cos()))
}

/// Total mechanical energy T + V.
pub fn total_energy(state: &PendulumState, p: &ModelParams) -> f64 {
    kinetic_energy(state, p) + potential_energy(state, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn frictionless() -> ModelParams {
        ModelParams {
            damping_1: 0.0,
            damping_2: 0.0,
            coulomb_1: 0.0,
            coulomb_2: 0.0,
            motor_inertia: 0.0,
            ..ModelParams::default()
        }
    }

    // Independent oracle: evaluates the equations of motion numerically from
    // the Lagrangian L(q, q̇) = T − V, where T and V are computed straight
    // from link kinematics (never from the closed-form mass matrix).
    mod lagrangian_oracle {
        use super::*;

        fn kinetic(q: [f64; 2], qd: [f64; 2], p: &ModelParams) -> f64 {
            // COM velocities from differentiated positions.
            let v1x = p.com_1 * q[0].cos() * qd[0];
            let v1y = p.com_1 * q[0].sin() * qd[0];
            let w12 = qd[0] + qd[1];
            let v2x = p.length_1 * q[0].cos() * qd[0] + p.com_2 * (q[0] + q[1]).cos() * w12;
            let v2y = p.length_1 * q[0].sin() * qd[0] + p.com_2 * (q[0] + q[1]).sin() * w12;
            0.5 * p.mass_1 * (v1x * v1x + v1y * v1y)
                + 0.5 * p.mass_2 * (v2x * v2x + v2y * v2y)
                + 0.5 * p.inertia_1 * qd[0] * qd[0]
                + 0.5 * p.inertia_2 * w12 * w12
                + 0.5 * p.motor_inertia * (qd[0] * qd[0] + qd[1] * qd[1])
        }

        fn potential(q: [f64; 2], p: &ModelParams) -> f64 {
            let y1 = -p.com_1 * q[0].cos();
            let y2 = -p.length_1 * q[0].cos() - p.com_2 * (q[0] + q[1]).cos();
            p.mass_1 * p.gravity * y1 + p.mass_2 * p.gravity * y2
        }

        fn lagrangian(q: [f64; 2], qd: [f64; 2], p: &ModelParams) -> f64 {
            kinetic(q, qd, p) - potential(q, p)
        }

        /// q̈ from the Euler–Lagrange equations with every derivative taken
        /// by central finite differences of the scalar Lagrangian. Second
        /// derivatives use direct 3/4-point stencils (nesting two first
        /// differences would amplify rounding noise past the tolerance).
        pub fn accelerations(
            q: [f64; 2],
            qd: [f64; 2],
            torques: [f64; 2],
            p: &ModelParams,
        ) -> [f64; 2] {
            let h = 1e-6; // first derivatives
            let h2 = 1e-3; // second derivatives
            let l = |q: [f64; 2], qd: [f64; 2]| lagrangian(q, qd, p);
            let mut dl_dq = [0.0; 2];
            for i in 0..2 {
                let mut hi = q;
                let mut lo = q;
                hi[i] += h;
                lo[i] -= h;
                dl_dq[i] = (l(hi, qd) - l(lo, qd)) / (2.0 * h);
            }
            // d/dt (∂L/∂q̇) = J_q·q̇ + M·q̈ where M is the Hessian in q̇ and
            // J_q the mixed ∂²L/∂q̇∂q Jacobian.
            let mut mass = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    mass[i][j] = if i == j {
                        let mut hi = qd;
                        let mut lo = qd;
                        hi[i] += h2;
                        lo[i] -= h2;
                        (l(q, hi) - 2.0 * l(q, qd) + l(q, lo)) / (h2 * h2)
                    } else {
                        let mut pp = qd;
                        let mut pm = qd;
                        let mut mp = qd;
                        let mut mm = qd;
                        pp[i] += h2;
                        pp[j] += h2;
                        pm[i] += h2;
                        pm[j] -= h2;
                        mp[i] -= h2;
                        mp[j] += h2;
                        mm[i] -= h2;
                        mm[j] -= h2;
                        (l(q, pp) - l(q, pm) - l(q, mp) + l(q, mm)) / (4.0 * h2 * h2)
                    };
                }
            }
            let mut jq = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let mut qdp = qd;
                    let mut qdm = qd;
                    qdp[i] += h2;
                    qdm[i] -= h2;
                    let mut qp = q;
                    let mut qm = q;
                    qp[j] += h2;
                    qm[j] -= h2;
                    jq[i][j] =
                        (l(qp, qdp) - l(qp, qdm) - l(qm, qdp) + l(qm, qdm)) / (4.0 * h2 * h2);
                }
            }
            let fric = [
                p.damping_1 * qd[0] + p.coulomb_1 * (qd[0] / COULOMB_VEL_SCALE).tanh(),
                p.damping_2 * qd[1] + p.coulomb_2 * (qd[1] / COULOMB_VEL_SCALE).tanh(),
            ];
            let rhs = [
                dl_dq[0] + torques[0] - fric[0] - (jq[0][0] * qd[0] + jq[0][1] * qd[1]),
                dl_dq[1] + torques[1] - fric[1] - (jq[1][0] * qd[0] + jq[1][1] * qd[1]),
            ];
            let det = mass[0][0] * mass[1][1] - mass[0][1] * mass[1][0];
            [
                (mass[1][1] * rhs[0] - mass[0][1] * rhs[1]) / det,
                (mass[0][0] * rhs[1] - mass[1][0] * rhs[0]) / det,
            ]
        }
    }

    #[test]
    fn hanging_rest_is_equilibrium() {
        let p = frictionless();
        let acc = forward_dynamics(&PendulumState::hanging(), [0.0, 0.0], &p).unwrap();
        assert!(acc[0].abs() < 1e-14 && acc[1].abs() < 1e-14, "acc = {acc:?}");
    }

    #[test]
    fn upright_rest_is_equilibrium() {
        let p = frictionless();
        let s = PendulumState::new(PI, 0.0, 0.0, 0.0);
        let acc = forward_dynamics(&s, [0.0, 0.0], &p).unwrap();
        assert!(acc[0].abs() < 1e-12 && acc[1].abs() < 1e-12, "acc = {acc:?}");
    }

    #[test]
    fn matches_finite_difference_lagrangian_oracle() {
        let p = ModelParams {
            coulomb_1: 0.05,
            coulomb_2: 0.08,
            ..ModelParams::default()
        };
        let cases = [
            ([0.7, -1.3], [2.0, -3.5], [1.5, -0.8]),
            ([2.9, 0.4], [-0.6, 1.1], [0.0, 2.0]),
            ([-1.2, 2.2], [4.0, 0.3], [-3.0, 0.5]),
        ];
        for (q, qd, tau) in cases {
            let s = PendulumState::new(q[0], q[1], qd[0], qd[1]);
            let got = forward_dynamics(&s, tau, &p).unwrap();
            let want = lagrangian_oracle::accelerations(q, qd, tau, &p);
            for i in 0..2 {
                let rel = (got[i] - want[i]).abs() / want[i].abs().max(1.0);
                assert!(
                    rel < 1e-5,
                    "joint {i}: got {}, oracle {}, rel err {rel}",
                    got[i],
                    want[i]
                );
            }
        }
    }

    #[test]
    fn rejects_non_finite_input() {
        let p = ModelParams::default();
        let s = PendulumState::new(f64::NAN, 0.0, 0.0, 0.0);
        assert!(matches!(
            forward_dynamics(&s, [0.0, 0.0], &p),
            Err(Error::InvalidInput(_))
        ));
        let s = PendulumState::hanging();
        assert!(matches!(
            forward_dynamics(&s, [f64::INFINITY, 0.0], &p),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn rk4_keeps_equilibrium_and_advances_clock() {
        let p = frictionless();
        let s = step_rk4(&PendulumState::hanging(), [0.0, 0.0], 0.01, &p).unwrap();
        assert!(s.q1.abs() < 1e-15 && s.q2.abs() < 1e-15);
        assert!(s.qd1.abs() < 1e-15 && s.qd2.abs() < 1e-15);
        assert!((s.t - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rk4_substep_refinement_agrees() {
        let p = ModelParams::default();
        let s = PendulumState::new(0.9, -0.4, 1.5, -2.0);
        let tau = [2.0, -1.0];
        let coarse = step_rk4(&s, tau, 0.01, &p).unwrap();
        let fine = step_zoh(&s, tau, 0.01, 10, &p).unwrap();
        let diff = [
            coarse.q1 - fine.q1,
            coarse.q2 - fine.q2,
            coarse.qd1 - fine.qd1,
            coarse.qd2 - fine.qd2,
        ];
        for d in diff {
            assert!(d.abs() < 1e-5, "diff {d}");
        }
    }

    #[test]
    fn unforced_frictionless_swing_conserves_energy() {
        let p = frictionless();
        let mut s = PendulumState::new(0.1, 0.0, 0.0, 0.0);
        let e0 = total_energy(&s, &p);
        let dt = 1e-3;
        for _ in 0..10_000 {
            s = step_rk4(&s, [0.0, 0.0], dt, &p).unwrap();
        }
        let drift = (total_energy(&s, &p) - e0).abs();
        assert!(drift < 1e-3, "energy drift {drift} J over 10 s");
    }

    #[test]
    fn damping_dissipates_energy_monotonically() {
        let p = ModelParams {
            damping_1: 0.05,
            damping_2: 0.05,
            ..frictionless()
        };
        let mut s = PendulumState::new(1.2, 0.5, 0.0, 0.0);
        let mut prev = total_energy(&s, &p);
        for _ in 0..2_000 {
            s = step_rk4(&s, [0.0, 0.0], 1e-3, &p).unwrap();
            let e = total_energy(&s, &p);
            assert!(e <= prev + 1e-6, "energy rose from {prev} to {e}");
            prev = e;
        }
    }

    #[test]
    fn hanging_energy_is_zero_and_upright_matches_analytic_lift() {
        let p = ModelParams::default();
        assert_eq!(total_energy(&PendulumState::hanging(), &p), 0.0);
        let upright = PendulumState::new(PI, 0.0, 0.0, 0.0);
        let want = 2.0 * p.gravity * (p.mass_1 * p.com_1 + p.mass_2 * (p.length_1 + p.com_2));
        let got = total_energy(&upright, &p);
        assert!((got - want).abs() < 1e-12, "potential lift: got {got}, want {want}");
        assert!(got > 0.0);
    }

    #[test]
    fn shoulder_spin_kinetic_energy_matches_effective_inertia() {
        let p = ModelParams::default();
        let s = PendulumState::new(0.0, 0.0, 1.0, 0.0);
        let m = mass_matrix(0.0, &p);
        let got = total_energy(&s, &p);
        assert!((got - 0.5 * m[0][0]).abs() < 1e-14);
    }

    #[test]
    fn actuation_masks_and_clamps() {
        assert_eq!(apply_actuation(ActuationMode::Acrobot, 2.0, 6.0), [0.0, 2.0]);
        assert_eq!(apply_actuation(ActuationMode::Pendubot, -9.0, 6.0), [-6.0, 0.0]);
        assert_eq!(apply_actuation(ActuationMode::Pendubot, 0.0, 6.0), [0.0, 0.0]);
        assert_eq!(apply_actuation(ActuationMode::Acrobot, 100.0, 6.0)[0], 0.0);
    }

    #[test]
    fn params_validation_rejects_bad_values() {
        let p = ModelParams { mass_1: 0.0, ..ModelParams::default() };
        assert!(p.validate().is_err());
        let p = ModelParams { inertia_2: -1.0, ..ModelParams::default() };
        assert!(p.validate().is_err());
        let p = ModelParams { damping_1: -0.1, ..ModelParams::default() };
        assert!(p.validate().is_err());
        assert!(ModelParams::default().validate().is_ok());
    }

    #[test]
    fn scaled_parameter_lookup() {
        let p = ModelParams::default();
        let s = p.scaled("mass_2", 1.25).unwrap();
        assert!((s.mass_2 - p.mass_2 * 1.25).abs() < 1e-15);
        assert!(p.scaled("bogus", 1.0).is_err());
        // Scaling to an invalid value is rejected.
        assert!(p.scaled("mass_1", 0.0).is_err());
    }
}
