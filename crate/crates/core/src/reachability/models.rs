//! Shipped model library and the dynamical-system bundle.
//!
//! Every model exposes one discrete step map `x_{k+1} = step(x_k, u, d, h)`
//! with `u`, `d` held over the step, together with interval enclosures of that
//! map, of its preimage and of the states visited inside the step. Simulation
//! and set propagation share the same map, so Monte Carlo rollouts and
//! computed sets talk about the same trajectories.
//!
//! The three linear models step by their exact zero-order-hold solution. The
//! kinematic bicycle steps by explicit Euler, and its enclosures add the
//! local truncation bound `½h²·sup|ẍ|` so they also cover the continuous flow.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::ReachError;
use crate::interval::{IBox, Interval};

pub trait Flow: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn dim_x(&self) -> usize;
    fn dim_u(&self) -> usize;
    fn dim_d(&self) -> usize;
    fn state_names(&self) -> Vec<&'static str>;

    /// Right-hand side `f(x, u, d)`.
    fn rhs(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64>;
    fn rhs_enclosure(&self, x: &IBox, u: &IBox, d: &IBox) -> IBox;

    fn step(&self, x: &[f64], u: &[f64], d: &[f64], h: f64) -> Vec<f64>;
    /// Box containing `step(x, u, d, h)` for every `x, u, d` in the boxes.
    fn step_enclosure(&self, x: &IBox, u: &IBox, d: &IBox, h: f64) -> IBox;
    /// Box containing every state visited during one step.
    fn sweep_enclosure(&self, x: &IBox, u: &IBox, d: &IBox, h: f64) -> IBox;
    /// Box containing every `x ∈ within` with `step(x, u, d, h) ∈ y` for some
    /// `u, d` in the boxes. `certified` means every `(y, u, d)` has such an
    /// `x` inside the returned box.
    fn preimage_enclosure(&self, y: &IBox, u: &IBox, d: &IBox, h: f64, within: &IBox) -> Option<Preimage>;

    /// Model-specific admissibility of the input and domain boxes.
    fn check_boxes(&self, _x: &IBox, _u: &IBox, _d: &IBox) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preimage {
    pub hull: IBox,
    pub certified: bool,
}

/// Largest and smallest of `a·s + b·s²/2` over `s ∈ [0, h]`.
fn quad_range(a: f64, b: f64, h: f64) -> Interval {
    let q = |s: f64| a * s + 0.5 * b * s * s;
    let mut lo = 0.0f64.min(q(h));
    let mut hi = 0.0f64.max(q(h));
    if b != 0.0 {
        let s = -a / b;
        if s > 0.0 && s < h {
            lo = lo.min(q(s));
            hi = hi.max(q(s));
        }
    }
    Interval::new(lo, hi)
}

fn span(h: f64) -> Interval {
    Interval::new(0.0, h)
}

#[derive(Debug, Clone, Default)]
pub struct Integrator1d;

impl Flow for Integrator1d {
    fn name(&self) -> &'static str {
        "integrator1d"
    }
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_u(&self) -> usize {
        1
    }
    fn dim_d(&self) -> usize {
        0
    }
    fn state_names(&self) -> Vec<&'static str> {
        vec!["x"]
    }
    fn rhs(&self, _x: &[f64], u: &[f64], _d: &[f64]) -> Vec<f64> {
        vec![u[0]]
    }
    fn rhs_enclosure(&self, _x: &IBox, u: &IBox, _d: &IBox) -> IBox {
        IBox::new(vec![u.0[0]])
    }
    fn step(&self, x: &[f64], u: &[f64], _d: &[f64], h: f64) -> Vec<f64> {
        vec![x[0] + h * u[0]]
    }
    fn step_enclosure(&self, x: &IBox, u: &IBox, _d: &IBox, h: f64) -> IBox {
        IBox::new(vec![x.0[0] + u.0[0] * h]).outward()
    }
    fn sweep_enclosure(&self, x: &IBox, u: &IBox, _d: &IBox, h: f64) -> IBox {
        IBox::new(vec![x.0[0] + span(h) * u.0[0]]).outward()
    }
    fn preimage_enclosure(&self, y: &IBox, u: &IBox, _d: &IBox, h: f64, _within: &IBox) -> Option<Preimage> {
        Some(Preimage { hull: IBox::new(vec![y.0[0] - u.0[0] * h]).outward(), certified: true })
    }
}

/// `ṗ = v, v̇ = u`.
#[derive(Debug, Clone, Default)]
pub struct DoubleIntegrator;

impl Flow for DoubleIntegrator {
    fn name(&self) -> &'static str {
        "double_integrator"
    }
    fn dim_x(&self) -> usize {
        2
    }
    fn dim_u(&self) -> usize {
        1
    }
    fn dim_d(&self) -> usize {
        0
    }
    fn state_names(&self) -> Vec<&'static str> {
        vec!["p", "v"]
    }
    fn rhs(&self, x: &[f64], u: &[f64], _d: &[f64]) -> Vec<f64> {
        vec![x[1], u[0]]
    }
    fn rhs_enclosure(&self, x: &IBox, u: &IBox, _d: &IBox) -> IBox {
        IBox::new(vec![x.0[1], u.0[0]])
    }
    fn step(&self, x: &[f64], u: &[f64], _d: &[f64], h: f64) -> Vec<f64> {
        vec![x[0] + h * x[1] + 0.5 * h * h * u[0], x[1] + h * u[0]]
    }
    fn step_enclosure(&self, x: &IBox, u: &IBox, _d: &IBox, h: f64) -> IBox {
        let (p, v, a) = (x.0[0], x.0[1], u.0[0]);
        IBox::new(vec![p + v * h + a * (0.5 * h * h), v + a * h]).outward()
    }
    fn sweep_enclosure(&self, x: &IBox, u: &IBox, _d: &IBox, h: f64) -> IBox {
        // position is monotone in p, v and u for s >= 0
        let (p, v, a) = (x.0[0], x.0[1], u.0[0]);
        let hi = p.hi + quad_range(v.hi, a.hi, h).hi;
        let lo = p.lo + quad_range(v.lo, a.lo, h).lo;
        IBox::new(vec![Interval::new(lo, hi), v + span(h) * a]).outward()
    }
    fn preimage_enclosure(&self, y: &IBox, u: &IBox, _d: &IBox, h: f64, _within: &IBox) -> Option<Preimage> {
        let (p, v, a) = (y.0[0], y.0[1], u.0[0]);
        let hull = IBox::new(vec![p - v * h + a * (0.5 * h * h), v - a * h]).outward();
        Some(Preimage { hull, certified: true })
    }
}

/// Ego following a lead on one lane: state `(gap, v_ego, v_lead)`, control
/// the ego acceleration, disturbance the lead acceleration.
#[derive(Debug, Clone, Default)]
pub struct RelativeLongitudinal;

impl Flow for RelativeLongitudinal {
    fn name(&self) -> &'static str {
        "relative_longitudinal"
    }
    fn dim_x(&self) -> usize {
        3
    }
    fn dim_u(&self) -> usize {
        1
    }
    fn dim_d(&self) -> usize {
        1
    }
    fn state_names(&self) -> Vec<&'static str> {
        vec!["gap", "v_ego", "v_lead"]
    }
    fn rhs(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64> {
        vec![x[2] - x[1], u[0], d[0]]
    }
    fn rhs_enclosure(&self, x: &IBox, u: &IBox, d: &IBox) -> IBox {
        IBox::new(vec![x.0[2] - x.0[1], u.0[0], d.0[0]])
    }
    fn step(&self, x: &[f64], u: &[f64], d: &[f64], h: f64) -> Vec<f64> {
        vec![
            x[0] + h * (x[2] - x[1]) + 0.5 * h * h * (d[0] - u[0]),
            x[1] + h * u[0],
            x[2] + h * d[0],
        ]
    }
    fn step_enclosure(&self, x: &IBox, u: &IBox, d: &IBox, h: f64) -> IBox {
        let (g, ve, vl, a, b) = (x.0[0], x.0[1], x.0[2], u.0[0], d.0[0]);
        IBox::new(vec![g + (vl - ve) * h + (b - a) * (0.5 * h * h), ve + a * h, vl + b * h]).outward()
    }
    fn sweep_enclosure(&self, x: &IBox, u: &IBox, d: &IBox, h: f64) -> IBox {
        // gap grows with gap, v_lead, d and shrinks with v_ego, u
        let (g, ve, vl, a, b) = (x.0[0], x.0[1], x.0[2], u.0[0], d.0[0]);
        let hi = g.hi + quad_range(vl.hi - ve.lo, b.hi - a.lo, h).hi;
        let lo = g.lo + quad_range(vl.lo - ve.hi, b.lo - a.hi, h).lo;
        IBox::new(vec![Interval::new(lo, hi), ve + span(h) * a, vl + span(h) * b]).outward()
    }
    fn preimage_enclosure(&self, y: &IBox, u: &IBox, d: &IBox, h: f64, _within: &IBox) -> Option<Preimage> {
        let (g, ve, vl, a, b) = (y.0[0], y.0[1], y.0[2], u.0[0], d.0[0]);
        let q = 0.5 * h * h;
        let hull = IBox::new(vec![g + (ve - vl) * h + (b - a) * q, ve - a * h, vl - b * h]).outward();
        Some(Preimage { hull, certified: true })
    }
}

/// Kinematic bicycle over `(x, y, θ, v)` with control `(a, δ)`.
#[derive(Debug, Clone)]
pub struct KinematicBicycle {
    pub wheelbase: f64,
}

impl Default for KinematicBicycle {
    fn default() -> Self {
        Self { wheelbase: 2.7 }
    }
}

impl KinematicBicycle {
    fn euler(&self, x: &IBox, u: &IBox, d: &IBox, h: f64) -> IBox {
        let f = self.rhs_enclosure(x, u, d);
        IBox::new(x.0.iter().zip(&f.0).map(|(&xi, &fi)| xi + fi * h).collect())
    }

    /// Box containing the continuous trajectory over one step, by the
    /// Picard inclusion `x + [0,h]·F(B) ⊆ B`.
    fn flow_box(&self, x: &IBox, u: &IBox, d: &IBox, h: f64) -> IBox {
        let f0 = self.rhs_enclosure(x, u, d);
        let mut b = IBox::new(x.0.iter().zip(&f0.0).map(|(&xi, &fi)| xi + span(h) * fi).collect());
        for _ in 0..20 {
            let inflated = IBox::new(b.0.iter().map(|i| i.inflate(0.1 * i.width() + 1e-9)).collect());
            let f = self.rhs_enclosure(&inflated, u, d);
            let next = IBox::new(x.0.iter().zip(&f.0).map(|(&xi, &fi)| xi + span(h) * fi).collect());
            if inflated.contains_box(&next) {
                return inflated;
            }
            b = inflated.hull(&next);
        }
        // speed and heading rates are bounded by the boxes, so this is
        // unreachable for admissible inputs; fall back to a crude hull
        let f = self.rhs_enclosure(&b, u, d);
        IBox::new(b.0.iter().zip(&f.0).map(|(&bi, &fi)| bi + span(h) * fi.inflate(fi.mag())).collect())
    }

    /// `½h²·sup|ẍ|` per component over the trajectory box.
    fn remainder(&self, x: &IBox, u: &IBox, d: &IBox, h: f64) -> Vec<f64> {
        let b = self.flow_box(x, u, d, h);
        let (th, v) = (b.0[2], b.0[3]);
        let (a, delta) = (u.0[0], u.0[1]);
        let k = delta.tan().expect("checked steering bound").scale(1.0 / self.wheelbase);
        let omega = v * k;
        let xdd = a * th.cos() - v * th.sin() * omega;
        let ydd = a * th.sin() + v * th.cos() * omega;
        let thdd = a * k;
        let q = 0.5 * h * h;
        vec![q * xdd.mag(), q * ydd.mag(), q * thdd.mag(), 0.0]
    }
}

impl Flow for KinematicBicycle {
    fn name(&self) -> &'static str {
        "kinematic_bicycle"
    }
    fn dim_x(&self) -> usize {
        4
    }
    fn dim_u(&self) -> usize {
        2
    }
    fn dim_d(&self) -> usize {
        0
    }
    fn state_names(&self) -> Vec<&'static str> {
        vec!["x", "y", "heading", "v"]
    }
    fn rhs(&self, x: &[f64], u: &[f64], _d: &[f64]) -> Vec<f64> {
        let (th, v) = (x[2], x[3]);
        vec![v * th.cos(), v * th.sin(), v * u[1].tan() / self.wheelbase, u[0]]
    }
    fn rhs_enclosure(&self, x: &IBox, u: &IBox, _d: &IBox) -> IBox {
        let (th, v) = (x.0[2], x.0[3]);
        let k = u.0[1].tan().expect("checked steering bound").scale(1.0 / self.wheelbase);
        IBox::new(vec![v * th.cos(), v * th.sin(), v * k, u.0[0]])
    }
    fn step(&self, x: &[f64], u: &[f64], d: &[f64], h: f64) -> Vec<f64> {
        let f = self.rhs(x, u, d);
        x.iter().zip(&f).map(|(xi, fi)| xi + h * fi).collect()
    }
    fn step_enclosure(&self, x: &IBox, u: &IBox, d: &IBox, h: f64) -> IBox {
        let e = self.euler(x, u, d, h);
        let r = self.remainder(x, u, d, h);
        IBox::new(e.0.iter().zip(&r).map(|(i, &ri)| i.inflate(ri)).collect()).outward()
    }
    fn sweep_enclosure(&self, x: &IBox, u: &IBox, d: &IBox, h: f64) -> IBox {
        // the Picard box holds the continuous flow; the Euler chord between
        // samples lies in the hull of its endpoints
        let chord = x.hull(&self.euler(x, u, d, h));
        self.flow_box(x, u, d, h).hull(&chord).outward()
    }
    fn preimage_enclosure(&self, y: &IBox, u: &IBox, d: &IBox, h: f64, within: &IBox) -> Option<Preimage> {
        // x = y - h·f(x, u, d), iterated as a contraction on boxes
        let mut xb = within.clone();
        let mut certified = false;
        for _ in 0..8 {
            let f = self.rhs_enclosure(&xb, u, d);
            let g = IBox::new(y.0.iter().zip(&f.0).map(|(&yi, &fi)| yi - fi * h).collect()).outward();
            certified |= xb.contains_box(&g);
            xb = g.intersect(&xb)?;
        }
        Some(Preimage { hull: xb, certified })
    }
    fn check_boxes(&self, _x: &IBox, u: &IBox, _d: &IBox) -> Result<(), String> {
        if u.0[1].tan().is_none() {
            return Err("steering bound must lie strictly inside (-pi/2, pi/2)".into());
        }
        if !(self.wheelbase > 0.0) {
            return Err("wheelbase must be positive".into());
        }
        Ok(())
    }
}

pub const MODEL_NAMES: [&str; 4] = ["integrator1d", "double_integrator", "kinematic_bicycle", "relative_longitudinal"];

/// Look up a shipped model; `params` carries model constants such as
/// `wheelbase`.
pub fn model_by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Arc<dyn Flow>, ReachError> {
    let known: &[&str] = match name {
        "kinematic_bicycle" => &["wheelbase"],
        _ => &[],
    };
    if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(ReachError::Model(format!("model `{name}` has no parameter `{k}`")));
    }
    Ok(match name {
        "integrator1d" => Arc::new(Integrator1d),
        "double_integrator" => Arc::new(DoubleIntegrator),
        "relative_longitudinal" => Arc::new(RelativeLongitudinal),
        "kinematic_bicycle" => Arc::new(KinematicBicycle {
            wheelbase: params.get("wheelbase").copied().unwrap_or(KinematicBicycle::default().wheelbase),
        }),
        other => {
            return Err(ReachError::Model(format!(
                "unknown model `{other}` (known: {})",
                MODEL_NAMES.join(", ")
            )))
        }
    })
}

/// A flow together with its state domain and input boxes.
#[derive(Debug, Clone)]
pub struct DynamicalSystem {
    pub flow: Arc<dyn Flow>,
    pub x_box: IBox,
    pub u_box: IBox,
    pub d_box: IBox,
}

impl DynamicalSystem {
    pub fn new(flow: Arc<dyn Flow>, x_box: IBox, u_box: IBox, d_box: IBox) -> Result<Self, ReachError> {
        let dims = [
            ("state", x_box.dim(), flow.dim_x()),
            ("control", u_box.dim(), flow.dim_u()),
            ("disturbance", d_box.dim(), flow.dim_d()),
        ];
        for (what, got, want) in dims {
            if got != want {
                return Err(ReachError::Model(format!(
                    "`{}` needs a {want}-dimensional {what} box, got {got}",
                    flow.name()
                )));
            }
        }
        for (what, b) in [("state", &x_box), ("control", &u_box), ("disturbance", &d_box)] {
            if !b.is_bounded() {
                return Err(ReachError::Model(format!("{what} box {b} must be bounded and nonempty")));
            }
        }
        flow.check_boxes(&x_box, &u_box, &d_box).map_err(ReachError::Model)?;
        Ok(Self { flow, x_box, u_box, d_box })
    }

    pub fn dim_x(&self) -> usize {
        self.flow.dim_x()
    }

    pub fn step(&self, x: &[f64], u: &[f64], d: &[f64], h: f64) -> Vec<f64> {
        self.flow.step(x, u, d, h)
    }

    /// Disturbance box collapsed to its center.
    pub fn d_center(&self) -> IBox {
        IBox::point(&self.d_box.center())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn models() -> Vec<(Arc<dyn Flow>, IBox, IBox, IBox)> {
        vec![
            (
                Arc::new(Integrator1d),
                IBox::from_bounds(&[-1.0], &[1.0]),
                IBox::from_bounds(&[-1.0], &[1.0]),
                IBox::empty_dims(),
            ),
            (
                Arc::new(DoubleIntegrator),
                IBox::from_bounds(&[0.0, 5.0], &[1.0, 6.0]),
                IBox::from_bounds(&[-5.0], &[2.0]),
                IBox::empty_dims(),
            ),
            (
                Arc::new(RelativeLongitudinal),
                IBox::from_bounds(&[10.0, 8.0, 5.0], &[11.0, 9.0, 7.0]),
                IBox::from_bounds(&[-5.0], &[2.0]),
                IBox::from_bounds(&[-3.0], &[1.0]),
            ),
            (
                Arc::new(KinematicBicycle::default()),
                IBox::from_bounds(&[0.0, 0.0, -0.2, 9.0], &[0.5, 0.5, 0.3, 10.0]),
                IBox::from_bounds(&[-3.0, -0.4], &[2.0, 0.4]),
                IBox::empty_dims(),
            ),
        ]
    }

    fn sample(b: &IBox, rng: &mut ChaCha8Rng) -> Vec<f64> {
        b.0.iter().map(|i| if i.width() > 0.0 { rng.gen_range(i.lo..=i.hi) } else { i.lo }).collect()
    }

    #[test]
    fn enclosures_contain_point_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (f, xb, ub, db) in models() {
            let h = 0.1;
            let step = f.step_enclosure(&xb, &ub, &db, h);
            let sweep = f.sweep_enclosure(&xb, &ub, &db, h);
            for _ in 0..2000 {
                let (x, u, d) = (sample(&xb, &mut rng), sample(&ub, &mut rng), sample(&db, &mut rng));
                let y = f.step(&x, &u, &d, h);
                assert!(step.contains_point(&y), "{}: {y:?} outside {step}", f.name());
                // fine Euler substeps approximate the continuous path
                let mut z = x.clone();
                for _ in 0..50 {
                    let r = f.rhs(&z, &u, &d);
                    z.iter_mut().zip(&r).for_each(|(zi, ri)| *zi += h / 50.0 * ri);
                    assert!(sweep.contains_point(&z), "{}: sweep misses {z:?}", f.name());
                }
                let pre = f.preimage_enclosure(&IBox::point(&y), &ub, &db, h, &xb).unwrap();
                assert!(pre.hull.contains_point(&x), "{}: preimage misses {x:?}", f.name());
            }
        }
    }

    #[test]
    fn linear_steps_are_exact() {
        // constant deceleration from 10 m/s: stops at 2 s after 10 m
        let f = DoubleIntegrator;
        let mut x = vec![0.0, 10.0];
        for _ in 0..200 {
            x = f.step(&x, &[-5.0], &[], 0.01);
        }
        assert!((x[0] - 10.0).abs() < 1e-9 && x[1].abs() < 1e-9);
    }

    #[test]
    fn library_lookup() {
        let mut p = BTreeMap::new();
        assert_eq!(model_by_name("double_integrator", &p).unwrap().dim_x(), 2);
        p.insert("wheelbase".into(), 3.0);
        assert!(model_by_name("kinematic_bicycle", &p).is_ok());
        assert!(model_by_name("double_integrator", &p).is_err());
        assert!(model_by_name("unicycle", &BTreeMap::new()).is_err());
        let bad = DynamicalSystem::new(
            Arc::new(KinematicBicycle::default()),
            IBox::from_bounds(&[0.0; 4], &[1.0; 4]),
            IBox::from_bounds(&[-1.0, -2.0], &[1.0, 2.0]),
            IBox::empty_dims(),
        );
        assert!(bad.is_err());
    }
}
