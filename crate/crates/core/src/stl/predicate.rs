//! Registered predicate library.
//!
//! A predicate is a real-valued function `μ` of one state sample; the atom
//! holds when `μ ≥ 0`. Predicates read named signal channels, resolved once
//! per signal layout when a formula is bound.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Bound evaluator over one state row.
pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

type Builder = Arc<dyn Fn(&[f64], &dyn Fn(&str) -> Option<usize>) -> Result<Evaluator, String> + Send + Sync>;

#[derive(Clone)]
pub struct PredicateDef {
    name: String,
    /// Parameter names with optional defaults.
    params: Vec<(String, Option<f64>)>,
    description: String,
    build: Builder,
}

impl fmt::Debug for PredicateDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredicateDef").field("name", &self.name).field("params", &self.params).finish()
    }
}

impl PredicateDef {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn params(&self) -> &[(String, Option<f64>)] {
        &self.params
    }

    /// Fill defaulted trailing arguments, or explain the arity mismatch.
    pub fn resolve_args(&self, args: &[f64]) -> Result<Vec<f64>, String> {
        if args.len() > self.params.len() {
            return Err(format!(
                "`{}` takes at most {} argument(s), got {}",
                self.name,
                self.params.len(),
                args.len()
            ));
        }
        let mut out = args.to_vec();
        for (pname, default) in &self.params[args.len()..] {
            match default {
                Some(v) => out.push(*v),
                None => return Err(format!("`{}` requires argument `{pname}`", self.name)),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct PredicateRegistry {
    defs: BTreeMap<String, PredicateDef>,
}

impl Default for PredicateRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl PredicateRegistry {
    /// Only the constants `true` and `false`.
    pub fn empty() -> Self {
        let mut r = Self { defs: BTreeMap::new() };
        r.register_fn("true", &[], "always holds", |_, _| Ok(Arc::new(|_| 1.0)));
        r.register_fn("false", &[], "never holds", |_, _| Ok(Arc::new(|_| -1.0)));
        r
    }

    /// Constants plus the driving predicates over simulator channels.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register_fn(
            "collision_free",
            &[],
            "minimum signed clearance to every agent footprint is nonnegative (channel `clearance`)",
            |_, ch| {
                let k = need(ch, "clearance")?;
                Ok(Arc::new(move |s| s[k]))
            },
        );
        r.register_fn(
            "in_lane",
            &[],
            "ego footprint inside the lane band (channel `lane_margin`)",
            |_, ch| {
                let k = need(ch, "lane_margin")?;
                Ok(Arc::new(move |s| s[k]))
            },
        );
        r.register_fn(
            "speed_below",
            &[("v_max", None)],
            "ego speed at most v_max (channel `ego.v`)",
            |a, ch| {
                let k = need(ch, "ego.v")?;
                let v_max = a[0];
                Ok(Arc::new(move |s| v_max - s[k]))
            },
        );
        r.register_fn(
            "lane_return",
            &[("lateral_tol", Some(0.5)), ("heading_tol", Some(0.1))],
            "lateral offset and heading both within the lane-return envelope (channels `lane_offset`, `ego.heading`)",
            |a, ch| {
                let off = need(ch, "lane_offset")?;
                let hd = need(ch, "ego.heading")?;
                let (lat, head) = (a[0], a[1]);
                Ok(Arc::new(move |s| (lat - s[off].abs()).min(head - s[hd].abs())))
            },
        );
        r
    }

    pub fn register_fn<F>(&mut self, name: &str, params: &[(&str, Option<f64>)], description: &str, build: F)
    where
        F: Fn(&[f64], &dyn Fn(&str) -> Option<usize>) -> Result<Evaluator, String> + Send + Sync + 'static,
    {
        self.defs.insert(
            name.to_string(),
            PredicateDef {
                name: name.to_string(),
                params: params.iter().map(|(n, d)| (n.to_string(), *d)).collect(),
                description: description.to_string(),
                build: Arc::new(build),
            },
        );
    }

    /// Register `name` as `μ(s) = s[channel] - threshold`.
    pub fn register_channel_threshold(&mut self, name: &str, channel: &str, threshold: f64) {
        let channel = channel.to_string();
        self.register_fn(name, &[], "channel above threshold", move |_, ch| {
            let k = need(ch, &channel)?;
            Ok(Arc::new(move |s| s[k] - threshold))
        });
    }

    pub fn get(&self, name: &str) -> Option<&PredicateDef> {
        self.defs.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.keys().map(String::as_str)
    }

    pub fn bind(&self, name: &str, args: &[f64], channels: &[String]) -> Result<Evaluator, String> {
        let def = self.get(name).ok_or_else(|| format!("unknown predicate `{name}`"))?;
        let args = def.resolve_args(args)?;
        let lookup = |c: &str| channels.iter().position(|x| x == c);
        (def.build)(&args, &lookup)
    }
}

fn need(lookup: &dyn Fn(&str) -> Option<usize>, channel: &str) -> Result<usize, String> {
    lookup(channel).ok_or_else(|| format!("signal has no channel `{channel}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_binding_reads_channels() {
        let r = PredicateRegistry::with_builtins();
        let ch = vec!["ego.v".to_string(), "clearance".to_string()];
        let f = r.bind("speed_below", &[30.0], &ch).unwrap();
        assert_eq!(f(&[25.0, 1.0]), 5.0);
        let c = r.bind("collision_free", &[], &ch).unwrap();
        assert_eq!(c(&[25.0, -0.5]), -0.5);
        assert!(r.bind("in_lane", &[], &ch).err().unwrap().contains("lane_margin"));
    }

    #[test]
    fn defaults_and_arity() {
        let r = PredicateRegistry::with_builtins();
        let def = r.get("lane_return").unwrap();
        assert_eq!(def.resolve_args(&[]).unwrap(), vec![0.5, 0.1]);
        assert_eq!(def.resolve_args(&[1.0]).unwrap(), vec![1.0, 0.1]);
        assert!(def.resolve_args(&[1.0, 2.0, 3.0]).is_err());
        assert!(r.get("speed_below").unwrap().resolve_args(&[]).is_err());
    }
}
