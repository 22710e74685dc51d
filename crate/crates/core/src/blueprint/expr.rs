//! Arithmetic expressions over blueprint free parameters.

use std::collections::BTreeMap;
use std::fmt;

use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value,
};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::BlueprintError;

/// A parsed expression such as `-t_d/2 + R_o*math::cos(theta_c/2)`.
///
/// Identifiers refer to free parameters; `pi` is always defined and the
/// `math::` functions of the expression engine are available.
#[derive(Clone)]
pub struct Expr {
    source: String,
    tree: Node<DefaultNumericTypes>,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, BlueprintError> {
        let tree = build_operator_tree::<DefaultNumericTypes>(source)
            .map_err(|e| BlueprintError::Expression { expr: source.to_string(), reason: e.to_string() })?;
        Ok(Expr { source: source.to_string(), tree })
    }

    pub fn constant(v: f64) -> Expr {
        Expr::parse(&format!("{v:?}")).expect("float literal parses")
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Identifiers referenced by the expression, excluding `pi`.
    pub fn variables(&self) -> Vec<String> {
        let mut v: Vec<String> =
            self.tree.iter_variable_identifiers().filter(|s| *s != "pi").map(str::to_string).collect();
        v.sort();
        v.dedup();
        v
    }

    /// The referenced parameter if the expression is a bare identifier.
    pub fn as_identifier(&self) -> Option<&str> {
        let s = self.source.trim();
        let ident = !s.is_empty()
            && s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        (ident && s != "pi").then_some(s)
    }

    pub fn eval(&self, values: &BTreeMap<String, f64>) -> Result<f64, BlueprintError> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        let err = |reason: String| BlueprintError::Expression { expr: self.source.clone(), reason };
        ctx.set_value("pi".into(), Value::from_float(std::f64::consts::PI)).map_err(|e| err(e.to_string()))?;
        for name in self.variables() {
            let v = values.get(&name).ok_or_else(|| err(format!("unknown identifier `{name}`")))?;
            ctx.set_value(name, Value::from_float(*v)).map_err(|e| err(e.to_string()))?;
        }
        let v = self.tree.eval_number_with_context(&ctx).map_err(|e| err(e.to_string()))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err("non-finite value".into()))
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => Expr::parse(&s).map_err(serde::de::Error::custom),
            Raw::Number(v) => Ok(Expr::constant(v)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vals(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn evaluates_with_functions_and_pi() {
        let e = Expr::parse("-t_d/2 + R_o*math::cos(theta_c/2)").unwrap();
        let v = e.eval(&vals(&[("t_d", 0.02), ("R_o", 0.05), ("theta_c", 2.0)])).unwrap();
        assert!((v - (-0.01 + 0.05 * 1f64.cos())).abs() < 1e-15);
        assert_eq!(e.variables(), ["R_o", "t_d", "theta_c"]);
        assert!((Expr::parse("pi/2").unwrap().eval(&BTreeMap::new()).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(Expr::parse("2").unwrap().eval(&BTreeMap::new()).unwrap(), 2.0);
    }

    #[test]
    fn identifiers_and_errors() {
        assert_eq!(Expr::parse("R_o").unwrap().as_identifier(), Some("R_o"));
        assert_eq!(Expr::parse("R_o*2").unwrap().as_identifier(), None);
        assert!(Expr::parse("1 +").and_then(|e| e.eval(&BTreeMap::new())).is_err());
        assert!(Expr::parse("x").unwrap().eval(&BTreeMap::new()).is_err());
        assert_eq!(Expr::constant(0.25).eval(&BTreeMap::new()).unwrap(), 0.25);
        assert_eq!(Expr::constant(-1.0).eval(&BTreeMap::new()).unwrap(), -1.0);
    }
}
