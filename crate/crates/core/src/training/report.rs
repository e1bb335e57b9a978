use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::scalar::Scalar;

/// |learned − reference| / |reference| per parameter.
pub fn relative_errors<T: Scalar>(learned: &[T], reference: &[T]) -> Vec<T> {
    learned
        .iter()
        .zip(reference)
        .map(|(&l, &r)| (l - r).abs() / r.abs())
        .collect()
}

/// Outcome of a fit in the layout of the published result tables:
/// true value, learned value and initialization per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport<T> {
    pub names: Vec<String>,
    pub init: Vec<T>,
    pub learned: Vec<T>,
    pub truth: Option<Vec<T>>,
    pub rel_error: Option<Vec<T>>,
    /// Published values to compare against, when reproducing a table.
    pub reference: Option<Vec<T>>,
    pub loss_history: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> FitReport<T> {
    pub fn new(
        names: Vec<String>,
        init: Vec<T>,
        learned: Vec<T>,
        loss_history: Vec<T>,
        iterations: usize,
        converged: bool,
    ) -> Self {
        Self {
            names,
            init,
            learned,
            truth: None,
            rel_error: None,
            reference: None,
            loss_history,
            iterations,
            converged,
        }
    }

    pub fn with_truth(mut self, truth: Vec<T>) -> Self {
        assert_eq!(truth.len(), self.learned.len(), "truth length");
        self.rel_error = Some(relative_errors(&self.learned, &truth));
        self.truth = Some(truth);
        self
    }

    pub fn with_reference(mut self, reference: Vec<T>) -> Self {
        assert_eq!(reference.len(), self.learned.len(), "reference length");
        self.reference = Some(reference);
        self
    }

    pub fn value(&self, name: &str) -> Option<T> {
        self.names.iter().position(|n| n == name).map(|i| self.learned[i])
    }

    pub fn final_loss(&self) -> Option<T> {
        self.loss_history.last().copied()
    }

    /// Largest relative error against the truth.
    pub fn max_rel_error(&self) -> Option<T> {
        self.rel_error
            .as_ref()
            .map(|e| e.iter().fold(T::zero(), |a, &b| a.max(b)))
    }

    fn named(&self, values: &[T]) -> Value {
        let mut map = Map::new();
        for (n, v) in self.names.iter().zip(values) {
            map.insert(n.clone(), json!(v.to_f64_lossy()));
        }
        Value::Object(map)
    }

    pub fn to_json(&self) -> Value {
        let opt = |v: &Option<Vec<T>>| v.as_ref().map_or(Value::Null, |v| self.named(v));
        let reference_error = self
            .reference
            .as_ref()
            .map_or(Value::Null, |r| self.named(&relative_errors(&self.learned, r)));
        json!({
            "parameters": self.names,
            "learned": self.named(&self.learned),
            "init": self.named(&self.init),
            "truth": opt(&self.truth),
            "rel_error": opt(&self.rel_error),
            "reference": opt(&self.reference),
            "reference_rel_error": reference_error,
            "loss_history": self.loss_history.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
            "iterations": self.iterations,
            "converged": self.converged,
        })
    }

    /// Plain-text table: parameter, true value, learned, init, relative error.
    pub fn table(&self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{title}");
        let _ = writeln!(
            out,
            "{:<10} {:>12} {:>12} {:>12} {:>10} {:>12}",
            "parameter", "true", "learned", "init", "rel.err", "published"
        );
        let cell = |v: Option<T>| {
            v.filter(|v| v.is_finite())
                .map_or("-".to_string(), |v| format!("{:.4}", v.to_f64_lossy()))
        };
        for (i, name) in self.names.iter().enumerate() {
            let truth = self.truth.as_ref().map(|t| t[i]);
            let err = self
                .rel_error
                .as_ref()
                .map(|e| e[i])
                .filter(|e| e.is_finite())
                .map_or("-".to_string(), |e| format!("{:.2}%", 100.0 * e.to_f64_lossy()));
            let _ = writeln!(
                out,
                "{:<10} {:>12} {:>12} {:>12} {:>10} {:>12}",
                name,
                cell(truth),
                cell(Some(self.learned[i])),
                cell(Some(self.init[i])),
                err,
                cell(self.reference.as_ref().map(|r| r[i])),
            );
        }
        if let Some(loss) = self.final_loss() {
            let _ = writeln!(
                out,
                "final loss {:.3e} after {} iterations",
                loss.to_f64_lossy(),
                self.iterations
            );
        }
        out
    }
}
