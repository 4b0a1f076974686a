//! Label inference attacks.

use ndarray::ArrayView2;

use crate::data::Conditional;
use crate::error::{Error, Result};
use crate::metrics::UtilitySpec;
use crate::models::Model;

/// What the adversary holds: the public features always, plus any of the
/// released model, the exact conditional `P(y | x)` and the label marginal.
#[derive(Clone, Copy)]
pub struct AdversaryKnowledge<'a> {
    pub features: ArrayView2<'a, f64>,
    pub model: Option<&'a Model>,
    pub conditional: Option<&'a dyn Conditional>,
    pub marginal: Option<&'a [f64]>,
}

impl<'a> AdversaryKnowledge<'a> {
    pub fn new(features: ArrayView2<'a, f64>) -> Self {
        Self {
            features,
            model: None,
            conditional: None,
            marginal: None,
        }
    }

    pub fn with_model(mut self, model: &'a Model) -> Self {
        self.model = Some(model);
        self
    }

    pub fn with_conditional(mut self, cond: &'a dyn Conditional) -> Self {
        self.conditional = Some(cond);
        self
    }

    pub fn with_marginal(mut self, marginal: &'a [f64]) -> Self {
        self.marginal = Some(marginal);
        self
    }
}

/// A guessed label per row of the target features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferredLabels {
    pub labels: Vec<usize>,
    pub attack: &'static str,
}

/// Simple prediction attack: evaluate the released model on the public
/// features and answer each row with the guess maximizing expected utility
/// under the model's probabilities. For zero-one utility that is the model's
/// argmax; for the weighted utility it is `argmax_y f_y(x) / p_y`.
pub fn spa(knowledge: &AdversaryKnowledge<'_>, spec: &UtilitySpec) -> Result<InferredLabels> {
    let model = knowledge.model.ok_or(Error::MissingKnowledge("a released model"))?;
    spec.check_classes(model.num_classes())?;
    let proba = model.predict_proba_batch(knowledge.features);
    let labels = proba
        .rows()
        .into_iter()
        .map(|row| spec.best_response(row.as_slice().expect("standard layout")).0)
        .collect();
    Ok(InferredLabels { labels, attack: "spa" })
}

/// Bayes-optimal label-independent attack: `argmax_y P(y | X_i)` per row. It
/// never looks at the released model.
pub fn prior_attack(knowledge: &AdversaryKnowledge<'_>) -> Result<InferredLabels> {
    prior_attack_with(knowledge, &UtilitySpec::zero_one())
}

/// [`prior_attack`] for a general utility: per row the guess maximizing
/// `E[u(guess, y) | X_i]`.
pub fn prior_attack_with(knowledge: &AdversaryKnowledge<'_>, spec: &UtilitySpec) -> Result<InferredLabels> {
    let cond = knowledge
        .conditional
        .ok_or(Error::MissingKnowledge("the conditional label distribution"))?;
    spec.check_classes(cond.num_classes())?;
    let mut p = vec![0.0; cond.num_classes()];
    let labels = knowledge
        .features
        .rows()
        .into_iter()
        .map(|row| {
            cond.proba_into(row, &mut p);
            spec.best_response(&p).0
        })
        .collect();
    Ok(InferredLabels { labels, attack: "prior" })
}

/// Best attack without the model or the features: every row gets the guess
/// maximizing expected utility under the label marginal.
pub fn marginal_guess(knowledge: &AdversaryKnowledge<'_>, spec: &UtilitySpec) -> Result<InferredLabels> {
    let marginal = knowledge.marginal.ok_or(Error::MissingKnowledge("the label marginal"))?;
    spec.check_classes(marginal.len())?;
    let guess = spec.best_response(marginal).0;
    Ok(InferredLabels {
        labels: vec![guess; knowledge.features.nrows()],
        attack: "marginal-guess",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, FnConditional, MixtureModel};
    use crate::models::{constant_model, majority_table};
    use ndarray::{array, Array2, ArrayView1};

    #[test]
    fn spa_recovers_labels_from_one_hot_model() {
        let x = array![[0.0], [1.0], [2.0]];
        let ds = Dataset::new(x.clone(), vec![2, 0, 1], 3).unwrap();
        let model = majority_table(&ds);
        let out = spa(&AdversaryKnowledge::new(x.view()).with_model(&model), &UtilitySpec::zero_one()).unwrap();
        assert_eq!(out.labels, vec![2, 0, 1]);
    }

    #[test]
    fn weighted_spa_ratio_rule() {
        let x = Array2::zeros((1, 1));
        let w = UtilitySpec::weighted(vec![0.97, 0.03]).unwrap();
        let lean = constant_model(vec![0.96, 0.04]).unwrap();
        let k = AdversaryKnowledge::new(x.view()).with_model(&lean);
        assert_eq!(spa(&k, &w).unwrap().labels, vec![1]);
        let firm = constant_model(vec![0.98, 0.02]).unwrap();
        let k = AdversaryKnowledge::new(x.view()).with_model(&firm);
        assert_eq!(spa(&k, &w).unwrap().labels, vec![0]);
    }

    #[test]
    fn missing_knowledge_errors() {
        let x = Array2::zeros((2, 1));
        let k = AdversaryKnowledge::new(x.view());
        assert!(matches!(spa(&k, &UtilitySpec::zero_one()), Err(Error::MissingKnowledge(_))));
        assert!(matches!(prior_attack(&k), Err(Error::MissingKnowledge(_))));
        assert!(matches!(
            marginal_guess(&k, &UtilitySpec::zero_one()),
            Err(Error::MissingKnowledge(_))
        ));
    }

    #[test]
    fn prior_attack_ties_and_bisector() {
        let x = Array2::zeros((3, 2));
        let uniform = FnConditional::new(4, |_: ArrayView1<'_, f64>| vec![0.25; 4]);
        let out = prior_attack(&AdversaryKnowledge::new(x.view()).with_conditional(&uniform)).unwrap();
        assert_eq!(out.labels, vec![0, 0, 0]);

        let mix = MixtureModel::new(2, 2, 1.0).unwrap();
        let pts = array![[1.0, 0.2], [0.1, 0.9], [-3.0, -2.0], [5.0, 5.5]];
        let out = prior_attack(&AdversaryKnowledge::new(pts.view()).with_conditional(&mix)).unwrap();
        assert_eq!(out.labels, vec![0, 1, 1, 1]);
    }

    #[test]
    fn marginal_guess_modal_and_weighted() {
        let x = Array2::zeros((4, 1));
        let p = [0.97, 0.03];
        let k = AdversaryKnowledge::new(x.view()).with_marginal(&p);
        assert_eq!(marginal_guess(&k, &UtilitySpec::zero_one()).unwrap().labels, vec![0; 4]);
        let w = UtilitySpec::weighted(p.to_vec()).unwrap();
        // both guesses are worth exactly 1/2; tie to class 0
        assert_eq!(w.best_response(&p), (0, 0.5));
        assert_eq!(marginal_guess(&k, &w).unwrap().labels, vec![0; 4]);
    }
}
