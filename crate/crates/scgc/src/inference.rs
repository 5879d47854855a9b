//! Inference on a trained model: embeddings, soft assignments, hard labels,
//! metrics. Deliberately structure-free — this module never touches graph
//! or influence types, so evaluation cannot depend on adjacency by
//! construction.

use serde::{Deserialize, Serialize};

use crate::clustering::hard_labels;
use crate::error::Result;
use crate::losses::soft_assign;
use crate::matrix::Matrix;
use crate::metrics::{clustering_metrics, MetricReport};
use crate::model::{encode, AutoencoderParams};

/// Everything needed to cluster new data: the (possibly encoder-only)
/// network, the learned centroids, and the assignment kernel's degrees of
/// freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: AutoencoderParams,
    pub centroids: Matrix,
    pub eta: f64,
}

/// Output of one evaluation pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Present when ground-truth labels were supplied.
    pub report: Option<MetricReport>,
    pub embeddings: Matrix,
    pub assignments: Vec<usize>,
}

/// Encode, softly assign, extract hard labels, and score against the truth
/// when given. Takes no graph argument: inference needs feature rows only.
pub fn evaluate(model: &TrainedModel, x: &Matrix, truth: Option<&[usize]>) -> Result<Evaluation> {
    let embeddings = encode(&model.params, x)?;
    let q = soft_assign(&embeddings, &model.centroids, model.eta)?;
    let assignments = hard_labels(&q);
    let report = truth
        .map(|t| clustering_metrics(&assignments, t))
        .transpose()?;
    Ok(Evaluation {
        report,
        embeddings,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_autoencoder;
    use crate::rng::RngState;

    fn tiny_model() -> TrainedModel {
        let mut rng = RngState::new(3);
        let params = init_autoencoder(4, &[3], 2, false, &mut rng);
        let centroids = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        TrainedModel {
            params,
            centroids,
            eta: 1.0,
        }
    }

    #[test]
    fn no_truth_no_report() {
        let model = tiny_model();
        let mut rng = RngState::new(4);
        let x = Matrix::from_vec(5, 4, (0..20).map(|_| rng.next_f64()).collect()).unwrap();
        let out = evaluate(&model, &x, None).unwrap();
        assert!(out.report.is_none());
        assert_eq!(out.embeddings.shape(), (5, 2));
        assert_eq!(out.assignments.len(), 5);
    }

    #[test]
    fn repeated_evaluation_is_identical() {
        let model = tiny_model();
        let mut rng = RngState::new(5);
        let x = Matrix::from_vec(6, 4, (0..24).map(|_| rng.next_f64()).collect()).unwrap();
        let truth = vec![0, 1, 0, 1, 0, 1];
        let a = evaluate(&model, &x, Some(&truth)).unwrap();
        let b = evaluate(&model, &x, Some(&truth)).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.report, b.report);
    }
}
